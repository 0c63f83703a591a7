pub mod error;
pub mod hdg;
pub mod materials;
pub mod mesh;
pub mod polybasis;
pub mod scenarios;
pub mod timestepper;
pub mod verification;

pub use error::{HdgError, Result};
