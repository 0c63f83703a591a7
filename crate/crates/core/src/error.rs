use thiserror::Error;

/// Errors produced by the solver library.
#[derive(Debug, Error)]
pub enum HdgError {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid material: {0}")]
    InvalidMaterial(String),

    #[error("quadrature of exactness {requested} unavailable (maximum {max})")]
    QuadratureUnavailable { requested: usize, max: usize },

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("linear solver failure: {0}")]
    Solver(String),

    #[error("non-finite value in state at step {step}")]
    NonFinite { step: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, HdgError>;
