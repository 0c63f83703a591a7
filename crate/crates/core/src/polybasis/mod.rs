//! Reference-element polynomial bases, quadrature rules and L2 projections.

mod basis;
mod projection;
mod quadrature;

pub use basis::{dim_p, BasisTable, FaceBasis, VolumeBasis};
pub use projection::{
    evaluate, face_aligned, face_point, face_table, project_face, project_volume, trace_constant_probe, volume_table,
    AffineMap, REF_VERTICES,
};
pub use quadrature::{gauss_legendre, QuadratureRule, Shape, MAX_EXACTNESS};
