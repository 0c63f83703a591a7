//! Element-local HDG assembly and static condensation onto the skeleton.

mod condensed;
mod layout;
mod local;
mod monolithic;

pub use condensed::{consistent_traces, CondensedSystem, Discretization, ElementOperator};
pub use layout::{DofLayout, LocalLayout};
pub use local::{assemble_local, green_coupling, green_defect, ElementGeometry, LocalBlocks, ReferenceElement};
pub use monolithic::{bh_bound_probe, bh_ratio, dense_coupling_operator, dense_global_operator, monolithic_solve};
