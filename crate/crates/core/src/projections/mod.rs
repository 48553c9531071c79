//! Projections onto the constraint sets of the discretized dual, and the
//! checkers used to validate them.

mod checks;
mod epigraph;
mod jump;

pub use checks::{
    check_epigraph_split, check_linear_dual_feasibility, interval_affine, project_epi_rho,
    split_projection_residual, DualViolation,
};
pub use epigraph::{
    project_epi_interval_quadratic, project_epi_max, project_epi_parabola, project_onto_lines,
    project_radial_epi, EpigraphPoint, Projected,
};
pub use jump::{check_jump, project_jump, project_jump_warm, JumpConstraintSet, JumpProjection, JumpViolation};
