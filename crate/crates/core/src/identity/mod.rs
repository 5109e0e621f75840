//! Verification of the structural identities and concentration claims.

pub mod checks;
pub mod telescoping;
pub mod walk;

pub use checks::{
    check_gaussian_concentration, check_rounding_law, check_rounding_stability, measure_truncation_gap,
    RoundingLawCheck, StabilityCenter,
};
pub use telescoping::{check_telescoping_pathwise, closed_form_coefficient, telescoping_coefficient, GridLabeling};
pub use walk::{check_walk_covariance, WalkGrid};
