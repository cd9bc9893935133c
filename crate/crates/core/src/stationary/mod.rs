//! Closed-form and fixed-point stationary densities.

mod birth;
mod explicit;

pub use birth::{
    birth_fixed_point_gamma1, birth_fixed_point_general, damping, division_moment,
    lifetime_density, reconstruct_n_from_birth, survival, BirthForm, BirthOptions,
    BirthSizeDensity,
};
pub use explicit::{
    alpha_coefficients, eval_n0, normalize_n0, AlphaSeries, ExplicitNull, DEFAULT_TERMS,
};
