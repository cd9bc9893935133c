//! Time marching of the mitosis and adder equations to their stationary profiles.

mod adder;
pub(crate) mod grid;
mod march;
mod mitosis;
mod model;

pub use adder::{initial_bump_2d, solve_adder, solve_adder_from, Grid2D};
pub use grid::{
    l2_dist_sq, l2_norm_sq, marginal_x, stabilization_residual, DensityGrid1D, DensityGrid2D,
    GridDensity,
};
pub use march::{SolverOptions, Stationary, Stepping};
pub use mitosis::{initial_bump_1d, solve_mitosis, solve_mitosis_from, Grid1D};
pub use model::{ModelFamily, ModelSpec};
