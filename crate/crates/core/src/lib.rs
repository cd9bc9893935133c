//! Structured cell-division models and a calibrated goodness-of-fit test for
//! symmetric division.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod basis;
pub mod bundled;
pub mod error;
pub mod fitting;
pub mod gof;
pub mod io;
pub mod kernels;
pub mod pde;
pub mod quad;
pub mod sampling;
pub mod stationary;
pub mod studies;

pub use error::{Error, Result};
pub use kernels::{KernelSpec, KernelVariant};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
