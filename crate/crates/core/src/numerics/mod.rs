//! Dense kernels shared by the rest of the crate.

mod finite_diff;
pub mod linalg;
mod matrix;
mod pca;
mod rng;
mod spectral;

pub use finite_diff::{finite_diff_grad, relative_error, DEFAULT_STEP};
pub use matrix::Matrix;
pub(crate) use matrix::dot;
pub use pca::pca_project;
pub use rng::RngStream;
pub use spectral::{gershgorin_radius, spectral_bounds, SpectralEstimate};
