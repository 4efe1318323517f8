//! Point processes on `[0, L]^d`: homogeneous Poisson and the stationary
//! Gaussian-kernel determinantal process.

mod dpp;
mod poisson;
mod window;

pub use dpp::{pair_correlation_estimate, sample_projection, DppModel, DppPatch, REJECTION_CAP};
pub use poisson::sample_poisson;
pub use window::{Boundary, PointPattern, Region, Window};
