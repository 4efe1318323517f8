//! Shot-noise fields driven by Poisson and determinantal point processes.
//!
//! The field `I(z) = Σ P_n ℓ(z - X_n)` sums i.i.d. amplitudes `P_n` times a
//! response `ℓ` centered at the points `X_n`. After centering and scaling by
//! `g(λ)` it converges to a Gaussian field when `E[P²] < ∞` and to an
//! α-stable field when the amplitudes are Pareto with index `α ∈ (1, 2)`.
//! The crate samples the field, evaluates the limit laws and the exact
//! finite-intensity Laplace transforms, and compares the two.

pub mod amplitudes;
pub mod error;
pub mod fredholm;
pub mod harness;
pub mod limits;
pub mod pointproc;
pub mod quad;
pub mod shotnoise;
pub mod stats;

pub use amplitudes::{AmplitudeLaw, SecondMoment};
pub use error::{Error, Result};
pub use pointproc::{Boundary, DppModel, PointPattern, Window};
pub use shotnoise::{FddQuery, ResponseFn, ResponseShape};

/// A point in one or two dimensions; the second coordinate is zero in 1-d.
pub type Point = [f64; 2];

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/point-processes.md")]
    mod point_processes {}
    #[doc = include_str!("../../../book/src/shot-noise.md")]
    mod shot_noise {}
    #[doc = include_str!("../../../book/src/limits.md")]
    mod limits {}
    #[doc = include_str!("../../../book/src/fredholm.md")]
    mod fredholm {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}
