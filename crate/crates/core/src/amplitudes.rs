//! Amplitude laws for the shot-noise marks.
//!
//! Three families are supported: a point mass, the exponential law and the
//! exact Pareto law with index in `(1, 2)`. The Pareto tail is an exact
//! power, so [`AmplitudeLaw::scaling_g`] is an exact inverse of `1 / tail`
//! rather than an asymptotic one.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::limits::psi;
use crate::quad::{self, Tolerance};

/// Distribution of the i.i.d. nonnegative amplitudes.
///
/// Serialized as `{"kind": "pareto", "alpha": 1.5, "xm": 1.0}` and the like.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AmplitudeLaw {
    /// Point mass at `value`.
    Deterministic { value: f64 },
    /// Exponential with the given rate.
    Exponential { rate: f64 },
    /// `P(P > t) = (xm / t)^alpha` for `t >= xm`.
    Pareto { alpha: f64, xm: f64 },
}

/// Second moment of an amplitude law. Heavy-tailed laws carry the
/// [`SecondMoment::Infinite`] marker instead of a floating-point infinity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SecondMoment {
    Finite(f64),
    Infinite,
}

impl SecondMoment {
    pub fn finite(self) -> Option<f64> {
        match self {
            SecondMoment::Finite(v) => Some(v),
            SecondMoment::Infinite => None,
        }
    }
}

const LAPLACE_TOL: Tolerance = Tolerance::new(1e-300, 1e-11);

impl AmplitudeLaw {
    pub fn deterministic(value: f64) -> Result<Self> {
        Self::Deterministic { value }.validated()
    }

    pub fn exponential(rate: f64) -> Result<Self> {
        Self::Exponential { rate }.validated()
    }

    pub fn pareto(alpha: f64, xm: f64) -> Result<Self> {
        Self::Pareto { alpha, xm }.validated()
    }

    /// Checks the parameter constraints; Pareto needs `alpha` in `(1, 2)`.
    pub fn validate(&self) -> Result<()> {
        match *self {
            AmplitudeLaw::Deterministic { value } if !(value > 0.0 && value.is_finite()) => {
                Err(Error::invalid(format!("deterministic amplitude must be positive, got {value}")))
            }
            AmplitudeLaw::Exponential { rate } if !(rate > 0.0 && rate.is_finite()) => {
                Err(Error::invalid(format!("exponential rate must be positive, got {rate}")))
            }
            AmplitudeLaw::Pareto { alpha, xm } if !(alpha > 1.0 && alpha < 2.0) || !(xm > 0.0 && xm.is_finite()) => {
                Err(Error::invalid(format!(
                    "Pareto law needs alpha in (1, 2) and xm > 0, got alpha={alpha}, xm={xm}"
                )))
            }
            _ => Ok(()),
        }
    }

    fn validated(self) -> Result<Self> {
        self.validate().map(|_| self)
    }

    /// Mean `p` of the law.
    pub fn mean(&self) -> f64 {
        match *self {
            AmplitudeLaw::Deterministic { value } => value,
            AmplitudeLaw::Exponential { rate } => 1.0 / rate,
            AmplitudeLaw::Pareto { alpha, xm } => alpha * xm / (alpha - 1.0),
        }
    }

    pub fn second_moment(&self) -> SecondMoment {
        match *self {
            AmplitudeLaw::Deterministic { value } => SecondMoment::Finite(value * value),
            AmplitudeLaw::Exponential { rate } => SecondMoment::Finite(2.0 / (rate * rate)),
            AmplitudeLaw::Pareto { .. } => SecondMoment::Infinite,
        }
    }

    /// Tail index of a regularly varying law.
    pub fn tail_index(&self) -> Option<f64> {
        match *self {
            AmplitudeLaw::Pareto { alpha, .. } => Some(alpha),
            _ => None,
        }
    }

    /// Survival function `P(P > t)`.
    pub fn tail(&self, t: f64) -> f64 {
        match *self {
            AmplitudeLaw::Deterministic { value } => {
                if t < value {
                    1.0
                } else {
                    0.0
                }
            }
            AmplitudeLaw::Exponential { rate } => (-rate * t.max(0.0)).exp(),
            AmplitudeLaw::Pareto { alpha, xm } => {
                if t < xm {
                    1.0
                } else {
                    (xm / t).powf(alpha)
                }
            }
        }
    }

    /// The amplitude whose tail probability is `u`, for `u` in `(0, 1]`.
    /// Feeding a uniform variate gives a draw from the law.
    pub fn inverse_tail(&self, u: f64) -> f64 {
        match *self {
            AmplitudeLaw::Deterministic { value } => value,
            AmplitudeLaw::Exponential { rate } => -u.ln() / rate,
            AmplitudeLaw::Pareto { alpha, xm } => xm * u.powf(-1.0 / alpha),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            AmplitudeLaw::Deterministic { value } => value,
            _ => {
                // (0, 1] so the inverse tail stays finite
                let u = 1.0 - rng.random::<f64>();
                self.inverse_tail(u)
            }
        }
    }

    /// Laplace transform `E[exp(-s P)]`.
    pub fn laplace(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 1.0;
        }
        match *self {
            AmplitudeLaw::Deterministic { value } => (-value * s).exp(),
            AmplitudeLaw::Exponential { rate } => rate / (rate + s),
            AmplitudeLaw::Pareto { .. } => self.pareto_expectation(|p| (-s * p).exp(), s),
        }
    }

    /// `1 - E[exp(-s P)]`, accurate for small `s`.
    pub fn one_minus_laplace(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        match *self {
            AmplitudeLaw::Deterministic { value } => -(-value * s).exp_m1(),
            AmplitudeLaw::Exponential { rate } => s / (rate + s),
            AmplitudeLaw::Pareto { .. } => self.pareto_expectation(|p| -(-s * p).exp_m1(), s),
        }
    }

    /// `E[psi(a P)]` with `psi(u) = exp(-u) - 1 + u`.
    pub fn expected_psi(&self, a: f64) -> f64 {
        if a <= 0.0 {
            return 0.0;
        }
        match *self {
            AmplitudeLaw::Deterministic { value } => psi(a * value),
            AmplitudeLaw::Exponential { rate } => a * a / (rate * (rate + a)),
            AmplitudeLaw::Pareto { .. } => self.pareto_expectation(|p| psi(a * p), a),
        }
    }

    /// Normalization `g(lambda)` of the centered field: `sqrt(lambda)` for
    /// finite second moment, `xm * lambda^(1/alpha)` for Pareto.
    pub fn scaling_g(&self, lambda: f64) -> f64 {
        match *self {
            AmplitudeLaw::Pareto { alpha, xm } => xm * lambda.powf(1.0 / alpha),
            _ => lambda.sqrt(),
        }
    }

    /// `E[h(P)]` for Pareto by the quantile substitution `P = xm w^{-1/alpha}`
    /// with `w = v^k`, where `k >= alpha / (alpha - 1)` keeps integrands that
    /// grow linearly in `P` bounded near `v = 0`. `scale` is the argument
    /// multiplying `P` inside `h`; the crossover `scale * P = 1` is used as a
    /// breakpoint.
    fn pareto_expectation<H: Fn(f64) -> f64>(&self, h: H, scale: f64) -> f64 {
        let AmplitudeLaw::Pareto { alpha, xm } = *self else {
            unreachable!("pareto_expectation on a non-Pareto law")
        };
        let k = (alpha / (alpha - 1.0)).ceil() + 1.0;
        let integrand = |v: f64| {
            if v <= 0.0 {
                return 0.0;
            }
            let w = v.powf(k);
            if w <= 0.0 {
                return 0.0;
            }
            let p = xm * w.powf(-1.0 / alpha);
            h(p) * k * v.powf(k - 1.0)
        };
        // v where scale * P = 1
        let cross = (scale * xm).powf(alpha / k);
        let breaks = [cross, 0.5 * cross, 2.0 * cross];
        match quad::integrate_with_breaks(integrand, 0.0, 1.0, &breaks, LAPLACE_TOL) {
            Ok(est) => est.value,
            Err(Error::QuadratureNonConvergence { estimate, .. }) => estimate,
            Err(e) => panic!("Pareto expectation failed: {e}"),
        }
    }
}
