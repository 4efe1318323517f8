//! Goodness-of-fit statistics: empirical characteristic functions,
//! one-sample Kolmogorov–Smirnov against a centered normal, and checks of
//! linear combinations `Σ s_j Ĩ(z_j)` against their limit law.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::limits::{GaussianLimit, StableLimit};
use crate::shotnoise::FddQuery;

/// Default evaluation grid for characteristic functions.
pub const CF_GRID: [f64; 8] = [-2.0, -1.0, -0.5, -0.25, 0.25, 0.5, 1.0, 2.0];

/// `(1/N) Σ_k exp(i t x_k)` for each `t`.
pub fn ecf(samples: &[f64], ts: &[f64]) -> Vec<Complex64> {
    let n = samples.len().max(1) as f64;
    ts.iter()
        .map(|&t| {
            let (mut re, mut im) = (0.0, 0.0);
            for x in samples {
                let (s, c) = (t * x).sin_cos();
                re += c;
                im += s;
            }
            Complex64::new(re / n, im / n)
        })
        .collect()
}

/// `max_j |a_j - b_j|`.
pub fn cf_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Threshold `max(0.03, 5 / √N)` for the CF sup-distance.
pub fn cf_threshold(n: usize) -> f64 {
    0.03f64.max(5.0 / (n as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Asymptotic Kolmogorov survival function `P(K > x)`.
pub fn kolmogorov_sf(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < 0.3 {
        // the alternating series converges slowly here; the value is 1 to
        // double precision
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * x * x).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-18 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// One-sample Kolmogorov–Smirnov test against `Normal(0, variance)` with the
/// asymptotic p-value.
pub fn ks_gaussian(samples: &[f64], variance: f64) -> Result<KsResult> {
    if samples.is_empty() {
        return Err(Error::EmptySample);
    }
    if !(variance > 0.0 && variance.is_finite()) {
        return Err(Error::invalid(format!("variance must be positive, got {variance}")));
    }
    let normal = Normal::new(0.0, variance.sqrt()).map_err(|e| Error::invalid(e.to_string()))?;
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, x) in xs.iter().enumerate() {
        let f = normal.cdf(*x);
        d = d.max((i + 1) as f64 / n - f).max(f - i as f64 / n);
    }
    Ok(KsResult {
        statistic: d,
        p_value: kolmogorov_sf(n.sqrt() * d),
    })
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Sample mean and its standard error.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    (mean(xs), (variance(xs) / xs.len() as f64).sqrt())
}

/// Scale of `S_α(σ, 1, 0)` fitted from `|ecf(t)| = exp(-σ^α |t|^α)`:
/// least squares of `-ln|ecf(t)|` on `|t|^α` through the origin. Grid
/// points where `|ecf(t)|` is below the sampling noise floor `5 / √N` are
/// skipped.
pub fn fit_stable_sigma(samples: &[f64], alpha: f64, ts: &[f64]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptySample);
    }
    let floor = 5.0 / (samples.len() as f64).sqrt();
    let phi = ecf(samples, ts);
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (t, c) in ts.iter().zip(&phi) {
        let m = c.norm();
        if m <= floor {
            continue;
        }
        let x = t.abs().powf(alpha);
        sxy += x * -m.ln();
        sxx += x * x;
    }
    if sxx == 0.0 {
        return Err(Error::invalid("characteristic function grid is degenerate"));
    }
    Ok((sxy / sxx).max(0.0).powf(1.0 / alpha))
}

/// Limit law of `Σ s_j Ĩ(z_j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LimitLaw {
    Gaussian(GaussianLimit),
    Stable(StableLimit),
}

impl LimitLaw {
    pub fn cf(&self, t: f64) -> Complex64 {
        match self {
            LimitLaw::Gaussian(g) => g.cf(t),
            LimitLaw::Stable(s) => s.cf(t),
        }
    }

    pub fn query(&self) -> &FddQuery {
        match self {
            LimitLaw::Gaussian(g) => &g.query,
            LimitLaw::Stable(s) => &s.query,
        }
    }
}

/// Outcome of [`fdd_joint_check`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointCheck {
    pub samples: usize,
    pub ts: Vec<f64>,
    pub ecf: Vec<Complex64>,
    pub theory_cf: Vec<Complex64>,
    pub cf_distance: f64,
    pub empirical_mean: f64,
    pub empirical_variance: f64,
    /// Gaussian case only.
    pub theory_variance: Option<f64>,
    pub ks: Option<KsResult>,
    /// Stable case only.
    pub sigma_fit: Option<f64>,
    pub sigma_theory: Option<f64>,
}

/// Reduces an `N × m` sample of `(Ĩ(z_1), ..., Ĩ(z_m))` to the combination
/// `Σ s_j Ĩ(z_j)` and compares it with the one-dimensional limit law: KS
/// and CF distance for the Gaussian case, CF distance and a fitted scale
/// for the stable case.
pub fn fdd_joint_check(samples: &[Vec<f64>], limit: &LimitLaw, ts: &[f64]) -> Result<JointCheck> {
    if samples.is_empty() {
        return Err(Error::EmptySample);
    }
    let query = limit.query();
    if let Some(row) = samples.iter().find(|r| r.len() != query.len()) {
        return Err(Error::invalid(format!(
            "sample row has {} values for {} positions",
            row.len(),
            query.len()
        )));
    }
    let combined: Vec<f64> = samples.iter().map(|r| query.combine(r)).collect();
    let phi = ecf(&combined, ts);
    let theory: Vec<Complex64> = ts.iter().map(|&t| limit.cf(t)).collect();
    let mut out = JointCheck {
        samples: combined.len(),
        ts: ts.to_vec(),
        cf_distance: cf_distance(&phi, &theory),
        ecf: phi,
        theory_cf: theory,
        empirical_mean: mean(&combined),
        empirical_variance: if combined.len() > 1 { variance(&combined) } else { 0.0 },
        theory_variance: None,
        ks: None,
        sigma_fit: None,
        sigma_theory: None,
    };
    match limit {
        LimitLaw::Gaussian(g) => {
            let v = g.combined_variance();
            out.theory_variance = Some(v);
            out.ks = Some(ks_gaussian(&combined, v)?);
        }
        LimitLaw::Stable(s) => {
            out.sigma_theory = Some(s.sigma);
            out.sigma_fit = Some(fit_stable_sigma(&combined, s.alpha, ts)?);
        }
    }
    Ok(out)
}
