//! Limit laws of the centered and scaled field and the exact Poisson
//! pre-limit Laplace transform.
//!
//! Stable laws use the `S_α(σ, β, μ)` convention of Samorodnitsky and Taqqu:
//! for `α ≠ 1` the characteristic function is
//! `exp(-σ^α |t|^α (1 - iβ sign(t) tan(πα/2)) + iμt)`. With `β = 1` and
//! `μ = 0` the Laplace transform is `E[exp(-γY)] = exp(-σ^α γ^α / cos(πα/2))`
//! for `γ >= 0`, which exceeds one when `α ∈ (1, 2)`.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::amplitudes::{AmplitudeLaw, SecondMoment};
use crate::error::{Error, Result};
use crate::quad::{self, Tolerance};
use crate::shotnoise::{FddQuery, ResponseFn};
use crate::Point;

/// Tolerance of the overlap integrals `∫ ℓ(z_1 - x) ℓ(z_2 - x) dx`.
pub const OVERLAP_TOL: Tolerance = Tolerance::new(1e-8, 1e-10);
/// Tolerance of `∫ ξ^α`.
pub const STABLE_TOL: Tolerance = Tolerance::new(1e-8, 1e-10);
/// Tolerance of the Poisson pre-limit exponent.
pub const PRELIMIT_TOL: Tolerance = Tolerance::new(1e-13, 1e-7);

/// `ψ(u) = e^{-u} - 1 + u`.
pub fn psi(u: f64) -> f64 {
    if u < 1e-4 {
        let u2 = u * u;
        u2 * (0.5 - u / 6.0 + u2 / 24.0 - u2 * u / 120.0)
    } else {
        (-u).exp_m1() + u
    }
}

/// `∫ ℓ(z1 - x) ℓ(z2 - x) dx` by adaptive quadrature over the supports.
pub fn overlap(response: &ResponseFn, z1: &Point, z2: &Point) -> Result<f64> {
    let mut gap2 = 0.0;
    for i in 0..response.dim {
        gap2 += (z1[i] - z2[i]).powi(2);
    }
    if gap2.sqrt() > 2.0 * response.radius {
        return Ok(0.0);
    }
    let est = quad::integrate_over_balls(
        response.dim,
        &[*z1, *z2],
        response.radius,
        |x| response.eval(&[z1[0] - x[0], z1[1] - x[1]]) * response.eval(&[z2[0] - x[0], z2[1] - x[1]]),
        OVERLAP_TOL,
    )
    .map_err(|e| e.context("overlap integral"))?;
    Ok(est.value)
}

/// `Cov[N(z1), N(z2)] = E[P²] ∫ ℓ(z1 - x) ℓ(z2 - x) dx`.
pub fn gaussian_cov(response: &ResponseFn, z1: &Point, z2: &Point, m2: SecondMoment) -> Result<f64> {
    let m2 = m2
        .finite()
        .ok_or_else(|| Error::invalid("Gaussian limit needs a finite second moment"))?;
    Ok(m2 * overlap(response, z1, z2)?)
}

/// Gaussian limit of `(Ĩ(z_1), ..., Ĩ(z_m))` when `E[P²] < ∞`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianLimit {
    pub query: FddQuery,
    pub second_moment: f64,
    /// Overlap matrix `L_{jk} = ∫ ℓ(z_j - x) ℓ(z_k - x) dx`, row-major.
    pub overlaps: Vec<Vec<f64>>,
}

impl GaussianLimit {
    pub fn new(law: &AmplitudeLaw, response: &ResponseFn, query: &FddQuery) -> Result<Self> {
        query.validate()?;
        let m2 = law
            .second_moment()
            .finite()
            .ok_or_else(|| Error::invalid("Gaussian limit needs a finite second moment"))?;
        let m = query.len();
        let mut overlaps = vec![vec![0.0; m]; m];
        for j in 0..m {
            for k in j..m {
                let v = overlap(response, &query.positions[j], &query.positions[k])?;
                overlaps[j][k] = v;
                overlaps[k][j] = v;
            }
        }
        Ok(Self {
            query: query.clone(),
            second_moment: m2,
            overlaps,
        })
    }

    /// `Λ = E[P²] L`.
    pub fn covariance(&self) -> Vec<Vec<f64>> {
        self.overlaps
            .iter()
            .map(|row| row.iter().map(|v| self.second_moment * v).collect())
            .collect()
    }

    pub fn covariance_matrix(&self) -> DMatrix<f64> {
        let m = self.overlaps.len();
        DMatrix::from_fn(m, m, |j, k| self.second_moment * self.overlaps[j][k])
    }

    /// Variance of `Σ s_j N(z_j)`: `E[P²] sᵀ L s`.
    pub fn combined_variance(&self) -> f64 {
        let s = &self.query.weights;
        let mut acc = 0.0;
        for (j, row) in self.overlaps.iter().enumerate() {
            for (k, v) in row.iter().enumerate() {
                acc += s[j] * s[k] * v;
            }
        }
        self.second_moment * acc
    }

    /// `E[exp(-Σ s_j N(z_j))] = exp(E[P²] sᵀ L s / 2)`.
    pub fn laplace(&self) -> f64 {
        (0.5 * self.combined_variance()).exp()
    }

    /// Characteristic function of `Σ s_j N(z_j)` at `t`.
    pub fn cf(&self, t: f64) -> Complex64 {
        Complex64::new((-0.5 * self.combined_variance() * t * t).exp(), 0.0)
    }
}

/// `E[exp(-Σ s_j N(z_j))]` for the Gaussian limit.
pub fn gaussian_fdd_laplace(limit: &GaussianLimit) -> f64 {
    limit.laplace()
}

/// `Γ(2 - α) / (α - 1)`.
pub fn stable_constant(alpha: f64) -> f64 {
    gamma(2.0 - alpha) / (alpha - 1.0)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 1.0 && alpha < 2.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("stable index must lie in (1, 2), got {alpha}")))
    }
}

/// `∫ ξ(x)^α dx` over the union of the supports of the weighted responses.
pub fn xi_power_integral(query: &FddQuery, response: &ResponseFn, alpha: f64) -> Result<f64> {
    let centers = query.active_positions();
    let est = quad::integrate_over_balls(
        response.dim,
        &centers,
        response.radius,
        |x| query.xi_eval(response, &x).powf(alpha),
        STABLE_TOL,
    )
    .map_err(|e| e.context("integral of xi^alpha"))?;
    Ok(est.value)
}

/// Stable limit of `Σ s_j Ĩ(z_j)` for Pareto amplitudes with index `α`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StableLimit {
    pub query: FddQuery,
    pub alpha: f64,
    /// `∫ ξ^α dx`
    pub xi_integral: f64,
    /// `Γ(2-α)/(α-1) ∫ ξ^α dx`, the log of the Laplace transform.
    pub log_laplace: f64,
    /// `σ = (-Γ(2-α)/(α-1) ∫ ξ^α dx cos(πα/2))^{1/α}`
    pub sigma: f64,
}

impl StableLimit {
    pub fn new(query: &FddQuery, response: &ResponseFn, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        query.validate()?;
        let xi_integral = xi_power_integral(query, response, alpha)?;
        let log_laplace = stable_constant(alpha) * xi_integral;
        let sigma = (-log_laplace * (FRAC_PI_2 * alpha).cos()).max(0.0).powf(1.0 / alpha);
        Ok(Self {
            query: query.clone(),
            alpha,
            xi_integral,
            log_laplace,
            sigma,
        })
    }

    pub fn laplace(&self) -> f64 {
        self.log_laplace.exp()
    }

    pub fn cf(&self, t: f64) -> Complex64 {
        stable_cf_value(self.alpha, self.sigma, t)
    }
}

/// `exp(Γ(2-α)/(α-1) ∫ ξ^α dx)`.
pub fn stable_fdd_laplace(query: &FddQuery, response: &ResponseFn, alpha: f64) -> Result<f64> {
    Ok(StableLimit::new(query, response, alpha)?.laplace())
}

pub fn stable_sigma(query: &FddQuery, response: &ResponseFn, alpha: f64) -> Result<f64> {
    Ok(StableLimit::new(query, response, alpha)?.sigma)
}

pub fn stable_cf(query: &FddQuery, response: &ResponseFn, alpha: f64, t: f64) -> Result<Complex64> {
    Ok(StableLimit::new(query, response, alpha)?.cf(t))
}

/// Characteristic function of `S_α(σ, 1, 0)` at `t`.
pub fn stable_cf_value(alpha: f64, sigma: f64, t: f64) -> Complex64 {
    if t == 0.0 {
        return Complex64::new(1.0, 0.0);
    }
    let a = (sigma * t.abs()).powf(alpha);
    let phase = a * t.signum() * (FRAC_PI_2 * alpha).tan();
    Complex64::from_polar((-a).exp(), phase)
}

/// One draw from `S_α(σ, 1, 0)` by the Chambers–Mallows–Stuck method.
pub fn sample_stable<R: Rng + ?Sized>(alpha: f64, sigma: f64, rng: &mut R) -> f64 {
    let tan = (FRAC_PI_2 * alpha).tan();
    let b = tan.atan() / alpha;
    let s = (1.0 + tan * tan).powf(0.5 / alpha);
    let v = PI * (rng.random::<f64>() - 0.5);
    let w: f64 = Exp1.sample(rng);
    let x = s * (alpha * (v + b)).sin() / v.cos().powf(1.0 / alpha)
        * ((v - alpha * (v + b)).cos() / w).powf((1.0 - alpha) / alpha);
    sigma * x
}

/// `λ ∫ E[ψ(ξ(x) P / g(λ))] dx`, the log of the pre-limit Laplace transform
/// `E[exp(-Σ s_j Ĩ(z_j))]` for a Poisson process.
pub fn poisson_prelimit_log_laplace(
    lambda: f64,
    law: &AmplitudeLaw,
    query: &FddQuery,
    response: &ResponseFn,
) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::invalid("intensity must be positive"));
    }
    query.validate()?;
    let g = law.scaling_g(lambda);
    let centers = query.active_positions();
    let est = quad::integrate_over_balls(
        response.dim,
        &centers,
        response.radius,
        |x| law.expected_psi(query.xi_eval(response, &x) / g),
        PRELIMIT_TOL,
    )
    .map_err(|e| e.context(format!("pre-limit Laplace exponent at intensity {lambda}")))?;
    Ok(lambda * est.value)
}

/// `E[exp(-Σ s_j Ĩ(z_j))] = exp(λ ∫∫ ψ(ξ(x) t / g(λ)) dF_P(t) dx)` for a
/// Poisson process.
pub fn poisson_prelimit_laplace(
    lambda: f64,
    law: &AmplitudeLaw,
    query: &FddQuery,
    response: &ResponseFn,
) -> Result<f64> {
    Ok(poisson_prelimit_log_laplace(lambda, law, query, response)?.exp())
}

/// `E[exp(-Σ s_j I(z_j) / scale)] = exp(-λ ∫ (1 - L_P(ξ(x) / scale)) dx)`
/// for a Poisson process, without centering.
pub fn poisson_laplace_functional(
    lambda: f64,
    law: &AmplitudeLaw,
    query: &FddQuery,
    response: &ResponseFn,
    scale: f64,
) -> Result<f64> {
    if !(lambda > 0.0 && scale > 0.0) {
        return Err(Error::invalid("intensity and scale must be positive"));
    }
    query.validate()?;
    let centers = query.active_positions();
    let est = quad::integrate_over_balls(
        response.dim,
        &centers,
        response.radius,
        |x| law.one_minus_laplace(query.xi_eval(response, &x) / scale),
        PRELIMIT_TOL,
    )
    .map_err(|e| e.context(format!("Laplace functional at intensity {lambda}")))?;
    Ok((-lambda * est.value).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn bump1() -> ResponseFn {
        ResponseFn::gauss_bump(1.0, 1.0, 1).unwrap()
    }

    #[test]
    fn psi_examples() {
        assert_eq!(psi(0.0), 0.0);
        assert_relative_eq!(psi(1.0), 0.36787944117144233, max_relative = 1e-15);
        // series branch agrees with the direct form just above the threshold
        let u: f64 = 0.99e-4;
        let direct = u * u / 2.0 - u * u * u / 6.0 + u.powi(4) / 24.0;
        assert_relative_eq!(psi(u), direct, max_relative = 1e-12);
    }

    #[test]
    fn overlap_closed_forms() {
        let g = ResponseFn::gauss_bump(1.3, 0.8, 1).unwrap();
        for delta in [0.0, 0.5, 1.7] {
            let v = overlap(&g, &[0.0, 0.0], &[delta, 0.0]).unwrap();
            let exact = 1.3f64.powi(2) * 0.8 * (PI / 2.0).sqrt() * (-delta * delta / (2.0 * 0.64)).exp();
            assert!((v - exact).abs() < 1e-8, "{v} vs {exact}");
        }
        let b = ResponseFn::ball_indicator(1.0, 1).unwrap();
        for delta in [0.0, 0.3, 1.5, 1.99] {
            let v = overlap(&b, &[0.2, 0.0], &[0.2 + delta, 0.0]).unwrap();
            assert!((v - (2.0 - delta)).abs() < 1e-8, "{v}");
        }
        assert_eq!(overlap(&b, &[0.0, 0.0], &[2.5, 0.0]).unwrap(), 0.0);
        let b2 = ResponseFn::ball_indicator(1.0, 2).unwrap();
        let d: f64 = 0.6;
        let lens = 2.0 * (d / 2.0).acos() - 0.5 * d * (4.0 - d * d).sqrt();
        let v = overlap(&b2, &[0.0, 0.0], &[d, 0.0]).unwrap();
        assert!((v - lens).abs() < 1e-7, "{v} vs {lens}");
    }

    #[test]
    fn gaussian_laplace_examples() {
        let r = bump1();
        let law = AmplitudeLaw::exponential(1.0).unwrap();
        let q = FddQuery::single([0.0, 0.0]);
        let lim = GaussianLimit::new(&law, &r, &q).unwrap();
        assert_relative_eq!(lim.combined_variance(), 2.0 * (PI / 2.0).sqrt(), max_relative = 1e-9);
        assert_relative_eq!(gaussian_fdd_laplace(&lim), 3.5020, max_relative = 1e-4);
        let zero = FddQuery::new(vec![[0.0, 0.0]], vec![0.0]).unwrap();
        assert_eq!(GaussianLimit::new(&law, &r, &zero).unwrap().laplace(), 1.0);
        let pareto = AmplitudeLaw::pareto(1.5, 1.0).unwrap();
        assert!(GaussianLimit::new(&pareto, &r, &q).is_err());
        assert!(gaussian_cov(&r, &[0.0, 0.0], &[0.0, 0.0], pareto.second_moment()).is_err());
    }

    #[test]
    fn coincident_positions_add_weights() {
        let r = bump1();
        let law = AmplitudeLaw::exponential(1.0).unwrap();
        let q = FddQuery::new(vec![[0.0, 0.0], [0.0, 0.0]], vec![1.0, 1.0]).unwrap();
        let lim = GaussianLimit::new(&law, &r, &q).unwrap();
        assert_relative_eq!(lim.combined_variance(), 4.0 * 2.0 * (PI / 2.0).sqrt(), max_relative = 1e-9);
    }

    #[test]
    fn stable_constant_at_three_halves() {
        assert_relative_eq!(stable_constant(1.5), 2.0 * PI.sqrt(), max_relative = 1e-13);
        assert_relative_eq!(stable_constant(1.5), 3.5449077018110318, max_relative = 1e-13);
    }

    #[test]
    fn stable_zero_weights() {
        let q = FddQuery::new(vec![[0.0, 0.0]], vec![0.0]).unwrap();
        let lim = StableLimit::new(&q, &bump1(), 1.5).unwrap();
        assert_eq!(lim.laplace(), 1.0);
        assert_eq!(lim.sigma, 0.0);
    }

    #[test]
    fn stable_integral_closed_form_and_bound() {
        // ∫ exp(-α x²) dx = sqrt(π / α)
        let r = bump1();
        let q = FddQuery::single([0.0, 0.0]);
        let lim = StableLimit::new(&q, &r, 1.5).unwrap();
        assert_relative_eq!(lim.xi_integral, (PI / 1.5).sqrt(), max_relative = 1e-8);
        let expected_sigma = (-stable_constant(1.5) * (PI / 1.5).sqrt() * (0.75 * PI).cos()).powf(1.0 / 1.5);
        assert_relative_eq!(lim.sigma, expected_sigma, max_relative = 1e-8);
        assert!(lim.xi_integral <= r.sup.powf(0.5) * r.integral);
    }

    #[test]
    fn stable_constant_blows_up_like_inverse_distance_to_two() {
        // (2 - α) C(α) ∫ξ^α → ∫ξ² as α → 2
        let r = bump1();
        let q = FddQuery::new(vec![[0.0, 0.0], [0.7, 0.0]], vec![0.5, 1.0]).unwrap();
        let quadratic = xi_power_integral(&q, &r, 2.0).unwrap();
        let mut last = f64::INFINITY;
        for alpha in [1.9, 1.99, 1.999] {
            let v = (2.0 - alpha) * stable_constant(alpha) * xi_power_integral(&q, &r, alpha).unwrap();
            let gap = (v - quadratic).abs();
            assert!(gap < last);
            last = gap;
        }
        assert!(last < 2e-3 * quadratic);
    }

    #[test]
    fn stable_cf_symmetries() {
        let q = FddQuery::single([0.0, 0.0]);
        let r = bump1();
        assert_eq!(stable_cf(&q, &r, 1.5, 0.0).unwrap(), Complex64::new(1.0, 0.0));
        let lim = StableLimit::new(&q, &r, 1.5).unwrap();
        for t in [0.25, 1.0, 3.0] {
            let c = lim.cf(t);
            assert_relative_eq!(c.norm(), (-(lim.sigma * t).powf(1.5)).exp(), max_relative = 1e-14);
            let m = lim.cf(-t);
            assert_relative_eq!(m.re, c.re, max_relative = 1e-14);
            assert_relative_eq!(m.im, -c.im, max_relative = 1e-14);
        }
    }

    #[test]
    fn stable_sampler_mean_and_cf() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 1_000_000;
        let (alpha, sigma) = (1.5, 0.8);
        let xs: Vec<f64> = (0..n).map(|_| sample_stable(alpha, sigma, &mut rng)).collect();
        // the mean of n draws is S_α(σ n^{1/α - 1}, 1, 0); its tail is about
        // 0.4 x^{-1.5} in scale units, so 60 scale units is a 1e-3 event
        let mean = xs.iter().sum::<f64>() / n as f64;
        let scale = sigma * (n as f64).powf(1.0 / alpha - 1.0);
        assert!(mean.abs() < 60.0 * scale, "mean {mean}");

        let t = 1.0;
        let (mut re, mut im) = (0.0, 0.0);
        for x in &xs {
            re += (t * x).cos();
            im += (t * x).sin();
        }
        let ecf = Complex64::new(re / n as f64, im / n as f64);
        let cf = stable_cf_value(alpha, sigma, t);
        let se = (1.0 / n as f64).sqrt();
        assert!((ecf - cf).norm() < 3.0 * se, "{ecf} vs {cf}");
    }

    #[test]
    fn stable_sampler_laplace_matches_convention() {
        // E[exp(-γY)] = exp(-σ^α γ^α / cos(πα/2)); small γ keeps the estimator tame
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let (alpha, sigma, gamma_) = (1.5, 0.5, 0.3);
        let n = 400_000;
        let vals: Vec<f64> = (0..n).map(|_| (-gamma_ * sample_stable(alpha, sigma, &mut rng)).exp()).collect();
        let mean = vals.iter().sum::<f64>() / n as f64;
        let sd = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0)).sqrt();
        let exact = (-(sigma * gamma_).powf(alpha) / (FRAC_PI_2 * alpha).cos()).exp();
        assert!((mean - exact).abs() < 4.0 * sd / (n as f64).sqrt(), "{mean} vs {exact}");
    }

    #[test]
    fn prelimit_zero_weight_is_one() {
        let law = AmplitudeLaw::deterministic(1.0).unwrap();
        let q = FddQuery::new(vec![[0.0, 0.0]], vec![0.0]).unwrap();
        assert_eq!(poisson_prelimit_laplace(50.0, &law, &q, &bump1()).unwrap(), 1.0);
    }

    #[test]
    fn prelimit_deterministic_against_series() {
        // ψ(u) = Σ_{k>=2} (-u)^k / k!, and ∫ exp(-k x²) dx = sqrt(π / k)
        let lambda = 50.0;
        let law = AmplitudeLaw::deterministic(1.0).unwrap();
        let q = FddQuery::single([0.0, 0.0]);
        let got = poisson_prelimit_log_laplace(lambda, &law, &q, &bump1()).unwrap();
        let a = 1.0 / lambda.sqrt();
        let mut series = 0.0;
        let mut term = 1.0;
        for k in 1..40 {
            term *= -a / k as f64;
            if k >= 2 {
                series += term * (PI / k as f64).sqrt();
            }
        }
        assert_relative_eq!(got, lambda * series, max_relative = 1e-7);
    }

    #[test]
    fn prelimit_approaches_gaussian_limit() {
        let law = AmplitudeLaw::exponential(1.0).unwrap();
        let r = bump1();
        let q = FddQuery::new(vec![[0.0, 0.0], [0.8, 0.0]], vec![1.0, 0.5]).unwrap();
        let target = GaussianLimit::new(&law, &r, &q).unwrap().laplace();
        let mut last = f64::INFINITY;
        for lambda in [1e2, 1e3, 1e4] {
            let v = poisson_prelimit_laplace(lambda, &law, &q, &r).unwrap();
            let gap = ((v - target) / target).abs();
            assert!(gap < last, "gap {gap} at {lambda}");
            last = gap;
        }
        assert!(last < 0.03, "final gap {last}");
    }

    #[test]
    fn prelimit_approaches_stable_limit() {
        let law = AmplitudeLaw::pareto(1.5, 1.0).unwrap();
        let r = bump1();
        let q = FddQuery::single([0.0, 0.0]);
        let target = StableLimit::new(&q, &r, 1.5).unwrap().log_laplace;
        let mut last = f64::INFINITY;
        for lambda in [1e2, 1e3, 1e4] {
            let v = poisson_prelimit_log_laplace(lambda, &law, &q, &r).unwrap();
            let gap = ((v - target) / target).abs();
            assert!(gap < last, "gap {gap} at {lambda}");
            last = gap;
        }
    }

    proptest! {
        #[test]
        fn psi_bounds(u in 0.0f64..50.0) {
            let v = psi(u);
            prop_assert!(v >= 0.0);
            prop_assert!(v <= 0.5 * u * u * (1.0 + 1e-15));
        }

        #[test]
        fn overlap_bounded_and_covariance_psd(
            seed in 0u64..500,
            dim in 1usize..=2,
            m in 1usize..=4,
        ) {
            use rand::Rng;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let r = ResponseFn::gauss_bump(1.0 + rng.random::<f64>(), 0.2 + rng.random::<f64>(), dim).unwrap();
            let positions: Vec<Point> = (0..m)
                .map(|_| [rng.random::<f64>(), if dim == 2 { rng.random::<f64>() } else { 0.0 }])
                .collect();
            let q = FddQuery::new(positions, vec![1.0; m]).unwrap();
            let law = AmplitudeLaw::exponential(1.0).unwrap();
            let lim = GaussianLimit::new(&law, &r, &q).unwrap();
            for row in &lim.overlaps {
                for v in row {
                    prop_assert!(*v <= r.sup * r.integral * (1.0 + 1e-8));
                }
            }
            let eig = lim.covariance_matrix().symmetric_eigenvalues();
            prop_assert!(eig.iter().all(|e| *e >= -1e-10));
        }
    }
}
