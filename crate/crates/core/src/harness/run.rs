use std::time::Instant;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{Assertion, ExperimentConfig, LaplaceTarget, ProcessSpec};
use crate::amplitudes::AmplitudeLaw;
use crate::error::{Error, Result};
use crate::fredholm::{fredholm_laplace, trace_series, DiscretizedOperator, NystromGrid, TraceSeries};
use crate::limits::{self, GaussianLimit, StableLimit};
use crate::pointproc::{sample_poisson, DppModel, DppPatch, PointPattern, Window};
use crate::shotnoise::{centralize_scale, field_eval, field_mean, FddQuery, ResponseFn};
use crate::stats::{self, cf_threshold, fdd_joint_check, JointCheck, LimitLaw};
use crate::Point;

/// Random stream of replicate `replicate` at intensity index `lambda_index`:
/// ChaCha8 seeded with the master seed, on stream
/// `(lambda_index << 40) | replicate`. Any replicate can be regenerated on
/// its own from these three numbers.
pub fn replicate_rng(master_seed: u64, lambda_index: usize, replicate: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(((lambda_index as u64) << 40) | replicate as u64);
    rng
}

/// Draws point patterns for one intensity.
pub enum Sampler {
    Poisson { lambda: f64, window: Window, pad: f64 },
    Dpp { model: Box<DppModel>, patch: Box<DppPatch> },
}

impl Sampler {
    pub fn new(config: &ExperimentConfig, lambda: f64) -> Result<Self> {
        let window = config.window()?;
        let response = config.response_fn()?;
        match config.process {
            ProcessSpec::Poisson => Ok(Sampler::Poisson {
                lambda,
                window,
                pad: response.radius,
            }),
            ProcessSpec::Dpp { epsilon } => {
                let model = DppModel::build(lambda, epsilon, window)?;
                let (center, half) = query_box(&config.fdd_query()?, window.dim, response.radius);
                let patch = model.patch(center, half)?;
                Ok(Sampler::Dpp {
                    model: Box::new(model),
                    patch: Box::new(patch),
                })
            }
        }
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Result<PointPattern> {
        match self {
            Sampler::Poisson { lambda, window, pad } => sample_poisson(*lambda, window, *pad, rng),
            Sampler::Dpp { patch, .. } => patch.sample(rng),
        }
    }
}

/// Center and half-width of the smallest cube holding every ball
/// `B(z_j, radius)`.
fn query_box(query: &FddQuery, dim: usize, radius: f64) -> (Point, f64) {
    let mut center = [0.0; 2];
    let mut half: f64 = 0.0;
    for i in 0..dim {
        let lo = query.positions.iter().map(|z| z[i]).fold(f64::INFINITY, f64::min);
        let hi = query.positions.iter().map(|z| z[i]).fold(f64::NEG_INFINITY, f64::max);
        center[i] = 0.5 * (lo + hi);
        half = half.max(0.5 * (hi - lo));
    }
    (center, half + radius)
}

/// Raw field values `I(z_j)` for one replicate.
pub fn simulate_replicate(
    sampler: &Sampler,
    law: &AmplitudeLaw,
    response: &ResponseFn,
    query: &FddQuery,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>> {
    let pattern = sampler.sample(rng)?;
    let amplitudes: Vec<f64> = (0..pattern.len()).map(|_| law.sample(rng)).collect();
    field_eval(&pattern, &amplitudes, response, &query.positions)
}

/// Raw field values for every replicate at intensity index `index`, in
/// replicate order.
pub fn simulate_lambda(config: &ExperimentConfig, index: usize) -> Result<Vec<Vec<f64>>> {
    let lambda = config.lambdas[index];
    let sampler = Sampler::new(config, lambda)?;
    let response = config.response_fn()?;
    let query = config.fdd_query()?;
    (0..config.replicates)
        .into_par_iter()
        .map(|k| {
            let mut rng = replicate_rng(config.seed, index, k);
            simulate_replicate(&sampler, &config.amplitudes, &response, &query, &mut rng)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositionStats {
    pub mean: f64,
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaplaceCheck {
    pub target: LaplaceTarget,
    pub monte_carlo: f64,
    pub standard_error: f64,
    pub oracle: f64,
    /// `(monte_carlo - oracle) / standard_error`
    pub z_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FredholmSummary {
    pub laplace: f64,
    pub laplace_doubled: f64,
    pub self_convergence: f64,
    pub nodes: usize,
    pub trace: f64,
    pub trace_sq: f64,
    /// `|log det(I - M) + Tr M|`
    pub n2_contribution: f64,
    pub trace_partial_sums: Option<Vec<f64>>,
    pub remainder_bound: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DppSummary {
    pub bandwidth: f64,
    /// `L / s_λ`
    pub resolution: f64,
    pub max_eigenvalue: f64,
    pub expected_count: f64,
    /// `∫ K(0, x)² dx / λ`
    pub kernel_l2_over_lambda: f64,
    pub patch_side: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheorySummary {
    pub covariance: Option<Vec<Vec<f64>>>,
    pub combined_variance: Option<f64>,
    pub sigma: Option<f64>,
    /// Laplace transform of the limit of `Σ s_j Ĩ(z_j)`.
    pub laplace: f64,
    pub cf_grid: Vec<(f64, Complex64)>,
}

/// Statistics at one intensity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaRow {
    pub lambda: f64,
    pub seed: u64,
    pub replicates: usize,
    pub scale_g: f64,
    pub field_mean: f64,
    pub positions: Vec<PositionStats>,
    /// `|Var(Σ s_j Ĩ) - E[P²] sᵀ L s| / (E[P²] sᵀ L s)`, Gaussian case.
    pub variance_gap: Option<f64>,
    pub joint: JointCheck,
    pub laplace: Option<LaplaceCheck>,
    pub fredholm: Option<FredholmSummary>,
    pub dpp: Option<DppSummary>,
    /// Window side over `R_tol`.
    pub padding_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssertionOutcome {
    pub assertion: Assertion,
    pub passed: bool,
    pub detail: String,
}

/// Everything a sweep produces except wall-clock times, so that the
/// serialized report depends on the configuration alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub config: ExperimentConfig,
    pub theory: TheorySummary,
    pub rows: Vec<LambdaRow>,
    pub assertions: Vec<AssertionOutcome>,
}

impl ConvergenceReport {
    pub fn passed(&self) -> bool {
        self.assertions.iter().all(|a| a.passed)
    }
}

/// Output of [`run_experiment`]: the report, the raw field values per
/// intensity and the wall time spent per intensity.
#[derive(Debug, Clone)]
pub struct ExperimentRun {
    pub report: ConvergenceReport,
    pub samples: Vec<Vec<Vec<f64>>>,
    pub seconds: Vec<f64>,
}

pub fn limit_law(config: &ExperimentConfig) -> Result<LimitLaw> {
    let response = config.response_fn()?;
    let query = config.fdd_query()?;
    match config.amplitudes.tail_index() {
        Some(alpha) => Ok(LimitLaw::Stable(StableLimit::new(&query, &response, alpha)?)),
        None => Ok(LimitLaw::Gaussian(GaussianLimit::new(&config.amplitudes, &response, &query)?)),
    }
}

pub fn theory_summary(config: &ExperimentConfig, limit: &LimitLaw) -> TheorySummary {
    let cf_grid = config.tests.cf_grid.iter().map(|&t| (t, limit.cf(t))).collect();
    match limit {
        LimitLaw::Gaussian(g) => TheorySummary {
            covariance: Some(g.covariance()),
            combined_variance: Some(g.combined_variance()),
            sigma: None,
            laplace: g.laplace(),
            cf_grid,
        },
        LimitLaw::Stable(s) => TheorySummary {
            covariance: None,
            combined_variance: None,
            sigma: Some(s.sigma),
            laplace: s.laplace(),
            cf_grid,
        },
    }
}

/// Fredholm determinant at the configured order and at twice that order,
/// for `E[exp(-Σ s_j I(z_j) / g)]`.
pub fn fredholm_summary(config: &ExperimentConfig, model: &DppModel, scale: Option<f64>) -> Result<FredholmSummary> {
    let response = config.response_fn()?;
    let query = config.fdd_query()?;
    let grid = NystromGrid::for_model(model, &query, &response, config.tests.fredholm_order)?;
    let op = DiscretizedOperator::build(model, &config.amplitudes, &query, &response, &grid, scale)?;
    let fine = DiscretizedOperator::build(model, &config.amplitudes, &query, &response, &grid.doubled(), scale)?;
    let (coarse_v, fine_v) = (fredholm_laplace(&op), fredholm_laplace(&fine));
    let series: Option<TraceSeries> = trace_series(&op, 6).ok();
    Ok(FredholmSummary {
        laplace: coarse_v,
        laplace_doubled: fine_v,
        self_convergence: ((coarse_v - fine_v) / fine_v).abs(),
        nodes: op.size,
        trace: op.trace,
        trace_sq: op.trace_sq,
        n2_contribution: op.higher_order(),
        trace_partial_sums: series.as_ref().map(|s| s.partial_sums.clone()),
        remainder_bound: series.and_then(|s| s.remainder_bounds),
    })
}

fn laplace_check(
    config: &ExperimentConfig,
    target: LaplaceTarget,
    lambda: f64,
    raw: &[Vec<f64>],
    tilde: &[Vec<f64>],
    fredholm: Option<&FredholmSummary>,
) -> Result<LaplaceCheck> {
    let response = config.response_fn()?;
    let query = config.fdd_query()?;
    let law = &config.amplitudes;
    let values = match target {
        LaplaceTarget::Raw => raw,
        LaplaceTarget::Centered => tilde,
    };
    let draws: Vec<f64> = values.iter().map(|v| (-query.combine(v)).exp()).collect();
    let (mc, se) = stats::mean_se(&draws);
    let g = law.scaling_g(lambda);
    let shift = field_mean(lambda, law, &response) * query.weight_sum() / g;
    let oracle = match (config.process, target) {
        (ProcessSpec::Poisson, LaplaceTarget::Centered) => {
            limits::poisson_prelimit_laplace(lambda, law, &query, &response)?
        }
        (ProcessSpec::Poisson, LaplaceTarget::Raw) => {
            limits::poisson_laplace_functional(lambda, law, &query, &response, 1.0)?
        }
        (ProcessSpec::Dpp { .. }, t) => {
            let f = fredholm.ok_or_else(|| Error::invalid("missing Fredholm oracle"))?;
            match t {
                LaplaceTarget::Raw => f.laplace_doubled,
                LaplaceTarget::Centered => f.laplace_doubled * shift.exp(),
            }
        }
    };
    Ok(LaplaceCheck {
        target,
        monte_carlo: mc,
        standard_error: se,
        oracle,
        z_score: (mc - oracle) / se,
    })
}

/// Statistics of the replicates at intensity index `index`.
pub fn analyse_lambda(config: &ExperimentConfig, index: usize, limit: &LimitLaw, raw: &[Vec<f64>]) -> Result<LambdaRow> {
    let lambda = config.lambdas[index];
    let law = &config.amplitudes;
    let response = config.response_fn()?;
    let query = config.fdd_query()?;
    let tilde: Vec<Vec<f64>> = raw.iter().map(|v| centralize_scale(v, lambda, law, &response)).collect();
    let m = query.len();
    let positions = (0..m)
        .map(|j| {
            let col: Vec<f64> = tilde.iter().map(|r| r[j]).collect();
            PositionStats {
                mean: stats::mean(&col),
                variance: stats::variance(&col),
            }
        })
        .collect();
    let joint = fdd_joint_check(&tilde, limit, &config.tests.cf_grid)?;
    let variance_gap = joint
        .theory_variance
        .map(|v| (joint.empirical_variance - v).abs() / v);

    let (fredholm, dpp) = match config.process {
        ProcessSpec::Dpp { epsilon } => {
            let window = config.window()?;
            let model = DppModel::build(lambda, epsilon, window)?;
            let (center, half) = query_box(&query, window.dim, response.radius);
            let patch = model.patch(center, half)?;
            let summary = DppSummary {
                bandwidth: model.bandwidth,
                resolution: model.resolution(),
                max_eigenvalue: model.max_eigenvalue(),
                expected_count: model.expected_count(),
                kernel_l2_over_lambda: model.kernel_l2_integral() / lambda,
                patch_side: patch.model().window.side,
            };
            let fredholm = match config.tests.laplace {
                Some(target) => {
                    let scale = match target {
                        LaplaceTarget::Raw => None,
                        LaplaceTarget::Centered => Some(law.scaling_g(lambda)),
                    };
                    Some(fredholm_summary(config, &model, scale)?)
                }
                None => None,
            };
            (fredholm, Some(summary))
        }
        ProcessSpec::Poisson => (None, None),
    };
    let laplace = match config.tests.laplace {
        Some(target) => Some(laplace_check(config, target, lambda, raw, &tilde, fredholm.as_ref())?),
        None => None,
    };
    Ok(LambdaRow {
        lambda,
        seed: config.seed,
        replicates: raw.len(),
        scale_g: law.scaling_g(lambda),
        field_mean: field_mean(lambda, law, &response),
        positions,
        variance_gap,
        joint,
        laplace,
        fredholm,
        dpp,
        padding_ratio: config.window.side / response.radius,
    })
}

fn strictly_decreasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] < w[0])
}

fn fmt_seq(xs: &[f64]) -> String {
    let parts: Vec<String> = xs.iter().map(|x| format!("{x:.4e}")).collect();
    format!("[{}]", parts.join(", "))
}

/// Evaluates the configured assertions on finished rows.
pub fn evaluate_assertions(config: &ExperimentConfig, rows: &[LambdaRow]) -> Vec<AssertionOutcome> {
    let last = rows.last();
    config
        .tests
        .assertions
        .iter()
        .map(|&assertion| {
            let (passed, detail) = match assertion {
                Assertion::VarianceGapDecreasing => {
                    let gaps: Option<Vec<f64>> = rows.iter().map(|r| r.variance_gap).collect();
                    match gaps {
                        Some(g) => (strictly_decreasing(&g), format!("relative variance gaps {}", fmt_seq(&g))),
                        None => (false, "no Gaussian limit".into()),
                    }
                }
                Assertion::VarianceGapFinal => match last.and_then(|r| r.variance_gap) {
                    Some(g) => (g < 0.05, format!("final relative variance gap {g:.4e} (limit 5e-2)")),
                    None => (false, "no Gaussian limit".into()),
                },
                Assertion::KsFinal => match last.and_then(|r| r.joint.ks) {
                    Some(ks) => (
                        ks.p_value > config.tests.ks_level,
                        format!("final KS D = {:.4e}, p = {:.4}", ks.statistic, ks.p_value),
                    ),
                    None => (false, "no Gaussian limit".into()),
                },
                Assertion::CfDecreasing => {
                    let d: Vec<f64> = rows.iter().map(|r| r.joint.cf_distance).collect();
                    (strictly_decreasing(&d), format!("CF sup-distances {}", fmt_seq(&d)))
                }
                Assertion::CfFinal => match last {
                    Some(r) => {
                        let thr = config.tests.cf_threshold.unwrap_or_else(|| cf_threshold(r.replicates));
                        (
                            r.joint.cf_distance < thr,
                            format!("final CF sup-distance {:.4e} (limit {thr:.4e})", r.joint.cf_distance),
                        )
                    }
                    None => (false, "no rows".into()),
                },
                Assertion::SigmaFitFinal => match last.and_then(|r| r.joint.sigma_fit.zip(r.joint.sigma_theory)) {
                    Some((fit, theory)) => {
                        let rel = (fit - theory).abs() / theory;
                        (rel < 0.1, format!("fitted sigma {fit:.4} vs {theory:.4} (relative {rel:.3e})"))
                    }
                    None => (false, "no stable limit".into()),
                },
                Assertion::LaplaceOracle => {
                    let z: Option<Vec<f64>> = rows.iter().map(|r| r.laplace.as_ref().map(|l| l.z_score)).collect();
                    match z {
                        Some(z) => (z.iter().all(|z| z.abs() < 3.0), format!("z-scores {}", fmt_seq(&z))),
                        None => (false, "no Laplace check".into()),
                    }
                }
                Assertion::FredholmSelfConvergence => {
                    let c: Option<Vec<f64>> = rows.iter().map(|r| r.fredholm.as_ref().map(|f| f.self_convergence)).collect();
                    match c {
                        Some(c) => (c.iter().all(|c| *c < 1e-4), format!("relative changes {}", fmt_seq(&c))),
                        None => (false, "no Fredholm oracle".into()),
                    }
                }
            };
            AssertionOutcome {
                assertion,
                passed,
                detail,
            }
        })
        .collect()
}

/// Runs the sweep on a pool of `threads` workers (all cores when `None`).
/// The report is a function of the configuration only.
pub fn run_experiment(config: &ExperimentConfig, threads: Option<usize>) -> Result<ExperimentRun> {
    config.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n.max(1));
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| {
        let limit = limit_law(config)?;
        let theory = theory_summary(config, &limit);
        let mut rows = Vec::with_capacity(config.lambdas.len());
        let mut samples = Vec::with_capacity(config.lambdas.len());
        let mut seconds = Vec::with_capacity(config.lambdas.len());
        for index in 0..config.lambdas.len() {
            let start = Instant::now();
            let raw = simulate_lambda(config, index)
                .map_err(|e| e.context(format!("sampling at intensity {}", config.lambdas[index])))?;
            let row = analyse_lambda(config, index, &limit, &raw)
                .map_err(|e| e.context(format!("statistics at intensity {}", config.lambdas[index])))?;
            seconds.push(start.elapsed().as_secs_f64());
            rows.push(row);
            samples.push(raw);
        }
        let assertions = evaluate_assertions(config, &rows);
        Ok(ExperimentRun {
            report: ConvergenceReport {
                config: config.clone(),
                theory,
                rows,
                assertions,
            },
            samples,
            seconds,
        })
    })
}
