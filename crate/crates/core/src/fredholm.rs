//! Nyström discretization of the DPP Laplace operator
//! `√(1 - L_P(ξ(x)/g)) K(x, y) √(1 - L_P(ξ(y)/g))` and its Fredholm
//! determinant.
//!
//! For a DPP with kernel `K`, `E[exp(-Σ s_j I(z_j))] = det(I - K_v)` with
//! `v = 1 - L_P(ξ)`. The operator is discretized on Gauss–Legendre panels
//! covering the support of `ξ`, symmetrized with square-root weights, and
//! stored as a band matrix: the Gaussian kernel is negligible beyond a few
//! bandwidths. The log-determinant comes from a banded Cholesky factor of
//! `I - M`, which also certifies that every eigenvalue is below one.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::amplitudes::AmplitudeLaw;
use crate::error::{Error, Result};
use crate::pointproc::DppModel;
use crate::quad;
use crate::shotnoise::{FddQuery, ResponseFn, ResponseShape};
use crate::Point;

/// Kernel entries below `exp(-42) ≈ 6e-19` relative are dropped.
const BAND_CUTOFF_SQ: f64 = 42.0;
/// Operators up to this size also get a dense eigen-decomposition.
pub const DENSE_LIMIT: usize = 2500;

/// Tensor-product Gauss–Legendre nodes covering the support of `ξ`.
#[derive(Debug, Clone, PartialEq)]
pub struct NystromGrid {
    pub dim: usize,
    pub nodes: Vec<Point>,
    pub weights: Vec<f64>,
    pub panel_width: f64,
    /// Nodes per panel and axis.
    pub order: usize,
    axes: Vec<Vec<(f64, f64)>>,
}

fn axis_rule(intervals: &[(f64, f64)], panel_width: f64, order: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    for &(a, b) in intervals {
        let panels = ((b - a) / panel_width).ceil().max(1.0) as usize;
        let (x, w) = quad::composite_gauss_legendre(a, b, panels, order);
        nodes.extend(x);
        weights.extend(w);
    }
    (nodes, weights)
}

impl NystromGrid {
    /// Grid over the support of `ξ`: per axis, the union of
    /// `[z_j - R_tol, z_j + R_tol]` over positions with positive weight,
    /// split into panels no wider than `panel_width`.
    pub fn covering(query: &FddQuery, response: &ResponseFn, panel_width: f64, order: usize) -> Result<Self> {
        if !(panel_width > 0.0) || order == 0 {
            return Err(Error::invalid("panel width and order must be positive"));
        }
        let dim = response.dim;
        let centers = query.active_positions();
        let r = response.radius;
        let axes: Vec<Vec<(f64, f64)>> = (0..dim)
            .map(|i| quad::merge_intervals(centers.iter().map(|c| (c[i] - r, c[i] + r)).collect()))
            .collect();
        Ok(Self::from_axes(dim, axes, panel_width, order))
    }

    /// Grid whose panels are a quarter of the smaller of the kernel
    /// bandwidth and the response width.
    pub fn for_model(model: &DppModel, query: &FddQuery, response: &ResponseFn, order: usize) -> Result<Self> {
        let panel = 0.25 * model.bandwidth.min(response_width(response));
        Self::covering(query, response, panel, order)
    }

    fn from_axes(dim: usize, axes: Vec<Vec<(f64, f64)>>, panel_width: f64, order: usize) -> Self {
        let rules: Vec<(Vec<f64>, Vec<f64>)> = axes.iter().map(|iv| axis_rule(iv, panel_width, order)).collect();
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        if dim == 1 {
            for (x, w) in rules[0].0.iter().zip(&rules[0].1) {
                nodes.push([*x, 0.0]);
                weights.push(*w);
            }
        } else {
            for (x, wx) in rules[0].0.iter().zip(&rules[0].1) {
                for (y, wy) in rules[1].0.iter().zip(&rules[1].1) {
                    nodes.push([*x, *y]);
                    weights.push(wx * wy);
                }
            }
        }
        Self {
            dim,
            nodes,
            weights,
            panel_width,
            order,
            axes,
        }
    }

    /// Same panels with twice as many nodes per panel and axis.
    pub fn doubled(&self) -> Self {
        Self::from_axes(self.dim, self.axes.clone(), self.panel_width, 2 * self.order)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `Σ w_i`, the covered volume.
    pub fn volume(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Length scale of a response, used to size quadrature panels.
pub fn response_width(response: &ResponseFn) -> f64 {
    match response.shape {
        ResponseShape::GaussBump { width, .. } => width,
        ResponseShape::BallIndicator { radius } => radius,
        ResponseShape::ExpDecay { rate, .. } => 1.0 / rate,
    }
}

/// Symmetric band matrix `M_ij = √w_i a(x_i) K(x_i, x_j) a(x_j) √w_j` with
/// `a = √(1 - L_P(ξ / g))`, restricted to nodes where `a > 0`.
#[derive(Debug, Clone)]
pub struct DiscretizedOperator {
    pub size: usize,
    /// Half-bandwidth.
    pub band: usize,
    /// Row `i` holds columns `i - band ..= i`.
    lower: Vec<f64>,
    pub trace: f64,
    pub trace_sq: f64,
    /// `log det(I - M)`
    pub log_det: f64,
    /// Scale `g` the test function was divided by.
    pub scale: f64,
}

impl DiscretizedOperator {
    pub fn build(
        model: &DppModel,
        law: &AmplitudeLaw,
        query: &FddQuery,
        response: &ResponseFn,
        grid: &NystromGrid,
        scale: Option<f64>,
    ) -> Result<Self> {
        query.validate()?;
        if grid.dim != model.window.dim || grid.dim != response.dim {
            return Err(Error::invalid("grid, model and response dimensions differ"));
        }
        let g = scale.unwrap_or(1.0);
        if !(g > 0.0) {
            return Err(Error::invalid("scale must be positive"));
        }
        let mut kept: Vec<(Point, f64)> = grid
            .nodes
            .iter()
            .zip(&grid.weights)
            .filter_map(|(x, w)| {
                let v = law.one_minus_laplace(query.xi_eval(response, x) / g);
                (v > 0.0).then(|| (*x, (w * v).sqrt()))
            })
            .collect();
        kept.sort_by(|a, b| a.0[0].total_cmp(&b.0[0]).then(a.0[1].total_cmp(&b.0[1])));
        let n = kept.len();
        let cutoff = model.bandwidth * BAND_CUTOFF_SQ.sqrt();
        let mut band = 0;
        let mut hi = 0;
        for i in 0..n {
            hi = hi.max(i);
            while hi + 1 < n && kept[hi + 1].0[0] - kept[i].0[0] <= cutoff {
                hi += 1;
            }
            band = band.max(hi - i);
        }
        let width = band + 1;
        let mut lower = vec![0.0; n * width];
        lower.par_chunks_mut(width.max(1)).enumerate().for_each(|(i, row)| {
            let (xi, ci) = kept[i];
            for j in i.saturating_sub(band)..=i {
                let (xj, cj) = kept[j];
                row[j + band - i] = ci * cj * model.kernel_eval(&xi, &xj);
            }
        });

        let mut trace = 0.0;
        let mut trace_sq = 0.0;
        for i in 0..n {
            let row = &lower[i * width..(i + 1) * width];
            trace += row[band];
            trace_sq += row[band] * row[band];
            trace_sq += 2.0 * row[..band].iter().map(|v| v * v).sum::<f64>();
        }

        let mut op = Self {
            size: n,
            band,
            lower,
            trace,
            trace_sq,
            log_det: 0.0,
            scale: g,
        };
        op.log_det = op.cholesky_log_det()?;
        Ok(op)
    }

    /// `M_ij` for `|i - j| <= band`, zero otherwise.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        if i - j > self.band {
            return 0.0;
        }
        self.lower[i * (self.band + 1) + j + self.band - i]
    }

    pub fn dense(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_fn(self.size, self.size, |i, j| self.entry(i, j))
    }

    /// `log det(I - M)` from the banded Cholesky factor of `I - M`; fails
    /// when a pivot is not positive, that is when some eigenvalue of `M`
    /// reaches one.
    fn cholesky_log_det(&self) -> Result<f64> {
        let n = self.size;
        let b = self.band;
        let width = b + 1;
        let mut l = vec![0.0; n * width];
        let mut log_det = 0.0;
        for i in 0..n {
            let lo = i.saturating_sub(b);
            for j in lo..=i {
                let a = if i == j { 1.0 } else { 0.0 } - self.lower[i * width + j + b - i];
                let k0 = lo.max(j.saturating_sub(b));
                let mut sum = a;
                let ri = i * width + b - i;
                let rj = j * width + b - j;
                for k in k0..j {
                    sum -= l[ri + k] * l[rj + k];
                }
                if i == j {
                    if !(sum > 0.0) {
                        return Err(Error::EigenvalueNotBelowOne(1.0 - sum));
                    }
                    let d = sum.sqrt();
                    l[ri + i] = d;
                    log_det += 2.0 * d.ln();
                } else {
                    l[ri + j] = sum / l[rj + j];
                }
            }
        }
        Ok(log_det)
    }

    /// Eigenvalues in descending order from a dense decomposition; only
    /// for operators with at most `DENSE_LIMIT` nodes.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        if self.size > DENSE_LIMIT {
            return Err(Error::invalid(format!(
                "dense eigenvalues need at most {DENSE_LIMIT} nodes, operator has {}",
                self.size
            )));
        }
        if self.size == 0 {
            return Ok(Vec::new());
        }
        let mut eig: Vec<f64> = self.dense().symmetric_eigenvalues().iter().copied().collect();
        eig.sort_by(|a, b| b.total_cmp(a));
        Ok(eig)
    }

    pub fn max_eigenvalue(&self) -> Result<f64> {
        Ok(self.eigenvalues()?.first().copied().unwrap_or(0.0))
    }

    /// `M` as full band rows: row `i` holds columns `i - band ..= i + band`.
    fn band_rows(&self) -> BandMatrix {
        let b = self.band;
        let width = 2 * b + 1;
        let mut data = vec![0.0; self.size * width];
        for i in 0..self.size {
            for j in i.saturating_sub(b)..(i + b + 1).min(self.size) {
                data[i * width + j + b - i] = self.entry(i, j);
            }
        }
        BandMatrix {
            n: self.size,
            half: b,
            data,
        }
    }

    /// `Tr(M^k)` for `k = 1..=terms`, from banded powers of `M`:
    /// `Tr(M^{2k}) = ‖M^k‖²_F` and `Tr(M^{2k+1}) = ⟨M^k, M^{k+1}⟩_F`.
    pub fn power_traces(&self, terms: usize) -> Vec<f64> {
        let m = self.band_rows();
        let mut powers = vec![m.clone()];
        while powers.len() < terms.div_ceil(2) + 1 {
            let next = powers.last().unwrap().mul(&m);
            powers.push(next);
        }
        (1..=terms)
            .map(|k| {
                if k == 1 {
                    self.trace
                } else if k % 2 == 0 {
                    powers[k / 2 - 1].frobenius(&powers[k / 2 - 1])
                } else {
                    powers[k / 2 - 1].frobenius(&powers[k / 2])
                }
            })
            .collect()
    }

    /// `det(I - M) = Π (1 - μ_i)`.
    pub fn determinant(&self) -> f64 {
        self.log_det.exp()
    }

    /// `|log det(I - M) + Tr M|`, the size of the `n >= 2` terms of
    /// `-Σ Tr(M^n) / n`.
    pub fn higher_order(&self) -> f64 {
        (self.log_det + self.trace).abs()
    }
}

/// `E[exp(-Σ s_j I(z_j) / g)]` for the DPP: the Fredholm determinant of the
/// discretized operator.
pub fn fredholm_laplace(op: &DiscretizedOperator) -> f64 {
    op.determinant()
}

/// Partial sums of `Σ_{n>=1} Tr(M^n) / n = -log det(I - M)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSeries {
    /// Entry `k` sums the terms `n = 1..=k+1`.
    pub partial_sums: Vec<f64>,
    /// `-ln(1 - q) - Σ_{n<=k+1} q^n / n` with `q = √Tr(M²)`, an upper bound
    /// on the tail after entry `k`; absent when `q >= 1`.
    pub remainder_bounds: Option<Vec<f64>>,
    /// `-log det(I - M)`.
    pub limit: f64,
}

/// Symmetric band matrix with full rows of width `2 half + 1`.
#[derive(Debug, Clone)]
struct BandMatrix {
    n: usize,
    half: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    fn width(&self) -> usize {
        2 * self.half + 1
    }

    fn get(&self, i: usize, j: usize) -> f64 {
        if i.abs_diff(j) > self.half {
            0.0
        } else {
            self.data[i * self.width() + j + self.half - i]
        }
    }

    fn mul(&self, other: &BandMatrix) -> BandMatrix {
        let half = self.half + other.half;
        let width = 2 * half + 1;
        let n = self.n;
        let mut data = vec![0.0; n * width];
        data.par_chunks_mut(width.max(1)).enumerate().for_each(|(i, row)| {
            for k in i.saturating_sub(self.half)..(i + self.half + 1).min(n) {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in k.saturating_sub(other.half)..(k + other.half + 1).min(n) {
                    row[j + half - i] += a * other.get(k, j);
                }
            }
        });
        BandMatrix { n, half, data }
    }

    /// `Σ_ij A_ij B_ij`.
    fn frobenius(&self, other: &BandMatrix) -> f64 {
        let (small, large) = if self.half <= other.half { (self, other) } else { (other, self) };
        (0..self.n)
            .map(|i| {
                (i.saturating_sub(small.half)..(i + small.half + 1).min(self.n))
                    .map(|j| small.get(i, j) * large.get(i, j))
                    .sum::<f64>()
            })
            .sum()
    }
}

/// First `terms` partial sums.
pub fn trace_series(op: &DiscretizedOperator, terms: usize) -> Result<TraceSeries> {
    let mut partial_sums = Vec::with_capacity(terms);
    let mut acc = 0.0;
    for (k, t) in op.power_traces(terms).into_iter().enumerate() {
        acc += t / (k + 1) as f64;
        partial_sums.push(acc);
    }
    let q = op.trace_sq.sqrt();
    let remainder_bounds = (q < 1.0).then(|| {
        let total = -(-q).ln_1p();
        let mut head = 0.0;
        let mut qn = 1.0;
        (1..=terms)
            .map(|n| {
                qn *= q;
                head += qn / n as f64;
                (total - head).max(0.0)
            })
            .collect()
    });
    Ok(TraceSeries {
        partial_sums,
        remainder_bounds,
        limit: -op.log_det,
    })
}

/// Upper bound `b_ℓ c_ℓ (Σ s_j)² (p / g)² ∫ K(0, y)² dy` on `Tr(M²)`.
pub fn trace_sq_bound(model: &DppModel, law: &AmplitudeLaw, query: &FddQuery, response: &ResponseFn, g: f64) -> f64 {
    let s = query.weight_sum();
    response.sup * response.integral * s * s * (law.mean() / g).powi(2) * model.kernel_l2_integral()
}

/// One row of [`higher_order_vanishing`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HigherOrderRow {
    pub lambda: f64,
    pub scale: f64,
    pub nodes: usize,
    pub trace: f64,
    pub trace_sq: f64,
    pub trace_sq_bound: f64,
    pub log_det: f64,
    /// `|log det(I - M) + Tr M|`
    pub higher_order: f64,
}

/// For each intensity, builds the DPP with repulsion `epsilon` on `window`,
/// scales `ξ` by `g(λ)` of the amplitude law and reports the size of the
/// `n >= 2` terms of the log-determinant.
pub fn higher_order_vanishing(
    epsilon: f64,
    window: &crate::pointproc::Window,
    law: &AmplitudeLaw,
    query: &FddQuery,
    response: &ResponseFn,
    order: usize,
    lambdas: &[f64],
) -> Result<Vec<HigherOrderRow>> {
    lambdas
        .iter()
        .map(|&lambda| {
            let model = DppModel::build(lambda, epsilon, *window)?;
            let grid = NystromGrid::for_model(&model, query, response, order)?;
            let g = law.scaling_g(lambda);
            let op = DiscretizedOperator::build(&model, law, query, response, &grid, Some(g))
                .map_err(|e| e.context(format!("operator at intensity {lambda}")))?;
            Ok(HigherOrderRow {
                lambda,
                scale: g,
                nodes: op.size,
                trace: op.trace,
                trace_sq: op.trace_sq,
                trace_sq_bound: trace_sq_bound(&model, law, query, response, g),
                log_det: op.log_det,
                higher_order: op.higher_order(),
            })
        })
        .collect()
}
