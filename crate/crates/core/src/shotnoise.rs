//! Response functions and the shot-noise field `I(z) = Σ P_n ℓ(z - X_n)`.

use std::f64::consts::{LN_10, PI};

use serde::{Deserialize, Serialize};

use crate::amplitudes::AmplitudeLaw;
use crate::error::{Error, Result};
use crate::pointproc::{Boundary, PointPattern, Window};
use crate::Point;

/// `ln(1e12)`: responses are below `1e-12 * b` beyond the effective radius.
const TAIL_LOG: f64 = 12.0 * LN_10;

/// Shape of a response function, as written in configs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ResponseShape {
    /// `b exp(-|x|² / w²)`
    GaussBump { height: f64, width: f64 },
    /// `1{|x| <= r}`
    BallIndicator { radius: f64 },
    /// `b exp(-a |x|)`
    ExpDecay { height: f64, rate: f64 },
}

/// A bounded, integrable, nonnegative response `ℓ` on `R^d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResponseFn {
    pub shape: ResponseShape,
    pub dim: usize,
    /// `b_ℓ = sup ℓ`
    pub sup: f64,
    /// `c_ℓ = ∫ ℓ`
    pub integral: f64,
    /// `R_tol`: `ℓ(x) <= 1e-12 b_ℓ` for `|x| > R_tol` (exact support for
    /// the ball indicator).
    pub radius: f64,
}

impl ResponseFn {
    pub fn new(shape: ResponseShape, dim: usize) -> Result<Self> {
        if !(dim == 1 || dim == 2) {
            return Err(Error::invalid(format!("dimension must be 1 or 2, got {dim}")));
        }
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} must be positive, got {v}")))
            }
        };
        let (sup, integral, radius) = match shape {
            ResponseShape::GaussBump { height, width } => {
                positive("height", height)?;
                positive("width", width)?;
                let c = height * (PI.sqrt() * width).powi(dim as i32);
                (height, c, width * TAIL_LOG.sqrt())
            }
            ResponseShape::BallIndicator { radius } => {
                positive("radius", radius)?;
                let c = if dim == 1 { 2.0 * radius } else { PI * radius * radius };
                (1.0, c, radius)
            }
            ResponseShape::ExpDecay { height, rate } => {
                positive("height", height)?;
                positive("rate", rate)?;
                let c = if dim == 1 {
                    2.0 * height / rate
                } else {
                    2.0 * PI * height / (rate * rate)
                };
                (height, c, TAIL_LOG / rate)
            }
        };
        Ok(Self {
            shape,
            dim,
            sup,
            integral,
            radius,
        })
    }

    pub fn gauss_bump(height: f64, width: f64, dim: usize) -> Result<Self> {
        Self::new(ResponseShape::GaussBump { height, width }, dim)
    }

    pub fn ball_indicator(radius: f64, dim: usize) -> Result<Self> {
        Self::new(ResponseShape::BallIndicator { radius }, dim)
    }

    pub fn exp_decay(height: f64, rate: f64, dim: usize) -> Result<Self> {
        Self::new(ResponseShape::ExpDecay { height, rate }, dim)
    }

    /// `ℓ(x)`.
    #[inline]
    pub fn eval(&self, x: &Point) -> f64 {
        let r2 = if self.dim == 1 {
            x[0] * x[0]
        } else {
            x[0] * x[0] + x[1] * x[1]
        };
        self.eval_sq(r2)
    }

    /// `ℓ` at squared distance `r2` from the origin.
    #[inline]
    pub fn eval_sq(&self, r2: f64) -> f64 {
        match self.shape {
            ResponseShape::GaussBump { height, width } => height * (-r2 / (width * width)).exp(),
            ResponseShape::BallIndicator { radius } => {
                if r2 <= radius * radius {
                    1.0
                } else {
                    0.0
                }
            }
            ResponseShape::ExpDecay { height, rate } => height * (-rate * r2.sqrt()).exp(),
        }
    }
}

/// Positions `z_1..z_m` and nonnegative weights `s_1..s_m`, defining the
/// test function `ξ(x) = Σ s_j ℓ(z_j - x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FddQuery {
    pub positions: Vec<Point>,
    pub weights: Vec<f64>,
}

impl FddQuery {
    pub fn new(positions: Vec<Point>, weights: Vec<f64>) -> Result<Self> {
        let q = Self { positions, weights };
        q.validate()?;
        Ok(q)
    }

    /// One position with unit weight.
    pub fn single(z: Point) -> Self {
        Self {
            positions: vec![z],
            weights: vec![1.0],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.positions.is_empty() {
            return Err(Error::invalid("query needs at least one position"));
        }
        if self.positions.len() != self.weights.len() {
            return Err(Error::invalid(format!(
                "{} positions but {} weights",
                self.positions.len(),
                self.weights.len()
            )));
        }
        if let Some(s) = self.weights.iter().find(|s| !(**s >= 0.0 && s.is_finite())) {
            return Err(Error::invalid(format!("weights must be nonnegative, got {s}")));
        }
        Ok(())
    }

    /// Checks that the positions lie in the window and, in padded mode, at
    /// least `R_tol` away from its boundary.
    pub fn validate_in(&self, window: &Window, response: &ResponseFn) -> Result<()> {
        self.validate()?;
        let margin = match window.boundary {
            Boundary::Padded => response.radius,
            Boundary::Torus => 0.0,
        };
        for z in &self.positions {
            for i in 0..window.dim {
                if z[i] < margin || z[i] > window.side - margin {
                    return Err(Error::invalid(format!(
                        "position {z:?} is closer than {margin} to the window boundary"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn weight_sum(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Positions carrying a positive weight.
    pub fn active_positions(&self) -> Vec<Point> {
        self.positions
            .iter()
            .zip(&self.weights)
            .filter(|(_, s)| **s > 0.0)
            .map(|(z, _)| *z)
            .collect()
    }

    /// `ξ(x) = Σ s_j ℓ(z_j - x)`.
    pub fn xi_eval(&self, response: &ResponseFn, x: &Point) -> f64 {
        self.positions
            .iter()
            .zip(&self.weights)
            .filter(|(_, s)| **s > 0.0)
            .map(|(z, s)| s * response.eval(&[z[0] - x[0], z[1] - x[1]]))
            .sum()
    }

    /// `Σ s_j v_j` for one replicate of field values.
    pub fn combine(&self, values: &[f64]) -> f64 {
        self.weights.iter().zip(values).map(|(s, v)| s * v).sum()
    }
}

/// Uniform grid of cells with side at least `R_tol`, so every point within
/// `R_tol` of a query lies in the 3^d block of cells around it.
struct Buckets {
    dim: usize,
    origin: Point,
    cell: [f64; 2],
    counts: [usize; 2],
    periodic: bool,
    starts: Vec<usize>,
    order: Vec<usize>,
}

impl Buckets {
    fn new(pattern: &PointPattern, reach: f64) -> Self {
        let dim = pattern.window.dim;
        let periodic = pattern.window.boundary == Boundary::Torus;
        let mut origin = [0.0; 2];
        let mut cell = [1.0; 2];
        let mut counts = [1usize; 2];
        for i in 0..dim {
            let (lo, hi) = if periodic {
                (0.0, pattern.window.side)
            } else {
                let lo = pattern.points.iter().map(|p| p[i]).fold(pattern.region.lower[i], f64::min);
                let hi = pattern.points.iter().map(|p| p[i]).fold(pattern.region.upper[i], f64::max);
                (lo, hi)
            };
            let extent = (hi - lo).max(f64::MIN_POSITIVE);
            let n = if periodic {
                ((extent / reach).floor() as usize).max(1)
            } else {
                ((extent / reach).ceil() as usize).max(1)
            };
            origin[i] = lo;
            counts[i] = n.min(1 << 20);
            cell[i] = extent / counts[i] as f64;
            if !periodic {
                cell[i] = cell[i].max(reach);
            }
        }
        let total = counts[0] * counts[1];
        let mut keys = Vec::with_capacity(pattern.len());
        let mut starts = vec![0usize; total + 1];
        for p in &pattern.points {
            let key = Self::key_of(dim, &origin, &cell, &counts, periodic, p, pattern.window.side);
            starts[key + 1] += 1;
            keys.push(key);
        }
        for k in 0..total {
            starts[k + 1] += starts[k];
        }
        let mut fill = starts.clone();
        let mut order = vec![0usize; pattern.len()];
        for (idx, &key) in keys.iter().enumerate() {
            order[fill[key]] = idx;
            fill[key] += 1;
        }
        Self {
            dim,
            origin,
            cell,
            counts,
            periodic,
            starts,
            order,
        }
    }

    fn axis_index(&self, i: usize, x: f64, side: f64) -> i64 {
        let x = if self.periodic { x.rem_euclid(side) } else { x };
        ((x - self.origin[i]) / self.cell[i]).floor() as i64
    }

    fn key_of(
        dim: usize,
        origin: &Point,
        cell: &[f64; 2],
        counts: &[usize; 2],
        periodic: bool,
        p: &Point,
        side: f64,
    ) -> usize {
        let mut key = 0;
        for i in 0..dim {
            let x = if periodic { p[i].rem_euclid(side) } else { p[i] };
            let c = ((x - origin[i]) / cell[i]).floor() as i64;
            let c = c.clamp(0, counts[i] as i64 - 1) as usize;
            key = key * counts[i] + c;
        }
        key
    }

    /// Cell indices along axis `i` that can hold points within reach of `x`.
    fn neighbours(&self, i: usize, x: f64, side: f64) -> Vec<usize> {
        let n = self.counts[i] as i64;
        let c = self.axis_index(i, x, side);
        let mut out: Vec<usize> = Vec::with_capacity(3);
        for d in -1..=1 {
            let k = c + d;
            let k = if self.periodic {
                k.rem_euclid(n)
            } else if k < 0 || k >= n {
                continue;
            } else {
                k
            };
            let k = k as usize;
            if !out.contains(&k) {
                out.push(k);
            }
        }
        out
    }

    fn for_each_near<F: FnMut(usize)>(&self, z: &Point, side: f64, mut f: F) {
        let xs = self.neighbours(0, z[0], side);
        let ys = if self.dim == 2 {
            self.neighbours(1, z[1], side)
        } else {
            vec![0]
        };
        for &a in &xs {
            for &b in &ys {
                let key = a * self.counts[1] + b;
                for &idx in &self.order[self.starts[key]..self.starts[key + 1]] {
                    f(idx);
                }
            }
        }
    }
}

fn check_amplitudes(pattern: &PointPattern, amplitudes: &[f64]) -> Result<()> {
    if pattern.len() != amplitudes.len() {
        return Err(Error::AmplitudeCountMismatch {
            points: pattern.len(),
            amplitudes: amplitudes.len(),
        });
    }
    Ok(())
}

/// `I(z_j) = Σ_n P_n ℓ(z_j - X_n)` for each `z_j`, using the torus
/// displacement on torus windows. Only points in grid cells within `R_tol`
/// of `z_j` are visited.
pub fn field_eval(
    pattern: &PointPattern,
    amplitudes: &[f64],
    response: &ResponseFn,
    zs: &[Point],
) -> Result<Vec<f64>> {
    check_amplitudes(pattern, amplitudes)?;
    if pattern.is_empty() {
        return Ok(vec![0.0; zs.len()]);
    }
    let window = &pattern.window;
    let buckets = Buckets::new(pattern, response.radius);
    Ok(zs
        .iter()
        .map(|z| {
            let mut acc = 0.0;
            buckets.for_each_near(z, window.side, |n| {
                let x = &pattern.points[n];
                acc += amplitudes[n] * response.eval_sq(window.distance_sq(z, x));
            });
            acc
        })
        .collect())
}

/// Same as [`field_eval`], summing over every point.
pub fn field_eval_brute(
    pattern: &PointPattern,
    amplitudes: &[f64],
    response: &ResponseFn,
    zs: &[Point],
) -> Result<Vec<f64>> {
    check_amplitudes(pattern, amplitudes)?;
    let window = &pattern.window;
    Ok(zs
        .iter()
        .map(|z| {
            pattern
                .points
                .iter()
                .zip(amplitudes)
                .map(|(x, p)| p * response.eval_sq(window.distance_sq(z, x)))
                .sum()
        })
        .collect())
}

/// `E[I(z)] = λ p c_ℓ`.
pub fn field_mean(lambda: f64, law: &AmplitudeLaw, response: &ResponseFn) -> f64 {
    lambda * law.mean() * response.integral
}

/// `Ĩ(z) = (I(z) - λ p c_ℓ) / g(λ)` componentwise.
pub fn centralize_scale(values: &[f64], lambda: f64, law: &AmplitudeLaw, response: &ResponseFn) -> Vec<f64> {
    let mean = field_mean(lambda, law, response);
    let g = law.scaling_g(lambda);
    values.iter().map(|v| (v - mean) / g).collect()
}
