//! Numerical integration: Gauss–Legendre rules, a globally adaptive
//! Gauss–Kronrod (7, 15) integrator, and helpers that integrate over unions
//! of balls in one or two dimensions.
//!
//! Every oracle in the crate goes through [`integrate`] or
//! [`integrate_over_balls`], so tolerances are stated once per call site.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::Point;

/// Stopping rule: the summed error estimate must fall below
/// `max(abs, rel * |value|)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
}

impl Tolerance {
    pub const fn absolute(abs: f64) -> Self {
        Self { abs, rel: 0.0 }
    }

    pub const fn relative(rel: f64) -> Self {
        Self { abs: 0.0, rel }
    }

    pub const fn new(abs: f64, rel: f64) -> Self {
        Self { abs, rel }
    }

    fn target(&self, value: f64) -> f64 {
        self.abs.max(self.rel * value.abs())
    }

    /// Tolerance for an inner integral whose results are integrated over an
    /// outer domain of measure `outer_measure`.
    fn inner(&self, outer_measure: f64) -> Self {
        Self {
            abs: 0.1 * self.abs / outer_measure.max(1e-300),
            rel: 0.1 * self.rel,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

/// Interval budget of the adaptive integrator.
pub const MAX_INTERVALS: usize = 4000;

// Kronrod abscissae (positive half, descending) and weights; the odd-indexed
// abscissae are the 7-point Gauss nodes.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod15<F>(f: &mut F, a: f64, b: f64) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center)?;
    let mut res_k = fc * WGK[7];
    let mut res_g = fc * WG[3];
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx)?;
        let f2 = f(center + dx)?;
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let value = res_k * half;
    let res_abs = res_abs * half.abs();
    let res_asc = res_asc * half.abs();
    let mut err = ((res_k - res_g) * half).abs();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    if !value.is_finite() {
        return Err(Error::invalid(format!(
            "non-finite integrand on [{a}, {b}]"
        )));
    }
    Ok((value, err))
}

/// Adaptive integral of a fallible integrand over `[a, b]` with interior
/// breakpoints `breaks` (need not be sorted; points outside `(a, b)` are
/// ignored).
pub fn integrate_fallible<F>(
    mut f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    tol: Tolerance,
) -> Result<Estimate>
where
    F: FnMut(f64) -> Result<f64>,
{
    if a == b {
        return Ok(Estimate {
            value: 0.0,
            error: 0.0,
            evaluations: 0,
        });
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let mut cuts: Vec<f64> = breaks
        .iter()
        .copied()
        .filter(|&x| x > lo && x < hi)
        .collect();
    cuts.push(lo);
    cuts.push(hi);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let mut heap = BinaryHeap::new();
    let mut frozen_value = 0.0;
    let mut frozen_error = 0.0;
    let mut evaluations = 0;
    for w in cuts.windows(2) {
        let (value, error) = kronrod15(&mut f, w[0], w[1])?;
        evaluations += 15;
        heap.push(Segment {
            a: w[0],
            b: w[1],
            value,
            error,
        });
    }

    loop {
        let (mut value, mut error) = (frozen_value, frozen_error);
        for s in heap.iter() {
            value += s.value;
            error += s.error;
        }
        if error <= tol.target(value) || heap.is_empty() {
            return Ok(Estimate {
                value: sign * value,
                error,
                evaluations,
            });
        }
        if heap.len() + 1 >= MAX_INTERVALS {
            return Err(Error::QuadratureNonConvergence {
                estimate: sign * value,
                error,
                intervals: heap.len(),
            });
        }
        let worst = heap.pop().expect("non-empty heap");
        let mid = 0.5 * (worst.a + worst.b);
        let scale = worst.a.abs().max(worst.b.abs()).max(1e-300);
        if (worst.b - worst.a) <= 1e3 * f64::EPSILON * scale {
            // cannot be refined further in double precision
            frozen_value += worst.value;
            frozen_error += worst.error;
            continue;
        }
        let (v1, e1) = kronrod15(&mut f, worst.a, mid)?;
        let (v2, e2) = kronrod15(&mut f, mid, worst.b)?;
        evaluations += 30;
        heap.push(Segment {
            a: worst.a,
            b: mid,
            value: v1,
            error: e1,
        });
        heap.push(Segment {
            a: mid,
            b: worst.b,
            value: v2,
            error: e2,
        });
    }
}

/// Adaptive Gauss–Kronrod integral of `f` over `[a, b]`.
pub fn integrate<F>(mut f: F, a: f64, b: f64, tol: Tolerance) -> Result<Estimate>
where
    F: FnMut(f64) -> f64,
{
    integrate_fallible(|x| Ok(f(x)), a, b, &[], tol)
}

/// Like [`integrate`] with interior breakpoints where the integrand has
/// kinks, jumps or narrow features.
pub fn integrate_with_breaks<F>(
    mut f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    tol: Tolerance,
) -> Result<Estimate>
where
    F: FnMut(f64) -> f64,
{
    integrate_fallible(|x| Ok(f(x)), a, b, breaks, tol)
}

/// Merges possibly overlapping closed intervals.
pub fn merge_intervals(mut intervals: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    intervals.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(intervals.len());
    for (a, b) in intervals {
        match out.last_mut() {
            Some(last) if a <= last.1 => last.1 = last.1.max(b),
            _ => out.push((a, b)),
        }
    }
    out
}

/// Integral of `f` over the union of the balls `B(c, radius)` for `c` in
/// `centers`, in dimension 1 or 2. The centers (and, in 2-d, the tangent
/// abscissae of each disc) are used as breakpoints.
pub fn integrate_over_balls<F>(
    dim: usize,
    centers: &[Point],
    radius: f64,
    mut f: F,
    tol: Tolerance,
) -> Result<Estimate>
where
    F: FnMut(Point) -> f64,
{
    if centers.is_empty() || radius <= 0.0 {
        return Ok(Estimate {
            value: 0.0,
            error: 0.0,
            evaluations: 0,
        });
    }
    let x_intervals = merge_intervals(
        centers
            .iter()
            .map(|c| (c[0] - radius, c[0] + radius))
            .collect(),
    );
    let x_breaks: Vec<f64> = centers
        .iter()
        .flat_map(|c| [c[0] - radius, c[0], c[0] + radius])
        .collect();
    let mut total = Estimate {
        value: 0.0,
        error: 0.0,
        evaluations: 0,
    };
    match dim {
        1 => {
            for &(a, b) in &x_intervals {
                let est = integrate_with_breaks(|x| f([x, 0.0]), a, b, &x_breaks, tol)?;
                total.value += est.value;
                total.error += est.error;
                total.evaluations += est.evaluations;
            }
        }
        2 => {
            let measure = std::f64::consts::PI * radius * radius * centers.len() as f64;
            let inner_tol = tol.inner(measure);
            let f = &mut f;
            for &(a, b) in &x_intervals {
                let outer = |x: f64| -> Result<f64> {
                    let mut ys = Vec::new();
                    let mut y_breaks = Vec::new();
                    for c in centers {
                        let dx = x - c[0];
                        let h2 = radius * radius - dx * dx;
                        if h2 > 0.0 {
                            let h = h2.sqrt();
                            ys.push((c[1] - h, c[1] + h));
                            y_breaks.extend([c[1] - h, c[1], c[1] + h]);
                        }
                    }
                    let mut acc = 0.0;
                    for (ya, yb) in merge_intervals(ys) {
                        let est = integrate_fallible(
                            |y| Ok(f([x, y])),
                            ya,
                            yb,
                            &y_breaks,
                            inner_tol,
                        )?;
                        acc += est.value;
                    }
                    Ok(acc)
                };
                let est = integrate_fallible(outer, a, b, &x_breaks, tol)?;
                total.value += est.value;
                total.error += est.error;
                total.evaluations += est.evaluations;
            }
        }
        _ => return Err(Error::invalid(format!("dimension {dim} not supported"))),
    }
    Ok(total)
}

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`,
/// nodes ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
    if n == 1 {
        return (vec![0.0], vec![2.0]);
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            // P_n(x) and P_{n-1}(x) by the three-term recurrence
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Composite Gauss–Legendre rule on `[a, b]`: `panels` equal panels with
/// `order` nodes each. Returns (nodes, weights), nodes ascending.
pub fn composite_gauss_legendre(a: f64, b: f64, panels: usize, order: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(order);
    let width = (b - a) / panels as f64;
    let mut nodes = Vec::with_capacity(panels * order);
    let mut weights = Vec::with_capacity(panels * order);
    for p in 0..panels {
        let left = a + p as f64 * width;
        for (xi, wi) in x.iter().zip(&w) {
            nodes.push(left + 0.5 * width * (xi + 1.0));
            weights.push(0.5 * width * wi);
        }
    }
    (nodes, weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn legendre_rule_integrates_polynomials_exactly() {
        for n in 1..=12 {
            let (x, w) = gauss_legendre(n);
            assert_relative_eq!(w.iter().sum::<f64>(), 2.0, epsilon = 1e-13);
            // degree 2n-1 is exact
            let deg = 2 * n - 2;
            let got: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
            assert_relative_eq!(got, 2.0 / (deg as f64 + 1.0), epsilon = 1e-13);
            assert!(x.windows(2).all(|p| p[0] < p[1]));
        }
    }

    #[test]
    fn adaptive_gaussian_integral() {
        let est = integrate(|x| (-x * x).exp(), -10.0, 10.0, Tolerance::absolute(1e-12)).unwrap();
        assert_relative_eq!(est.value, std::f64::consts::PI.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn adaptive_handles_endpoint_singularity() {
        let est = integrate(|x| x.powf(-0.5), 0.0, 1.0, Tolerance::new(1e-10, 1e-10)).unwrap();
        assert_relative_eq!(est.value, 2.0, epsilon = 1e-8);
    }

    #[test]
    fn jump_with_breakpoint() {
        let f = |x: f64| if x < 0.3 { 1.0 } else { 0.0 };
        let est = integrate_with_breaks(f, 0.0, 1.0, &[0.3], Tolerance::absolute(1e-12)).unwrap();
        assert_relative_eq!(est.value, 0.3, epsilon = 1e-12);
    }

    #[test]
    fn reversed_bounds_flip_sign() {
        let est = integrate(|x| x, 1.0, 0.0, Tolerance::absolute(1e-12)).unwrap();
        assert_relative_eq!(est.value, -0.5, epsilon = 1e-14);
    }

    #[test]
    fn disc_area_by_nested_quadrature() {
        let est = integrate_over_balls(2, &[[0.0, 0.0]], 1.0, |_| 1.0, Tolerance::absolute(1e-9)).unwrap();
        assert_relative_eq!(est.value, std::f64::consts::PI, epsilon = 1e-8);
        // two overlapping unit discs at distance 1: 2π − lens area
        let lens = 2.0 * (0.5f64).acos() - 0.5 * 3f64.sqrt();
        let est = integrate_over_balls(2, &[[0.0, 0.0], [1.0, 0.0]], 1.0, |_| 1.0, Tolerance::absolute(1e-9))
            .unwrap();
        assert_relative_eq!(est.value, 2.0 * std::f64::consts::PI - lens, epsilon = 1e-7);
    }

    #[test]
    fn union_of_intervals_in_one_dimension() {
        let est = integrate_over_balls(1, &[[0.0, 0.0], [0.5, 0.0], [5.0, 0.0]], 1.0, |_| 1.0, Tolerance::absolute(1e-12))
            .unwrap();
        assert_relative_eq!(est.value, 2.5 + 2.0, epsilon = 1e-12);
    }

    #[test]
    fn composite_rule_weights_sum_to_length() {
        let (x, w) = composite_gauss_legendre(-1.0, 3.0, 7, 4);
        assert_eq!(x.len(), 28);
        assert_relative_eq!(w.iter().sum::<f64>(), 4.0, epsilon = 1e-13);
        let got: f64 = x.iter().zip(&w).map(|(x, w)| w * (-(x - 1.0).powi(2)).exp()).sum();
        let want = integrate(|x| (-(x - 1.0f64).powi(2)).exp(), -1.0, 3.0, Tolerance::absolute(1e-13)).unwrap();
        assert_relative_eq!(got, want.value, epsilon = 1e-9);
    }
}
