use std::f64::consts::PI;
use std::io::Write;

use rand::Rng;

use super::window::{Boundary, PointPattern, Region, Window};
use crate::error::{Error, Result};
use crate::Point;

/// Proposal budget per point of the sequential sampler.
pub const REJECTION_CAP: u64 = 10_000_000;

const MASS_TOL: f64 = 1e-9;
const EDGE_TOL: f64 = 1e-12;
const MAX_FREQUENCIES: usize = 20_000_000;
/// Patch margin in bandwidths; the kernel is below `e^{-64}` across it.
const PATCH_MARGIN: f64 = 8.0;

/// Stationary DPP on a torus with Gaussian kernel
/// `K(x, y) = λ exp(-|x - y|² / s²)`, `s = π^{-1/2} λ^{-(1+ε)/d}`.
///
/// The kernel is diagonal in the Fourier basis of the torus, with
/// eigenvalue `β_k = λ (√π s)^d exp(-π² s² |k / L|²)` at integer frequency
/// `k`. The bandwidth rule makes `sup β_k = λ^{-ε}`.
#[derive(Debug, Clone)]
pub struct DppModel {
    pub intensity: f64,
    pub epsilon: f64,
    pub bandwidth: f64,
    pub window: Window,
    /// Largest retained `|k|_∞`.
    pub truncation: usize,
    frequencies: Vec<[i64; 2]>,
    eigenvalues: Vec<f64>,
}

impl DppModel {
    pub fn build(intensity: f64, epsilon: f64, window: Window) -> Result<Self> {
        window.validate()?;
        if !(intensity > 0.0 && intensity.is_finite()) {
            return Err(Error::invalid(format!("intensity must be positive, got {intensity}")));
        }
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return Err(Error::invalid(format!("repulsion exponent must be nonnegative, got {epsilon}")));
        }
        if window.boundary != Boundary::Torus {
            return Err(Error::invalid("DPP models live on a torus window"));
        }
        let d = window.dim as i32;
        let bandwidth = PI.powf(-0.5) * intensity.powf(-(1.0 + epsilon) / d as f64);
        let peak = intensity * (PI.sqrt() * bandwidth).powi(d);
        if peak > 1.0 + 1e-12 {
            return Err(Error::SpectrumViolation(format!(
                "largest eigenvalue {peak} exceeds 1"
            )));
        }
        let peak = peak.min(1.0);
        let a = (PI * bandwidth / window.side).powi(2);
        let q = |j: usize| (-a * (j * j) as f64).exp();

        let mut full: f64 = 1.0;
        let mut j = 1;
        loop {
            let t = q(j);
            full += 2.0 * t;
            if t < 1e-300 || t < f64::EPSILON * 1e-6 * full {
                break;
            }
            j += 1;
        }
        let target = MASS_TOL * intensity * window.volume();
        let mut partial: f64 = 1.0;
        let mut m = 0;
        loop {
            let dropped = peak * (full.powi(d) - partial.powi(d));
            if dropped < target && peak * q(m + 1) < EDGE_TOL {
                break;
            }
            m += 1;
            partial += 2.0 * q(m);
        }
        let count = (2 * m + 1).pow(d as u32);
        if count > MAX_FREQUENCIES {
            return Err(Error::invalid(format!(
                "spectrum needs {count} frequencies; shrink the window or use a patch"
            )));
        }

        let axis: Vec<f64> = (0..=m).map(q).collect();
        let mi = m as i64;
        let mut frequencies = Vec::with_capacity(count);
        let mut eigenvalues = Vec::with_capacity(count);
        if d == 1 {
            for k in -mi..=mi {
                frequencies.push([k, 0]);
                eigenvalues.push(peak * axis[k.unsigned_abs() as usize]);
            }
        } else {
            for k0 in -mi..=mi {
                for k1 in -mi..=mi {
                    frequencies.push([k0, k1]);
                    eigenvalues.push(
                        peak * axis[k0.unsigned_abs() as usize] * axis[k1.unsigned_abs() as usize],
                    );
                }
            }
        }
        Ok(Self {
            intensity,
            epsilon,
            bandwidth,
            window,
            truncation: m,
            frequencies,
            eigenvalues,
        })
    }

    /// Retained `(k, β_k)` pairs.
    pub fn spectrum(&self) -> impl Iterator<Item = ([i64; 2], f64)> + '_ {
        self.frequencies.iter().copied().zip(self.eigenvalues.iter().copied())
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues.iter().copied().fold(0.0, f64::max)
    }

    /// `Σ β_k`, the mean number of points.
    pub fn expected_count(&self) -> f64 {
        self.eigenvalues.iter().sum()
    }

    /// `Σ β_k (1 - β_k)`, the variance of the number of points.
    pub fn count_variance(&self) -> f64 {
        self.eigenvalues.iter().map(|b| b * (1.0 - b)).sum()
    }

    /// Window side over kernel bandwidth.
    pub fn resolution(&self) -> f64 {
        self.window.side / self.bandwidth
    }

    pub fn kernel_eval(&self, x: &Point, y: &Point) -> f64 {
        self.kernel_radial(self.window.distance_sq(x, y).sqrt())
    }

    pub fn kernel_radial(&self, r: f64) -> f64 {
        self.intensity * (-(r * r) / (self.bandwidth * self.bandwidth)).exp()
    }

    /// `∫ K(0, x)² dx = λ² (π/2)^{d/2} s^d`.
    pub fn kernel_l2_integral(&self) -> f64 {
        let d = self.window.dim as i32;
        self.intensity.powi(2) * (PI / 2.0).powf(d as f64 / 2.0) * self.bandwidth.powi(d)
    }

    /// `ρ₂(0, r) / λ² = 1 - exp(-2 r² / s²)`.
    pub fn pair_correlation(&self, r: f64) -> f64 {
        -(-2.0 * r * r / (self.bandwidth * self.bandwidth)).exp_m1()
    }

    pub fn write_spectrum_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        if self.window.dim == 1 {
            writeln!(out, "k,beta")?;
            for (k, b) in self.spectrum() {
                writeln!(out, "{},{}", k[0], b)?;
            }
        } else {
            writeln!(out, "k1,k2,beta")?;
            for (k, b) in self.spectrum() {
                writeln!(out, "{},{},{}", k[0], k[1], b)?;
            }
        }
        Ok(())
    }

    /// Draws the DPP on the whole torus.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<PointPattern> {
        let points = self.sample_raw(rng)?;
        Ok(PointPattern {
            points,
            intensity: self.intensity,
            window: self.window,
            region: Region::cube(self.window.dim, 0.0, self.window.side),
        })
    }

    fn sample_raw<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<Point>> {
        let scale = 2.0 * PI / self.window.side;
        let mut selected = Vec::new();
        for (k, &b) in self.frequencies.iter().zip(&self.eigenvalues) {
            if rng.random::<f64>() < b {
                selected.push([k[0] as f64 * scale, k[1] as f64 * scale]);
            }
        }
        sample_projection(&selected, &self.window, rng)
    }

    /// Sampler for the restriction of the process to the box
    /// `center ± half_width`.
    ///
    /// A DPP restricted to a set is the DPP of the restricted kernel, so the
    /// box is cut out of a smaller torus whose side exceeds the box by a few
    /// bandwidths. Falls back to the whole torus when the box is not small.
    pub fn patch(&self, center: Point, half_width: f64) -> Result<DppPatch> {
        if !(half_width > 0.0) {
            return Err(Error::invalid("patch half-width must be positive"));
        }
        let side = 2.0 * half_width + PATCH_MARGIN * self.bandwidth;
        if side >= self.window.side {
            return Ok(DppPatch {
                model: self.clone(),
                lower: [0.0; 2],
                extent: self.window.side,
                parent: self.window,
            });
        }
        let sub = Window::torus(self.window.dim, side)?;
        let model = DppModel::build(self.intensity, self.epsilon, sub)?;
        let mut lower = [0.0; 2];
        for i in 0..self.window.dim {
            lower[i] = center[i] - half_width;
        }
        Ok(DppPatch {
            model,
            lower,
            extent: 2.0 * half_width,
            parent: self.window,
        })
    }
}

/// Exact sampler of a DPP restricted to a box; see [`DppModel::patch`].
#[derive(Debug, Clone)]
pub struct DppPatch {
    model: DppModel,
    lower: Point,
    extent: f64,
    parent: Window,
}

impl DppPatch {
    /// The torus the box is cut from.
    pub fn model(&self) -> &DppModel {
        &self.model
    }

    pub fn region(&self) -> Region {
        let mut upper = self.lower;
        for u in upper.iter_mut().take(self.parent.dim) {
            *u += self.extent;
        }
        Region {
            lower: self.lower,
            upper,
        }
    }

    /// Points lie in [`Self::region`], in the coordinates of the parent
    /// torus (not wrapped).
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<PointPattern> {
        let dim = self.parent.dim;
        let mut points = self.model.sample_raw(rng)?;
        points.retain(|p| (0..dim).all(|i| p[i] <= self.extent));
        for p in &mut points {
            for i in 0..dim {
                p[i] += self.lower[i];
            }
        }
        Ok(PointPattern {
            points,
            intensity: self.model.intensity,
            window: self.parent,
            region: self.region(),
        })
    }
}

/// Sequential sampler of the projection DPP spanned by the Fourier modes
/// `exp(i ω·x)` on the torus `window`.
///
/// Point `j + 1` has density proportional to `n - |P_j v(x)|²`, where `v(x)`
/// collects the modes at `x` and `P_j` projects onto the span of the first
/// `j` residual vectors. Proposals are uniform with acceptance ratio
/// `(n - |P_j v(x)|²) / n`.
pub fn sample_projection<R: Rng + ?Sized>(
    omegas: &[[f64; 2]],
    window: &Window,
    rng: &mut R,
) -> Result<Vec<Point>> {
    let n = omegas.len();
    let dim = window.dim;
    let nf = n as f64;
    let mut points = Vec::with_capacity(n);
    let mut er = vec![0.0; n * n];
    let mut ei = vec![0.0; n * n];
    let mut vr = vec![0.0; n];
    let mut vi = vec![0.0; n];
    let mut cr = vec![0.0; n];
    let mut ci = vec![0.0; n];

    for j in 0..n {
        let mut tries: u64 = 0;
        let x = loop {
            tries += 1;
            if tries > REJECTION_CAP {
                return Err(Error::RejectionCap(REJECTION_CAP));
            }
            let mut x = [0.0; 2];
            for c in x.iter_mut().take(dim) {
                *c = window.side * rng.random::<f64>();
            }
            let u: f64 = rng.random();
            let limit = nf * (1.0 - u);
            for (a, w) in omegas.iter().enumerate() {
                let (s, c) = (w[0] * x[0] + w[1] * x[1]).sin_cos();
                vr[a] = c;
                vi[a] = s;
            }
            let mut proj = 0.0;
            let mut rejected = false;
            for r in 0..j {
                let row_r = &er[r * n..(r + 1) * n];
                let row_i = &ei[r * n..(r + 1) * n];
                let (mut re, mut im) = (0.0, 0.0);
                for a in 0..n {
                    re += row_r[a] * vr[a] + row_i[a] * vi[a];
                    im += row_r[a] * vi[a] - row_i[a] * vr[a];
                }
                cr[r] = re;
                ci[r] = im;
                proj += re * re + im * im;
                if proj >= limit {
                    rejected = true;
                    break;
                }
            }
            if !rejected {
                break x;
            }
        };
        points.push(x);
        if j + 1 == n {
            break;
        }
        // residual of v against the accepted rows, two Gram-Schmidt passes
        for pass in 0..2 {
            if pass == 1 {
                for r in 0..j {
                    let row_r = &er[r * n..(r + 1) * n];
                    let row_i = &ei[r * n..(r + 1) * n];
                    let (mut re, mut im) = (0.0, 0.0);
                    for a in 0..n {
                        re += row_r[a] * vr[a] + row_i[a] * vi[a];
                        im += row_r[a] * vi[a] - row_i[a] * vr[a];
                    }
                    cr[r] = re;
                    ci[r] = im;
                }
            }
            for r in 0..j {
                let (c_re, c_im) = (cr[r], ci[r]);
                for a in 0..n {
                    let (e_re, e_im) = (er[r * n + a], ei[r * n + a]);
                    vr[a] -= c_re * e_re - c_im * e_im;
                    vi[a] -= c_re * e_im + c_im * e_re;
                }
            }
        }
        let norm = vr.iter().chain(vi.iter()).map(|t| t * t).sum::<f64>().sqrt();
        if !(norm > 0.0) {
            return Err(Error::RejectionCap(tries));
        }
        for a in 0..n {
            er[j * n + a] = vr[a] / norm;
            ei[j * n + a] = vi[a] / norm;
        }
    }
    Ok(points)
}

/// Binned estimate of the pair correlation function from whole-torus
/// patterns: ordered pairs at torus distance in `[edges[b], edges[b+1])`
/// over the count expected for a Poisson pattern with the same number of
/// points.
pub fn pair_correlation_estimate(patterns: &[PointPattern], edges: &[f64]) -> Result<Vec<f64>> {
    if edges.len() < 2 || edges.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("bin edges must be strictly increasing"));
    }
    let first = patterns.first().ok_or(Error::EmptySample)?;
    let window = first.window;
    if window.boundary != Boundary::Torus {
        return Err(Error::invalid("pair correlation estimator needs torus patterns"));
    }
    let rmax = edges[edges.len() - 1];
    if rmax > window.side / 2.0 {
        return Err(Error::invalid("largest radius must not exceed half the window side"));
    }
    let bins = edges.len() - 1;
    let mut observed = vec![0.0; bins];
    let mut expected_pairs = 0.0;
    for pat in patterns {
        let n = pat.len() as f64;
        expected_pairs += n * (n - 1.0) / window.volume();
        for (i, p) in pat.points.iter().enumerate() {
            for q in &pat.points[i + 1..] {
                let r = window.distance_sq(p, q).sqrt();
                if r >= edges[0] && r < rmax {
                    let b = edges.partition_point(|&e| e <= r) - 1;
                    observed[b] += 2.0;
                }
            }
        }
    }
    let shell = |a: f64, b: f64| match window.dim {
        1 => 2.0 * (b - a),
        _ => PI * (b * b - a * a),
    };
    Ok((0..bins)
        .map(|b| observed[b] / (expected_pairs * shell(edges[b], edges[b + 1])))
        .collect())
}
