use rand::Rng;
use rand_distr::{Distribution, Poisson};

use super::window::{Boundary, PointPattern, Region, Window};
use crate::error::{Error, Result};

/// Homogeneous Poisson process of intensity `intensity` on the window.
///
/// Torus windows are filled exactly. Padded windows are filled on the
/// enlarged box `[-pad, L + pad]^d`, so a field read inside `[0, L]^d` sees
/// every point within `pad` of it.
pub fn sample_poisson<R: Rng + ?Sized>(
    intensity: f64,
    window: &Window,
    pad: f64,
    rng: &mut R,
) -> Result<PointPattern> {
    if !(intensity >= 0.0 && intensity.is_finite()) {
        return Err(Error::invalid(format!("intensity must be nonnegative, got {intensity}")));
    }
    let region = match window.boundary {
        Boundary::Torus => Region::cube(window.dim, 0.0, window.side),
        Boundary::Padded => {
            if pad < 0.0 {
                return Err(Error::invalid("padding must be nonnegative"));
            }
            Region::cube(window.dim, -pad, window.side + pad)
        }
    };
    let mean = intensity * region.volume(window.dim);
    let count = if mean > 0.0 {
        Poisson::new(mean)
            .map_err(|e| Error::invalid(format!("Poisson mean {mean}: {e}")))?
            .sample(rng) as usize
    } else {
        0
    };
    let mut points = Vec::with_capacity(count);
    for _ in 0..count {
        let mut p = [0.0; 2];
        for (i, c) in p.iter_mut().enumerate().take(window.dim) {
            *c = region.lower[i] + (region.upper[i] - region.lower[i]) * rng.random::<f64>();
        }
        points.push(p);
    }
    Ok(PointPattern {
        points,
        intensity,
        window: *window,
        region,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use statrs::distribution::{ChiSquared, ContinuousCDF, Discrete, Poisson as PoissonPmf};

    #[test]
    fn zero_intensity_gives_empty_pattern() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let w = Window::torus(2, 1.0).unwrap();
        assert!(sample_poisson(0.0, &w, 0.0, &mut rng).unwrap().is_empty());
    }

    #[test]
    fn points_stay_in_padded_region() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let w = Window::padded(2, 1.0).unwrap();
        let pat = sample_poisson(200.0, &w, 0.5, &mut rng).unwrap();
        assert!(pat.points.iter().all(|p| pat.region.contains(2, p)));
        assert!(pat.points.iter().any(|p| p[0] < 0.0 || p[0] > 1.0));
    }

    #[test]
    fn count_mean_variance_and_chi_square() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let w = Window::torus(2, 1.0).unwrap();
        let reps = 10_000;
        let counts: Vec<usize> = (0..reps)
            .map(|_| sample_poisson(50.0, &w, 0.0, &mut rng).unwrap().len())
            .collect();
        let mean = counts.iter().sum::<usize>() as f64 / reps as f64;
        let var = counts.iter().map(|&c| (c as f64 - mean).powi(2)).sum::<f64>() / (reps as f64 - 1.0);
        let se = (50.0f64 / reps as f64).sqrt();
        assert!((mean - 50.0).abs() < 5.0 * se, "mean {mean}");
        // variance of the sample variance for Poisson(50): (mu4 - s^4(n-3)/(n-1))/n
        let var_se = ((50.0 + 3.0 * 2500.0 - 2500.0) / reps as f64).sqrt();
        assert!((var - 50.0).abs() < 5.0 * var_se, "variance {var}");

        // chi-square goodness of fit on bins 35..=65 plus two tails
        let pmf = PoissonPmf::new(50.0).unwrap();
        let mut observed = vec![0usize; 33];
        for &c in &counts {
            let bin = if c < 35 { 0 } else if c > 65 { 32 } else { c - 34 };
            observed[bin] += 1;
        }
        let mut expected = vec![0.0; 33];
        for k in 0..300u64 {
            let bin = if k < 35 { 0 } else if k > 65 { 32 } else { k as usize - 34 };
            expected[bin] += pmf.pmf(k) * reps as f64;
        }
        let stat: f64 = observed
            .iter()
            .zip(&expected)
            .map(|(&o, &e)| (o as f64 - e).powi(2) / e)
            .sum();
        let p = 1.0 - ChiSquared::new(32.0).unwrap().cdf(stat);
        assert!(p > 0.01, "chi-square p = {p}");
    }
}
