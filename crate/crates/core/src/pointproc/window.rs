use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Point;

/// How the box `[0, L]^d` is closed off.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// Periodic box; displacements use the minimum image.
    Torus,
    /// Points are simulated on a box enlarged by a padding and the field is
    /// only read inside `[0, L]^d`.
    Padded,
}

/// Observation window `[0, L]^d` for `d` in {1, 2}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub dim: usize,
    pub side: f64,
    pub boundary: Boundary,
}

impl Window {
    pub fn new(dim: usize, side: f64, boundary: Boundary) -> Result<Self> {
        let w = Self { dim, side, boundary };
        w.validate()?;
        Ok(w)
    }

    pub fn torus(dim: usize, side: f64) -> Result<Self> {
        Self::new(dim, side, Boundary::Torus)
    }

    pub fn padded(dim: usize, side: f64) -> Result<Self> {
        Self::new(dim, side, Boundary::Padded)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dim == 1 || self.dim == 2) {
            return Err(Error::invalid(format!("dimension must be 1 or 2, got {}", self.dim)));
        }
        if !(self.side > 0.0 && self.side.is_finite()) {
            return Err(Error::invalid(format!("window side must be positive, got {}", self.side)));
        }
        Ok(())
    }

    pub fn volume(&self) -> f64 {
        self.side.powi(self.dim as i32)
    }

    /// Displacement `a - b`, wrapped to the minimum image on the torus.
    #[inline]
    pub fn displacement(&self, a: &Point, b: &Point) -> Point {
        let mut d = [0.0; 2];
        for i in 0..self.dim {
            let mut x = a[i] - b[i];
            if self.boundary == Boundary::Torus {
                x -= self.side * (x / self.side).round();
            }
            d[i] = x;
        }
        d
    }

    #[inline]
    pub fn distance_sq(&self, a: &Point, b: &Point) -> f64 {
        let d = self.displacement(a, b);
        d[0] * d[0] + d[1] * d[1]
    }

    /// Whether `z` lies in the closed box `[0, L]^d`.
    pub fn contains(&self, z: &Point) -> bool {
        (0..self.dim).all(|i| z[i] >= 0.0 && z[i] <= self.side) && (self.dim == 2 || z[1] == 0.0)
    }
}

/// Axis-aligned box `[lower, upper]` holding the points of a pattern.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub lower: Point,
    pub upper: Point,
}

impl Region {
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Self {
        let mut lower = [0.0; 2];
        let mut upper = [0.0; 2];
        for i in 0..dim {
            lower[i] = lo;
            upper[i] = hi;
        }
        Self { lower, upper }
    }

    pub fn volume(&self, dim: usize) -> f64 {
        (0..dim).map(|i| self.upper[i] - self.lower[i]).product()
    }

    pub fn contains(&self, dim: usize, p: &Point) -> bool {
        (0..dim).all(|i| p[i] >= self.lower[i] && p[i] <= self.upper[i])
    }
}

/// A finite realization of a point process.
#[derive(Debug, Clone, PartialEq)]
pub struct PointPattern {
    pub points: Vec<Point>,
    /// Intensity of the process that generated the pattern.
    pub intensity: f64,
    pub window: Window,
    /// Where the points were simulated. Equals the window for torus
    /// patterns, the padded box for padded ones, and a sub-box for patches.
    pub region: Region,
}

impl PointPattern {
    pub fn empty(intensity: f64, window: Window) -> Self {
        Self {
            points: Vec::new(),
            intensity,
            window,
            region: Region::cube(window.dim, 0.0, window.side),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// One point per row, columns `x` (and `y` in two dimensions).
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        if self.window.dim == 1 {
            writeln!(out, "x")?;
            for p in &self.points {
                writeln!(out, "{}", p[0])?;
            }
        } else {
            writeln!(out, "x,y")?;
            for p in &self.points {
                writeln!(out, "{},{}", p[0], p[1])?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn torus_displacement_takes_minimum_image() {
        let w = Window::torus(2, 10.0).unwrap();
        let d = w.displacement(&[9.5, 0.5], &[0.5, 9.0]);
        assert!((d[0] + 1.0).abs() < 1e-12);
        assert!((d[1] - 1.5).abs() < 1e-12);
        let p = Window::padded(2, 10.0).unwrap();
        let d = p.displacement(&[9.5, 0.5], &[0.5, 9.0]);
        assert_eq!(d, [9.0, -8.5]);
    }

    #[test]
    fn rejects_bad_windows() {
        assert!(Window::torus(3, 1.0).is_err());
        assert!(Window::torus(1, 0.0).is_err());
        assert!(Window::padded(0, 1.0).is_err());
    }

    #[test]
    fn csv_columns_follow_dimension() {
        let mut pat = PointPattern::empty(1.0, Window::torus(2, 1.0).unwrap());
        pat.points.push([0.25, 0.5]);
        let mut buf = Vec::new();
        pat.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "x,y\n0.25,0.5\n");
    }
}
