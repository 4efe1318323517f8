use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::amplitudes::AmplitudeLaw;
use crate::error::{Error, Result};
use crate::pointproc::{Boundary, Window};
use crate::shotnoise::{FddQuery, ResponseFn, ResponseShape};
use crate::stats::CF_GRID;
use crate::Point;

/// Point process driving the field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProcessSpec {
    Poisson,
    Dpp { epsilon: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowSpec {
    pub dim: usize,
    pub side: f64,
    /// Defaults to padded for Poisson and torus for DPP.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary: Option<Boundary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuerySpec {
    /// One coordinate list of length `dim` per position.
    pub positions: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

/// Which Laplace transform the Monte Carlo estimate targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LaplaceTarget {
    /// `E[exp(-Σ s_j I(z_j))]`
    Raw,
    /// `E[exp(-Σ s_j Ĩ(z_j))]`
    Centered,
}

/// Checks evaluated on a finished sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Assertion {
    /// Relative gap between empirical and limit variance decreases strictly
    /// along the intensity grid.
    VarianceGapDecreasing,
    /// Relative variance gap below 5% at the largest intensity.
    VarianceGapFinal,
    /// KS p-value above the level at the largest intensity.
    KsFinal,
    /// CF sup-distance decreases strictly along the intensity grid.
    CfDecreasing,
    /// CF sup-distance below the threshold at the largest intensity.
    CfFinal,
    /// Fitted stable scale within 10% of the limit at the largest intensity.
    SigmaFitFinal,
    /// Monte Carlo Laplace transform within 3 SE of the oracle at every
    /// intensity.
    LaplaceOracle,
    /// Fredholm values under grid doubling within `1e-4` relative.
    FredholmSelfConvergence,
}

fn default_cf_grid() -> Vec<f64> {
    CF_GRID.to_vec()
}

fn default_ks_level() -> f64 {
    0.01
}

fn default_order() -> usize {
    4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestSettings {
    #[serde(default = "default_cf_grid")]
    pub cf_grid: Vec<f64>,
    #[serde(default = "default_ks_level")]
    pub ks_level: f64,
    /// Overrides `max(0.03, 5 / √N)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cf_threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub laplace: Option<LaplaceTarget>,
    /// Gauss–Legendre nodes per panel for the Fredholm oracle.
    #[serde(default = "default_order")]
    pub fredholm_order: usize,
    #[serde(default)]
    pub assertions: Vec<Assertion>,
}

impl Default for TestSettings {
    fn default() -> Self {
        Self {
            cf_grid: default_cf_grid(),
            ks_level: default_ks_level(),
            cf_threshold: None,
            laplace: None,
            fredholm_order: default_order(),
            assertions: Vec::new(),
        }
    }
}

/// One experiment: a process, marks, response, window, query and a grid
/// of intensities, each simulated `replicates` times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub seed: u64,
    pub replicates: usize,
    pub lambdas: Vec<f64>,
    pub process: ProcessSpec,
    pub amplitudes: AmplitudeLaw,
    pub response: ResponseShape,
    pub window: WindowSpec,
    pub query: QuerySpec,
    #[serde(default)]
    pub tests: TestSettings,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::from(e).context(path.display().to_string()))?;
        Self::from_toml_str(&text).map_err(|e| e.context(path.display().to_string()))
    }

    pub fn boundary(&self) -> Boundary {
        self.window.boundary.unwrap_or(match self.process {
            ProcessSpec::Poisson => Boundary::Padded,
            ProcessSpec::Dpp { .. } => Boundary::Torus,
        })
    }

    pub fn window(&self) -> Result<Window> {
        Window::new(self.window.dim, self.window.side, self.boundary())
    }

    pub fn response_fn(&self) -> Result<ResponseFn> {
        ResponseFn::new(self.response, self.window.dim)
    }

    pub fn fdd_query(&self) -> Result<FddQuery> {
        let dim = self.window.dim;
        let mut positions = Vec::with_capacity(self.query.positions.len());
        for p in &self.query.positions {
            if p.len() != dim {
                return Err(Error::Config(format!(
                    "position {p:?} has {} coordinates, window has dimension {dim}",
                    p.len()
                )));
            }
            let mut z: Point = [0.0; 2];
            z[..dim].copy_from_slice(p);
            positions.push(z);
        }
        FddQuery::new(positions, self.query.weights.clone())
    }

    pub fn validate(&self) -> Result<()> {
        let cfg_err = |msg: String| Err(Error::Config(msg));
        if self.replicates < 100 {
            return cfg_err(format!("at least 100 replicates required, got {}", self.replicates));
        }
        if self.lambdas.is_empty() {
            return cfg_err("intensity grid is empty".into());
        }
        if self.lambdas.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
            return cfg_err("intensities must be positive".into());
        }
        if self.lambdas.windows(2).any(|w| !(w[1] > w[0])) {
            return cfg_err("intensity grid must be strictly increasing".into());
        }
        if self.tests.cf_grid.is_empty() {
            return cfg_err("CF grid is empty".into());
        }
        if !(self.tests.ks_level > 0.0 && self.tests.ks_level < 1.0) {
            return cfg_err("KS level must lie in (0, 1)".into());
        }
        if self.tests.fredholm_order == 0 {
            return cfg_err("Fredholm order must be positive".into());
        }
        if let ProcessSpec::Dpp { epsilon } = self.process {
            if !(epsilon >= 0.0) {
                return cfg_err("repulsion exponent must be nonnegative".into());
            }
            if self.boundary() != Boundary::Torus {
                return cfg_err("DPP experiments need a torus window".into());
            }
        }
        if self.tests.assertions.contains(&Assertion::FredholmSelfConvergence)
            && !matches!(self.process, ProcessSpec::Dpp { .. })
        {
            return cfg_err("Fredholm assertions need a DPP process".into());
        }
        self.amplitudes.validate().map_err(|e| e.context("amplitudes"))?;
        let window = self.window()?;
        let response = self.response_fn()?;
        let query = self.fdd_query()?;
        query.validate_in(&window, &response)?;
        if window.boundary == Boundary::Torus && window.side < 10.0 * response.radius {
            return cfg_err(format!(
                "torus side {} is below 10 response radii ({})",
                window.side, response.radius
            ));
        }
        Ok(())
    }
}
