use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use unhinged::dynamics::TieRule;
use unhinged::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    #[default]
    Linear,
    Log,
}

/// `count` points from `start` to `stop` inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
    #[serde(default)]
    pub spacing: Spacing,
}

impl GridSpec {
    pub fn linear(start: f64, stop: f64, count: usize) -> Self {
        Self { start, stop, count, spacing: Spacing::Linear }
    }

    pub fn values(&self) -> Result<Vec<f64>> {
        if self.count < 2 {
            return Err(Error::InvalidConfig(format!("grid needs at least 2 points, got {}", self.count)));
        }
        if !(self.start.is_finite() && self.stop.is_finite() && self.start < self.stop) {
            return Err(Error::InvalidConfig(format!("grid bounds {} .. {}", self.start, self.stop)));
        }
        let n = (self.count - 1) as f64;
        let values = match self.spacing {
            Spacing::Linear => (0..self.count).map(|i| self.start + (self.stop - self.start) * i as f64 / n).collect(),
            Spacing::Log => {
                if self.start <= 0.0 {
                    return Err(Error::InvalidConfig("log grid needs a positive start".into()));
                }
                let (a, b) = (self.start.ln(), self.stop.ln());
                (0..self.count).map(|i| (a + (b - a) * i as f64 / n).exp()).collect::<Vec<_>>()
            }
        };
        Ok(values)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum DynamicsMode {
    Gd,
    Cd,
}

/// Experiment settings. Every field is optional; each experiment fills in
/// its own defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Option<String>,
    pub grid: Option<GridSpec>,
    pub loss: Option<String>,
    pub r: Option<f64>,
    pub eta: Option<f64>,
    /// Parameter of the built-in three-atom distribution.
    pub gamma: Option<f64>,
    /// Distribution CSV (`x1,...,xd,y,weight`) used instead of the built-in one.
    pub distribution: Option<PathBuf>,
    /// Sample CSV (`x1,...,xd,y` with an optional ignored `weight`) for dynamics.
    pub sample: Option<PathBuf>,
    /// `counterexample` or `tie`.
    pub builtin_sample: Option<String>,
    pub mode: Option<DynamicsMode>,
    pub v0: Option<Vec<f64>>,
    pub step: Option<f64>,
    pub iterations: Option<usize>,
    pub tie_rule: Option<TieRule>,
    pub x0: Option<Vec<f64>>,
    pub direction: Option<Vec<f64>>,
    pub lambdas: Option<Vec<f64>>,
    /// Number of random instances; zero or absent runs the single configured instance.
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn r(&self) -> Result<f64> {
        let r = self.r.unwrap_or(1.0);
        if r.is_finite() && r > 0.0 {
            Ok(r)
        } else {
            Err(Error::InvalidRadius(r))
        }
    }

    pub fn eta_or(&self, default: f64) -> Result<f64> {
        let eta = self.eta.unwrap_or(default);
        if eta > 0.0 && eta < 0.5 {
            Ok(eta)
        } else {
            Err(Error::InvalidNoiseRate(eta))
        }
    }

    pub fn gamma(&self) -> f64 {
        self.gamma.unwrap_or(0.05)
    }
}
