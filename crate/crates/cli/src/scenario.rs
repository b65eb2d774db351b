use std::path::Path;

use ruinkit::claims::ModelParams;
use ruinkit::mechanisms::Mechanism;
use ruinkit::simulate::SimConfig;
use serde::{Deserialize, Serialize};

use crate::CliError;

fn default_n_conditional() -> usize {
    10_000
}

/// Output knobs for the tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    /// Deficit levels for `overshoot`; defaults to `0, 0.5μ, ..., 5μ`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_grid: Option<Vec<f64>>,
    /// Conditional deficit samples wanted by `overshoot`.
    #[serde(default = "default_n_conditional")]
    pub n_conditional: usize,
}

impl Default for Outputs {
    fn default() -> Self {
        Self {
            x_grid: None,
            n_conditional: default_n_conditional(),
        }
    }
}

/// A scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub model: ModelParams,
    pub mechanism: Mechanism,
    pub u_grid: Vec<f64>,
    pub sim: SimConfig,
    #[serde(default)]
    pub outputs: Outputs,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let s: Scenario = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.u_grid.is_empty() {
            return Err(CliError::Config("u_grid must not be empty".into()));
        }
        if self.u_grid.iter().any(|u| !(*u >= 0.0 && u.is_finite())) {
            return Err(CliError::Config("u_grid entries must be finite and >= 0".into()));
        }
        if self.u_grid.windows(2).any(|w| w[1] < w[0]) {
            return Err(CliError::Config("u_grid must be sorted ascending".into()));
        }
        if let Some(xs) = &self.outputs.x_grid {
            if xs.is_empty() || xs.iter().any(|x| !(*x >= 0.0 && x.is_finite())) {
                return Err(CliError::Config("x_grid must be non-empty with finite entries >= 0".into()));
            }
        }
        self.mechanism.validate().map_err(|e| CliError::Config(e.to_string()))?;
        self.sim.validate().map_err(|e| CliError::Config(e.to_string()))
    }

    /// Applies `--seed` and `--paths`.
    pub fn with_overrides(mut self, seed: Option<u64>, paths: Option<u64>) -> Result<Self, CliError> {
        if let Some(seed) = seed {
            self.sim.seed = seed;
        }
        if let Some(n) = paths {
            self.sim.n_paths = n;
        }
        self.validate()?;
        Ok(self)
    }

    pub fn x_grid(&self) -> Vec<f64> {
        match &self.outputs.x_grid {
            Some(xs) => xs.clone(),
            None => {
                let mu = self.model.claims().mean();
                (0..=10).map(|i| 0.5 * i as f64 * mu).collect()
            }
        }
    }
}
