//! Experiment configuration: a strict TOML schema, command-line overrides,
//! and the canonical hash recorded in the run manifest.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

use crate::CliError;

/// One experiment, as read from `--config`. Every field is optional; the
/// command-line flags override whatever the file sets, and per-command
/// defaults fill the rest. Unknown keys are rejected.
#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Experiment id; must match the invoked subcommand when present.
    pub experiment: Option<String>,
    pub seed: Option<u64>,
    pub paths: Option<u64>,
    /// Time steps per path; defaults scale with the horizon.
    pub grid: Option<usize>,
    /// Worker threads, 0 meaning all cores.
    pub threads: Option<usize>,
    /// Horizon list (the `--T` flag).
    pub horizons: Option<Vec<f64>>,
    pub out: Option<PathBuf>,
    /// Basis modes for truncated-dual and limit sampling.
    pub modes: Option<usize>,
    /// Oscillation frequencies for the law-of-large-numbers probe.
    pub lambdas: Option<Vec<f64>>,
    /// Coupling start angle.
    pub u0: Option<f64>,
    /// Circle topology for the angle component.
    pub circle: Option<bool>,
    /// Catalog test function name.
    pub function: Option<String>,
    /// Tail thresholds.
    pub thresholds: Option<Vec<f64>>,
    /// Negative-moment exponent.
    pub alpha: Option<f64>,
    /// Acceptance width in standard errors for declared checks.
    pub tolerance_sigma: Option<f64>,
    /// Central finite-difference step.
    pub fd_step: Option<f64>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let cfg: ExperimentConfig = toml::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let positive = |name: &str, v: Option<f64>| match v {
            Some(x) if !(x.is_finite() && x > 0.0) => {
                Err(CliError::Config(format!("{name}: must be positive and finite, got {x}")))
            }
            _ => Ok(()),
        };
        if let Some(p) = self.paths {
            if p == 0 {
                return Err(CliError::Config("paths: must be at least 1".into()));
            }
        }
        if let Some(g) = self.grid {
            if g < 2 {
                return Err(CliError::Config(format!("grid: needs at least 2 steps, got {g}")));
            }
        }
        for (name, list) in [("horizons", &self.horizons), ("lambdas", &self.lambdas)] {
            if let Some(values) = list {
                if values.is_empty() {
                    return Err(CliError::Config(format!("{name}: must be nonempty")));
                }
                for &v in values {
                    positive(name, Some(v))?;
                }
            }
        }
        positive("u0", self.u0)?;
        positive("fd_step", self.fd_step)?;
        positive("tolerance_sigma", self.tolerance_sigma)?;
        if let Some(alpha) = self.alpha {
            if !(alpha > 0.0 && alpha < 1.0) {
                return Err(CliError::Config(format!("alpha: must lie in (0, 1), got {alpha}")));
            }
        }
        if let Some(name) = &self.function {
            if kbm_core::TestFunction::from_name(name).is_none() {
                return Err(CliError::Config(format!("function: unknown catalog name {name:?}")));
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical TOML serialization; identical resolved
    /// configs hash identically regardless of key order in the source file.
    pub fn sha256(&self) -> String {
        let canonical = toml::to_string(self).expect("config serializes");
        let mut hasher = Sha256::new();
        hasher.update(canonical.as_bytes());
        format!("{:x}", hasher.finalize())
    }
}
