//! Experiment configuration: a flat, human-editable TOML file with an
//! explicit schema version. Only the output directory and the thread count
//! may be overridden from outside the file, so that `(config, seed)`
//! determines every emitted number.

use pssmp_core::levy_model::LevySpec;
use pssmp_core::{Error, Result};
use serde::Deserialize;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

pub const SCHEMA_VERSION: u32 = 1;

fn default_x0() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct OpParams {
    /// Evaluation time (resolvent discount, entrance time, exit window).
    pub t: Option<f64>,
    pub t_list: Option<Vec<f64>>,
    /// Resolvent rate.
    pub q: Option<f64>,
    /// Bounded test function id (one | exp-neg | ratio | window).
    pub f: Option<String>,
    /// Exit functional id (one | end-start-ratio | deep | end-above).
    pub functional: Option<String>,
    /// Scaling factor for scaling checks.
    pub c: Option<f64>,
    /// Ladder clock exponent; defaults to alpha.
    pub beta: Option<f64>,
    pub lambda_list: Option<Vec<f64>>,
    /// Calibration repeats for stats-calibrate.
    pub repeats: Option<u64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    /// Optional op id; must agree with the subcommand when both are given.
    pub op: Option<String>,
    pub levy: LevySpec,
    pub alpha: f64,
    #[serde(default = "default_x0")]
    pub x0: f64,
    pub horizon: f64,
    pub dt: f64,
    pub n_paths: u64,
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub eps_ladder: Vec<f64>,
    #[serde(default)]
    pub params: OpParams,
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::ConfigError(format!("{}: {e}", path.display())))?;
        let cfg: ExperimentConfig =
            toml::from_str(&text).map_err(|e| Error::ConfigError(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::ConfigError(format!(
                "schema_version {} unsupported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        self.levy.validate().map_err(|e| Error::ConfigError(e.to_string()))?;
        if self.alpha == 0.0 {
            return Err(Error::ConfigError("alpha must be nonzero".into()));
        }
        if !(self.x0 > 0.0) {
            return Err(Error::ConfigError("x0 must be positive".into()));
        }
        if !(self.dt > 0.0) || !(self.horizon >= self.dt) {
            return Err(Error::ConfigError("need 0 < dt <= horizon".into()));
        }
        if self.n_paths == 0 {
            return Err(Error::ConfigError("n_paths must be positive".into()));
        }
        for e in &self.eps_ladder {
            if !(*e > 0.0) {
                return Err(Error::ConfigError("eps ladder entries must be positive".into()));
            }
        }
        Ok(())
    }

    /// The dyadic default when no ladder is configured.
    pub fn eps_ladder_or_default(&self) -> Vec<f64> {
        if self.eps_ladder.is_empty() {
            (3..=8).map(|k| 2f64.powi(-k)).collect()
        } else {
            self.eps_ladder.clone()
        }
    }
}
