//! TOML configuration with one section per module.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{check_format_version, read_text, CliError, FORMAT_VERSION};
use crate::control::ControlGains;
use crate::filtering::DEFAULT_PROCESS_NOISE;
use crate::pipe_sim::{CorpusSpec, NavStack, SimConfig};
use crate::sonar_dsp::DspParams;
use crate::uncertainty::CovarianceModel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilteringConfig {
    /// Process noise of the per-ping range smoother, m² per step.
    pub range_process_noise: f64,
    /// Measurement variance assumed for a detected range, m².
    pub range_meas_var: f64,
    /// Diagonal process noise of the center filter, m² per step.
    pub center_process_noise: f64,
}

impl Default for FilteringConfig {
    fn default() -> Self {
        Self {
            range_process_noise: DEFAULT_PROCESS_NOISE,
            range_meas_var: 1e-3,
            center_process_noise: DEFAULT_PROCESS_NOISE,
        }
    }
}

impl FilteringConfig {
    pub fn violations(&self, path: &str) -> Vec<(String, String)> {
        let mut v = Vec::new();
        let nonneg = |x: f64| x >= 0.0 && x.is_finite();
        if !nonneg(self.range_process_noise) {
            v.push((format!("{path}.range_process_noise"), "must be >= 0".into()));
        }
        if !(self.range_meas_var > 0.0 && self.range_meas_var.is_finite()) {
            v.push((format!("{path}.range_meas_var"), "must be > 0".into()));
        }
        if !nonneg(self.center_process_noise) {
            v.push((format!("{path}.center_process_noise"), "must be >= 0".into()));
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub format_version: String,
    pub dsp: DspParams,
    pub filtering: FilteringConfig,
    pub covariance: CovarianceModel,
    pub gains: ControlGains,
    pub sim: SimConfig,
    pub corpus: CorpusSpec,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            format_version: FORMAT_VERSION.to_string(),
            dsp: DspParams::default(),
            filtering: FilteringConfig::default(),
            covariance: CovarianceModel::default(),
            gains: ControlGains::default(),
            sim: SimConfig::default(),
            corpus: CorpusSpec::default(),
        }
    }
}

impl Config {
    pub fn from_toml(text: &str, origin: &str) -> Result<Self, CliError> {
        let cfg: Config =
            toml::from_str(text).map_err(|e| CliError::Validation(format!("{origin}: {e}")))?;
        check_format_version(&cfg.format_version, origin)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        Self::from_toml(&read_text(path)?, &path.display().to_string())
    }

    /// Loads `path` when given, built-in defaults otherwise.
    pub fn load_or_default(path: Option<&Path>) -> Result<Self, CliError> {
        path.map_or_else(|| Ok(Self::default()), Self::load)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes to TOML")
    }

    /// Every violated invariant with its field path.
    pub fn violations(&self) -> Vec<(String, String)> {
        let mut v = self.dsp.violations("dsp");
        v.extend(self.filtering.violations("filtering"));
        v.extend(self.covariance.x.violations("covariance.x"));
        v.extend(self.covariance.z.violations("covariance.z"));
        v.extend(self.gains.violations("gains"));
        v.extend(self.sim.violations("sim"));
        v.extend(
            self.corpus
                .violations()
                .into_iter()
                .map(|(k, m)| (format!("corpus.{k}"), m)),
        );
        v
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(CliError::violations("config", &v))
        }
    }

    pub fn nav_stack(&self) -> NavStack {
        NavStack {
            dsp: self.dsp.clone(),
            covariance: self.covariance,
            gains: self.gains.clone(),
            center_process_noise: self.filtering.center_process_noise,
        }
    }
}
