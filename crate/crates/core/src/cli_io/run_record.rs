//! JSON record of a simulation run.

use serde::{Deserialize, Serialize};

use super::{check_format_version, CliError, Config, FORMAT_VERSION};
use crate::pipe_sim::{BenchmarkSummary, TrialResult, RNG_ALGORITHM};

pub fn artifact_version() -> String {
    format!("pipenav-{}", env!("CARGO_PKG_VERSION"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub format_version: String,
    pub artifact_version: String,
    pub command: String,
    pub rng: String,
    pub seed: u64,
    /// Fully resolved configuration, overrides applied.
    pub config: Config,
    pub summary: BenchmarkSummary,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<Vec<TrialResult>>,
    /// Only recorded on request, since it breaks byte-identical output.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_clock_s: Option<f64>,
}

impl RunRecord {
    pub fn new(command: &str, config: Config, summary: BenchmarkSummary) -> Self {
        Self {
            format_version: FORMAT_VERSION.to_string(),
            artifact_version: artifact_version(),
            command: command.to_string(),
            rng: RNG_ALGORITHM.to_string(),
            seed: config.sim.seed,
            config,
            summary,
            trials: None,
            wall_clock_s: None,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("run record serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        // Check the version before the full schema so a newer file gets a
        // version error rather than a field error.
        #[derive(Deserialize)]
        struct Probe {
            format_version: String,
        }
        let probe: Probe = serde_json::from_str(text)
            .map_err(|e| CliError::Validation(format!("run record: {e}")))?;
        check_format_version(&probe.format_version, "run record")?;
        serde_json::from_str(text).map_err(|e| CliError::Validation(format!("run record: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipe_sim::run_benchmark;

    fn small_record(per_trial: bool) -> RunRecord {
        let mut cfg = Config::default();
        cfg.sim.trials = 3;
        let res = run_benchmark(&cfg.sim, &cfg.nav_stack()).unwrap();
        let mut rec = RunRecord::new("simulate", cfg, res.summary);
        if per_trial {
            rec.trials = Some(res.trials);
        }
        rec
    }

    #[test]
    fn round_trip_is_exact() {
        for per_trial in [false, true] {
            let rec = small_record(per_trial);
            let back = RunRecord::from_json(&rec.to_json()).unwrap();
            assert_eq!(back, rec);
            assert_eq!(back.to_json(), rec.to_json());
        }
    }

    #[test]
    fn embedded_config_reproduces_aggregates() {
        let rec = small_record(false);
        let again = run_benchmark(&rec.config.sim, &rec.config.nav_stack()).unwrap();
        assert_eq!(again.summary, rec.summary);
    }

    #[test]
    fn newer_major_is_rejected() {
        let text = small_record(false).to_json().replacen("\"1.0\"", "\"2.0\"", 1);
        let err = RunRecord::from_json(&text).unwrap_err();
        assert!(err.to_string().contains("unsupported format_version 2.0"));
    }
}
