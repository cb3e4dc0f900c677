//! Command drivers. Each returns a human-readable report plus any threshold
//! failures; the binary decides how to print them and which exit code to use.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use super::profile_log::version_line;
use super::{read_profile_log, read_text, write_atomic, write_profile_log, CliError, Config, ProfileRecord, RunRecord};
use crate::filtering::ScalarKalman;
use crate::pipe_sim::{generate_corpus, run_benchmark, BenchmarkSummary, MeasurementMode};
use crate::sonar_dsp::{detect_range, extract_range};

/// Ceiling on the mean number of steps to converge in `benchmark`.
pub const BENCHMARK_MAX_MEAN_STEPS: f64 = 15.0;
/// Ceiling on the mean steady-state error in `benchmark`, meters.
pub const BENCHMARK_MAX_MEAN_SSE_M: f64 = 0.04;

#[derive(Debug, Clone, Default)]
pub struct CommandOutput {
    pub report: String,
    pub warnings: Vec<String>,
    pub threshold_failures: Vec<String>,
}

impl CommandOutput {
    pub fn into_result(self) -> Result<Self, CliError> {
        if self.threshold_failures.is_empty() {
            Ok(self)
        } else {
            Err(CliError::Threshold(self.threshold_failures.join("; ")))
        }
    }
}

/// Simulation fields settable from the command line.
#[derive(Debug, Clone, Default)]
pub struct SimOverrides {
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub noise_half_width_m: Option<f64>,
    pub sweeps: Option<usize>,
    pub pipe_radius_m: Option<f64>,
    pub azimuth_step_deg: Option<f64>,
    pub mode: Option<MeasurementMode>,
}

impl SimOverrides {
    pub fn apply(&self, cfg: &mut Config) {
        let s = &mut cfg.sim;
        if let Some(v) = self.trials {
            s.trials = v;
        }
        if let Some(v) = self.seed {
            s.seed = v;
        }
        if let Some(v) = self.noise_half_width_m {
            s.noise_half_width_m = v;
        }
        if let Some(v) = self.sweeps {
            s.sweeps = v;
        }
        if let Some(v) = self.pipe_radius_m {
            s.pipe_radius_m = v;
        }
        if let Some(v) = self.azimuth_step_deg {
            s.azimuth_step_deg = v;
        }
        if let Some(v) = self.mode {
            s.mode = v;
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct SimulateArgs {
    pub config: Option<PathBuf>,
    pub overrides: SimOverrides,
    pub out: Option<PathBuf>,
    pub per_trial: bool,
    pub timing: bool,
}

pub fn resolve_sim_config(args: &SimulateArgs) -> Result<Config, CliError> {
    let mut cfg = Config::load_or_default(args.config.as_deref())?;
    args.overrides.apply(&mut cfg);
    cfg.validate()?;
    Ok(cfg)
}

fn run_sim(command: &str, args: &SimulateArgs) -> Result<(RunRecord, CommandOutput), CliError> {
    let cfg = resolve_sim_config(args)?;
    let started = Instant::now();
    let res = run_benchmark(&cfg.sim, &cfg.nav_stack()).map_err(|e| CliError::Validation(e.to_string()))?;
    let elapsed = started.elapsed().as_secs_f64();

    let mut record = RunRecord::new(command, cfg, res.summary);
    if args.per_trial {
        record.trials = Some(res.trials);
    }
    if args.timing {
        record.wall_clock_s = Some(elapsed);
    }
    if let Some(out) = &args.out {
        write_atomic(out, record.to_json().as_bytes())?;
    }
    let mut output = CommandOutput {
        report: summary_table(&record.summary, record.seed),
        ..CommandOutput::default()
    };
    if args.timing {
        let _ = writeln!(output.report, "wall clock          {elapsed:.3} s");
    }
    Ok((record, output))
}

pub fn summary_table(s: &BenchmarkSummary, seed: u64) -> String {
    let mut t = String::new();
    let fmt = |x: Option<f64>, prec: usize| x.map_or("n/a".to_string(), |v| format!("{v:.prec$}"));
    let _ = writeln!(t, "trials              {} (seed {seed})", s.trials);
    let _ = writeln!(t, "converged           {}", s.converged);
    let _ = writeln!(t, "never converged     {}", s.never_converged);
    let _ = writeln!(t, "pipe exits          {}", s.failures);
    let steps = s.steps_to_converge;
    let _ = writeln!(
        t,
        "steps to converge   mean {}  median {}  std {}",
        fmt(steps.map(|x| x.mean), 2),
        fmt(steps.map(|x| x.median), 1),
        fmt(steps.map(|x| x.std), 2)
    );
    let sse = s.steady_state_error_m;
    let _ = writeln!(
        t,
        "steady-state error  mean {} m  median {} m  std {} m",
        fmt(sse.map(|x| x.mean), 4),
        fmt(sse.map(|x| x.median), 4),
        fmt(sse.map(|x| x.std), 4)
    );
    t
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<(RunRecord, CommandOutput), CliError> {
    run_sim("simulate", args)
}

/// `simulate` plus a check of the benchmark thresholds.
pub fn cmd_benchmark(args: &SimulateArgs) -> Result<(RunRecord, CommandOutput), CliError> {
    let (record, mut output) = run_sim("benchmark", args)?;
    let s = &record.summary;
    match s.steps_to_converge {
        Some(st) if st.mean <= BENCHMARK_MAX_MEAN_STEPS => {}
        Some(st) => output.threshold_failures.push(format!(
            "mean steps to converge {:.2} > {BENCHMARK_MAX_MEAN_STEPS}",
            st.mean
        )),
        None => output.threshold_failures.push("no trial converged".into()),
    }
    if let Some(e) = s.steady_state_error_m {
        if e.mean > BENCHMARK_MAX_MEAN_SSE_M {
            output.threshold_failures.push(format!(
                "mean steady-state error {:.4} m > {BENCHMARK_MAX_MEAN_SSE_M} m",
                e.mean
            ));
        }
    }
    if s.failures > 0 {
        output.threshold_failures.push(format!("{} trials left the pipe", s.failures));
    }
    if s.never_converged > 0 {
        output
            .threshold_failures
            .push(format!("{} trials never converged", s.never_converged));
    }
    Ok((record, output))
}

#[derive(Debug, Clone, Default)]
pub struct ProcessArgs {
    pub log: PathBuf,
    pub config: Option<PathBuf>,
    pub out: PathBuf,
    /// Run the scalar range smoother across consecutive pings.
    pub smooth: bool,
    pub max_rmse_m: Option<f64>,
    pub min_detection_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ProcessSummary {
    pub processed: usize,
    pub malformed: usize,
    pub detected: usize,
    /// Detected pings that carry a label.
    pub scored: usize,
    /// RMSE of the unsmoothed ranges against the labels.
    pub rmse_m: Option<f64>,
    /// RMSE in units of the mean bin width of the scored pings.
    pub rmse_bins: Option<f64>,
}

impl ProcessSummary {
    pub fn detection_rate(&self) -> Option<f64> {
        (self.processed > 0).then(|| self.detected as f64 / self.processed as f64)
    }
}

pub fn cmd_process_profiles(args: &ProcessArgs) -> Result<(ProcessSummary, CommandOutput), CliError> {
    let cfg = Config::load_or_default(args.config.as_deref())?;
    cfg.validate()?;
    let log = read_profile_log(&read_text(&args.log)?)?;
    let mut output = CommandOutput::default();
    if log.empty_input || log.records.is_empty() {
        output.warnings.push(format!("{}: no profiles in log", args.log.display()));
    }
    for m in &log.malformed {
        output
            .warnings
            .push(format!("{}:{}: skipped: {}", args.log.display(), m.line, m.reason));
    }

    let mut filter = ScalarKalman::new(cfg.filtering.range_process_noise, cfg.filtering.range_meas_var);
    let mut w = csv::Writer::from_writer(Vec::new());
    let io_err = |e: csv::Error| CliError::io(&args.out, e);
    w.write_record([
        "timestamp_s",
        "azimuth_deg",
        "detected",
        "range_m",
        "raw_range_m",
        "source_bin",
        "label_range_m",
    ])
    .map_err(io_err)?;

    let mut summary = ProcessSummary {
        processed: log.records.len(),
        malformed: log.malformed.len(),
        ..ProcessSummary::default()
    };
    let mut sq_err = 0.0;
    let mut bin_width = 0.0;
    for ProfileRecord { profile, label_range_m } in &log.records {
        let det = if args.smooth {
            extract_range(profile, &cfg.dsp, &mut filter)
        } else {
            detect_range(profile, &cfg.dsp)
        };
        let det = match det {
            Ok(d) => d,
            Err(e) => {
                output
                    .warnings
                    .push(format!("t={}: not processed: {e}", profile.timestamp_s));
                None
            }
        };
        let label = label_range_m.map(|l| l.to_string()).unwrap_or_default();
        let row = match det {
            Some(d) => {
                summary.detected += 1;
                if let Some(l) = label_range_m {
                    summary.scored += 1;
                    sq_err += (d.raw_range_m - l).powi(2);
                    bin_width += profile.max_range_m / (profile.n_bins() - 1) as f64;
                }
                [
                    profile.timestamp_s.to_string(),
                    profile.azimuth_deg.to_string(),
                    "1".into(),
                    d.range_m.to_string(),
                    d.raw_range_m.to_string(),
                    d.source_bin.to_string(),
                    label,
                ]
            }
            None => [
                profile.timestamp_s.to_string(),
                profile.azimuth_deg.to_string(),
                "0".into(),
                String::new(),
                String::new(),
                String::new(),
                label,
            ],
        };
        w.write_record(&row).map_err(io_err)?;
    }
    let table = w.into_inner().map_err(|e| CliError::io(&args.out, e.error()))?;
    let mut bytes = version_line("range-table").into_bytes();
    bytes.push(b'\n');
    bytes.extend(table);
    write_atomic(&args.out, &bytes)?;

    if summary.scored > 0 {
        let n = summary.scored as f64;
        let rmse = (sq_err / n).sqrt();
        summary.rmse_m = Some(rmse);
        summary.rmse_bins = Some(rmse / (bin_width / n));
    }

    let r = &mut output.report;
    let _ = writeln!(r, "profiles processed  {}", summary.processed);
    let _ = writeln!(r, "malformed rows      {}", summary.malformed);
    let _ = writeln!(
        r,
        "detections          {} ({})",
        summary.detected,
        summary
            .detection_rate()
            .map_or("n/a".into(), |d| format!("{:.2}%", 100.0 * d))
    );
    match (summary.rmse_m, summary.rmse_bins) {
        (Some(m), Some(b)) => {
            let _ = writeln!(r, "RMSE vs labels      {m:.5} m ({b:.2} bins, {} scored)", summary.scored);
        }
        _ => {
            let _ = writeln!(r, "RMSE vs labels      n/a (no labeled detections)");
        }
    }

    if let Some(max) = args.max_rmse_m {
        match summary.rmse_m {
            Some(m) if m <= max => {}
            Some(m) => output.threshold_failures.push(format!("RMSE {m:.5} m > {max} m")),
            None => output.threshold_failures.push("no labeled detections to score".into()),
        }
    }
    if let Some(min) = args.min_detection_rate {
        let rate = summary.detection_rate().unwrap_or(0.0);
        if rate < min {
            output
                .threshold_failures
                .push(format!("detection rate {rate:.4} < {min}"));
        }
    }
    Ok((summary, output))
}

#[derive(Debug, Clone, Default)]
pub struct SynthArgs {
    pub config: Option<PathBuf>,
    pub count: Option<usize>,
    pub seed: Option<u64>,
    pub out: PathBuf,
}

pub fn cmd_synth_corpus(args: &SynthArgs) -> Result<CommandOutput, CliError> {
    let mut cfg = Config::load_or_default(args.config.as_deref())?;
    if let Some(c) = args.count {
        cfg.corpus.count = c;
    }
    if let Some(s) = args.seed {
        cfg.corpus.seed = s;
    }
    cfg.validate()?;
    let spec = &cfg.corpus;
    let corpus = generate_corpus(spec, spec.count, spec.seed).map_err(|e| CliError::Validation(e.to_string()))?;
    let with_multipath = corpus.iter().filter(|p| p.has_multipath).count();
    let records: Vec<ProfileRecord> = corpus
        .into_iter()
        .map(|p| ProfileRecord {
            profile: p.profile,
            label_range_m: Some(p.label_range_m),
        })
        .collect();
    write_atomic(&args.out, &write_profile_log(&records, Some(spec.model.n_bins)))?;
    Ok(CommandOutput {
        report: format!(
            "wrote {} profiles ({} with multipath, seed {}) to {}\n",
            records.len(),
            with_multipath,
            spec.seed,
            args.out.display()
        ),
        ..CommandOutput::default()
    })
}
