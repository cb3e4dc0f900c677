use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use pipenav::cli_io::commands::{
    cmd_benchmark, cmd_process_profiles, cmd_simulate, cmd_synth_corpus, CommandOutput, ProcessArgs,
    SimOverrides, SimulateArgs, SynthArgs,
};
use pipenav::cli_io::{CliError, CONFIG_ENV};
use pipenav::pipe_sim::MeasurementMode;

#[derive(Parser)]
#[command(name = "pipenav", version, about = "Sonar-based pipe centering: simulation and profile processing")]
struct Cli {
    /// TOML config file. Flags override its values, which override built-in defaults.
    #[arg(long, global = true, env = CONFIG_ENV)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run seeded closed-loop trials and write a run record.
    Simulate(SimFlags),
    /// Same as simulate, then fail with exit code 3 if the benchmark thresholds are missed.
    Benchmark(SimFlags),
    /// Extract wall ranges from a profile log.
    ProcessProfiles(ProcessFlags),
    /// Write a labeled synthetic profile log.
    SynthCorpus(SynthFlags),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Exact,
    EndToEnd,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct SimFlags {
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Half-width of the uniform wall-point noise, meters.
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    sweeps: Option<usize>,
    /// Pipe radius, meters.
    #[arg(long)]
    radius: Option<f64>,
    #[arg(long)]
    azimuth_step: Option<f64>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Run record output path (JSON).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Include per-trial results and trajectories in the run record.
    #[arg(long)]
    per_trial: bool,
    /// Record wall-clock runtime (the record is then no longer reproducible byte for byte).
    #[arg(long)]
    timing: bool,
}

#[derive(Args)]
struct ProcessFlags {
    /// Profile log to read.
    #[arg(long)]
    log: PathBuf,
    /// Range table output path (CSV).
    #[arg(long)]
    out: PathBuf,
    /// Smooth ranges across consecutive pings with the scalar Kalman filter.
    #[arg(long)]
    smooth: bool,
    /// Exit with code 3 if the RMSE against labels exceeds this, meters.
    #[arg(long)]
    max_rmse: Option<f64>,
    /// Exit with code 3 if the detection rate falls below this fraction.
    #[arg(long)]
    min_detection_rate: Option<f64>,
}

#[derive(Args)]
struct SynthFlags {
    #[arg(long)]
    count: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Profile log output path.
    #[arg(long)]
    out: PathBuf,
}

impl SimFlags {
    fn into_args(self, config: Option<PathBuf>) -> SimulateArgs {
        SimulateArgs {
            config,
            overrides: SimOverrides {
                trials: self.trials,
                seed: self.seed,
                noise_half_width_m: self.noise,
                sweeps: self.sweeps,
                pipe_radius_m: self.radius,
                azimuth_step_deg: self.azimuth_step,
                mode: self.mode.map(|m| match m {
                    ModeArg::Exact => MeasurementMode::Exact,
                    ModeArg::EndToEnd => MeasurementMode::EndToEnd,
                }),
            },
            out: self.out,
            per_trial: self.per_trial,
            timing: self.timing,
        }
    }
}

fn run(cli: Cli) -> Result<CommandOutput, CliError> {
    let config = cli.config;
    match cli.command {
        Command::Simulate(f) => cmd_simulate(&f.into_args(config)).map(|(_, out)| out),
        Command::Benchmark(f) => cmd_benchmark(&f.into_args(config)).map(|(_, out)| out),
        Command::ProcessProfiles(f) => cmd_process_profiles(&ProcessArgs {
            log: f.log,
            config,
            out: f.out,
            smooth: f.smooth,
            max_rmse_m: f.max_rmse,
            min_detection_rate: f.min_detection_rate,
        })
        .map(|(_, out)| out),
        Command::SynthCorpus(f) => cmd_synth_corpus(&SynthArgs {
            config,
            count: f.count,
            seed: f.seed,
            out: f.out,
        }),
    }
}

fn main() -> ExitCode {
    // clap exits usage errors with 2, which here means I/O failure
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = run(cli).and_then(|out| {
        print!("{}", out.report);
        for w in &out.warnings {
            eprintln!("warning: {w}");
        }
        out.into_result()
    });
    match result {
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
