//! Closed-loop 2D simulation of a robot holding the center of a circular pipe.
//!
//! The pipe center sits at the world origin and the robot frame is a pure
//! translation of the world frame, so a wall point in the robot frame is the
//! world hit point minus the robot position. Each tick the downward beam and
//! the rotating beam are cast, perturbed, turned into a center estimate and
//! fed to the controller, whose lateral and vertical commands move the robot
//! kinematically.

pub mod synth;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::center_geometry::{estimate_center, CenterEstimate, GeometryError, WallPoint, WallPointSource};
use crate::control::{ControlCommand, ControlGains, Controller, VehicleState};
use crate::filtering::{diag2, Center2DKalman, DEFAULT_PROCESS_NOISE};
use crate::sonar_dsp::{detect_range, DspError, DspParams};
use crate::uncertainty::{confidence_weights, CovarianceModel};
use crate::Vec2;

pub use synth::{generate_corpus, synth_profile, CorpusSpec, Echo, EchoModel, LabeledProfile, SyntheticProfileSpec};

/// Name of the generator behind every random stream.
pub const RNG_ALGORITHM: &str = "ChaCha8Rng";

#[derive(Debug, Error)]
pub enum SimError {
    #[error("robot at {0:?} is not strictly inside the pipe")]
    RobotOutsidePipe(Vec2),
    #[error("ray direction {0} deg is not finite")]
    InvalidDirection(f64),
    #[error("noise half-width must be finite and >= 0, got {0}")]
    InvalidNoise(f64),
    #[error("invalid configuration: {}", format_violations(.0))]
    InvalidSpec(Vec<(String, String)>),
    #[error(transparent)]
    Dsp(#[from] DspError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

pub(crate) fn format_violations(v: &[(String, String)]) -> String {
    v.iter()
        .map(|(k, m)| format!("{k}: {m}"))
        .collect::<Vec<_>>()
        .join("; ")
}

/// Per-trial (or per-profile) generator: `seed_from_u64(seed ^ index)`.
pub fn trial_rng(seed: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ index)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasurementMode {
    /// Exact ray/circle hits plus uniform noise on each coordinate.
    #[default]
    Exact,
    /// The rotating beam is rendered as an intensity profile and run through
    /// the detection chain; the downward beam stays exact plus noise.
    EndToEnd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub pipe_radius_m: f64,
    /// Each wall-point coordinate gets uniform noise in `[-h, h]`.
    pub noise_half_width_m: f64,
    pub azimuth_step_deg: f64,
    pub sweeps: usize,
    pub trials: usize,
    pub seed: u64,
    pub dt_s: f64,
    /// Velocity per unit command, m/s.
    pub robot_speed_gain: f64,
    /// Start positions are drawn uniformly in a disk of radius
    /// `pipe_radius_m - start_margin_m`.
    pub start_margin_m: f64,
    pub converge_threshold_m: f64,
    pub mode: MeasurementMode,
    /// Rotating sonar model used in end-to-end mode.
    pub sonar: EchoModel,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            pipe_radius_m: 0.23,
            noise_half_width_m: 0.04,
            azimuth_step_deg: 9.0,
            sweeps: 3,
            trials: 100,
            seed: 42,
            dt_s: 0.1125,
            robot_speed_gain: 1.0,
            start_margin_m: 0.04,
            converge_threshold_m: 0.05,
            mode: MeasurementMode::Exact,
            sonar: EchoModel {
                n_bins: 600,
                max_range_m: 0.6,
                ringdown_bins: 20,
                ..EchoModel::default()
            },
        }
    }
}

impl SimConfig {
    pub fn steps(&self) -> usize {
        (self.sweeps as f64 * 360.0 / self.azimuth_step_deg).round() as usize
    }

    pub fn violations(&self, path: &str) -> Vec<(String, String)> {
        let mut v = Vec::new();
        let mut push = |field: &str, msg: &str| v.push((format!("{path}.{field}"), msg.to_string()));
        if !(self.pipe_radius_m > 0.0 && self.pipe_radius_m.is_finite()) {
            push("pipe_radius_m", "must be > 0");
        }
        if !(self.noise_half_width_m >= 0.0 && self.noise_half_width_m.is_finite()) {
            push("noise_half_width_m", "must be >= 0");
        }
        if !(self.azimuth_step_deg > 0.0 && self.azimuth_step_deg <= 360.0) {
            push("azimuth_step_deg", "must be in (0, 360]");
        }
        if self.sweeps == 0 {
            push("sweeps", "must be >= 1");
        }
        if !(self.dt_s > 0.0 && self.dt_s.is_finite()) {
            push("dt_s", "must be > 0");
        }
        if !(self.robot_speed_gain > 0.0 && self.robot_speed_gain.is_finite()) {
            push("robot_speed_gain", "must be > 0");
        }
        if !(self.start_margin_m >= 0.0 && self.start_margin_m < self.pipe_radius_m) {
            push("start_margin_m", "must be in [0, pipe_radius_m)");
        }
        if !(self.converge_threshold_m > 0.0 && self.converge_threshold_m.is_finite()) {
            push("converge_threshold_m", "must be > 0");
        }
        v.extend(self.sonar.violations(&format!("{path}.sonar")));
        if self.mode == MeasurementMode::EndToEnd && self.sonar.max_range_m <= 2.0 * self.pipe_radius_m {
            v.push((
                format!("{path}.sonar.max_range_m"),
                "must exceed the pipe diameter in end_to_end mode".into(),
            ));
        }
        v
    }
}

/// Estimator and controller settings shared by every trial.
#[derive(Debug, Clone, PartialEq)]
pub struct NavStack {
    pub dsp: DspParams,
    pub covariance: CovarianceModel,
    pub gains: ControlGains,
    /// Diagonal process noise of the center filter, m².
    pub center_process_noise: f64,
}

impl Default for NavStack {
    fn default() -> Self {
        Self {
            dsp: DspParams::default(),
            covariance: CovarianceModel::default(),
            gains: ControlGains::default(),
            center_process_noise: DEFAULT_PROCESS_NOISE,
        }
    }
}

/// Hit point of a ray from `robot` at `direction_deg` with the circle of
/// radius `radius_m` around `center`, expressed relative to the robot.
pub fn cast_ray(
    robot: Vec2,
    direction_deg: f64,
    center: Vec2,
    radius_m: f64,
    source: WallPointSource,
) -> Result<WallPoint, SimError> {
    if !direction_deg.is_finite() {
        return Err(SimError::InvalidDirection(direction_deg));
    }
    let q = robot - center;
    if !(q.is_finite() && q.norm() < radius_m) {
        return Err(SimError::RobotOutsidePipe(robot));
    }
    let d = Vec2::from_heading_deg(direction_deg);
    let qd = q.dot(d);
    let t = -qd + (qd * qd - (q.dot(q) - radius_m * radius_m)).sqrt();
    Ok(WallPoint {
        x_m: t * d.x,
        z_m: t * d.z,
        source,
        azimuth_deg: direction_deg.rem_euclid(360.0),
    })
}

/// Adds independent uniform noise in `[-h, h]` to both coordinates. Two
/// draws are consumed even when `h` is zero, which then leaves the point
/// unchanged.
pub fn add_uniform_noise<R: Rng + ?Sized>(
    point: WallPoint,
    half_width_m: f64,
    rng: &mut R,
) -> Result<WallPoint, SimError> {
    if !(half_width_m >= 0.0 && half_width_m.is_finite()) {
        return Err(SimError::InvalidNoise(half_width_m));
    }
    let ux: f64 = rng.random();
    let uz: f64 = rng.random();
    let p = point.position();
    Ok(point.with_position(Vec2::new(
        p.x + (2.0 * ux - 1.0) * half_width_m,
        p.z + (2.0 * uz - 1.0) * half_width_m,
    )))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub t_s: f64,
    /// Robot position at the measurement, world frame.
    pub robot: Vec2,
    /// Filtered estimate of the pipe center relative to the robot.
    pub estimate: Vec2,
    pub command: ControlCommand,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial_index: usize,
    pub start: Vec2,
    /// Number of control steps until the distance to the center first drops
    /// below the threshold; 0 when the start already is within it.
    pub steps_to_converge: Option<usize>,
    /// Mean distance to the center from the convergence step onward.
    pub steady_state_error_m: Option<f64>,
    pub final_distance_m: f64,
    pub exited_pipe: bool,
    /// Ticks where no center measurement could be formed.
    pub stale_steps: usize,
    pub trajectory: Vec<TrajectorySample>,
}

impl TrialResult {
    /// Distance to the pipe center before the first step and after every
    /// completed step.
    pub fn distances(&self) -> Vec<f64> {
        let mut d: Vec<f64> = self.trajectory.iter().map(|s| s.robot.norm()).collect();
        d.push(self.final_distance_m);
        d
    }

    pub fn is_failure(&self) -> bool {
        self.exited_pipe
    }
}

fn held_estimate(filter: &Center2DKalman, cov: &CovarianceModel, t: f64) -> CenterEstimate {
    let var = cov.variances(0.0);
    CenterEstimate {
        offset: filter.previous().unwrap_or(Vec2::ZERO),
        var,
        weights: confidence_weights(var),
        posterior_var: (filter.state_cov[0][0], filter.state_cov[1][1]),
        beam_separation_deg: 0.0,
        timestamp_s: t,
        stale: true,
    }
}

/// Runs one closed-loop trial.
pub fn run_trial(cfg: &SimConfig, stack: &NavStack, trial_index: usize) -> Result<TrialResult, SimError> {
    let v = cfg.violations("sim");
    if !v.is_empty() {
        return Err(SimError::InvalidSpec(v));
    }
    let r = cfg.pipe_radius_m;
    let mut rng = trial_rng(cfg.seed, trial_index as u64);

    let start_radius = (r - cfg.start_margin_m) * rng.random::<f64>().sqrt();
    let start_angle = rng.random::<f64>() * std::f64::consts::TAU;
    let start = Vec2::new(start_radius * start_angle.cos(), start_radius * start_angle.sin());

    let q = stack.center_process_noise;
    let mut filter = Center2DKalman::new(diag2(q, q));
    let mut controller = Controller::new(stack.gains.clone());
    let mut pos = start;
    let mut vel = Vec2::ZERO;
    let mut trajectory = Vec::with_capacity(cfg.steps());
    let mut stale_steps = 0;
    let mut exited = false;

    for k in 0..cfg.steps() {
        let t = k as f64 * cfg.dt_s;
        let azimuth = (k as f64 * cfg.azimuth_step_deg).rem_euclid(360.0);

        let down = cast_ray(pos, crate::center_geometry::DOWNWARD_AZIMUTH_DEG, Vec2::ZERO, r, WallPointSource::Downward)?;
        let down = add_uniform_noise(down, cfg.noise_half_width_m, &mut rng)?;
        let rotating = match cfg.mode {
            MeasurementMode::Exact => {
                let hit = cast_ray(pos, azimuth, Vec2::ZERO, r, WallPointSource::Rotating)?;
                Some(add_uniform_noise(hit, cfg.noise_half_width_m, &mut rng)?)
            }
            MeasurementMode::EndToEnd => {
                let hit = cast_ray(pos, azimuth, Vec2::ZERO, r, WallPointSource::Rotating)?;
                let range = hit.position().norm();
                let spec = cfg.sonar.spec_for(range);
                let profile = synth_profile(&spec, azimuth, t, &mut rng)?.profile;
                detect_range(&profile, &stack.dsp)?
                    .map(|det| WallPoint::from_range(det.raw_range_m, azimuth, WallPointSource::Rotating))
            }
        };

        let estimate = match rotating {
            Some(rot) => match estimate_center(&down, &rot, r, &mut filter, &stack.covariance, t) {
                Ok(e) => e,
                Err(GeometryError::DegeneratePoints | GeometryError::ZeroLengthBeam) => {
                    held_estimate(&filter, &stack.covariance, t)
                }
                Err(e) => return Err(e.into()),
            },
            None => held_estimate(&filter, &stack.covariance, t),
        };
        if estimate.stale {
            stale_steps += 1;
        }

        let state = VehicleState {
            depth_m: pos.z,
            depth_rate: vel.z,
            ..VehicleState::default()
        };
        let command = controller.step(&estimate, &state, cfg.dt_s);
        trajectory.push(TrajectorySample {
            t_s: t,
            robot: pos,
            estimate: estimate.offset,
            command,
        });

        vel = Vec2::new(command.u_x, command.u_z) * cfg.robot_speed_gain;
        pos = pos + vel * cfg.dt_s;
        if pos.norm() >= r {
            exited = true;
            break;
        }
    }

    let final_distance = pos.norm();
    let mut result = TrialResult {
        trial_index,
        start,
        steps_to_converge: None,
        steady_state_error_m: None,
        final_distance_m: final_distance,
        exited_pipe: exited,
        stale_steps,
        trajectory,
    };
    if !exited {
        let d = result.distances();
        if let Some(k) = d.iter().position(|&x| x < cfg.converge_threshold_m) {
            result.steps_to_converge = Some(k);
            let tail = &d[k..];
            result.steady_state_error_m = Some(tail.iter().sum::<f64>() / tail.len() as f64);
        }
    }
    Ok(result)
}

/// Mean, median and sample standard deviation of a set of values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    pub std: f64,
}

impl Stats {
    pub fn of(values: &[f64]) -> Option<Stats> {
        if values.is_empty() {
            return None;
        }
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let median = if n % 2 == 1 {
            sorted[n / 2]
        } else {
            0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
        };
        let std = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Some(Stats { count: n, mean, median, std })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSummary {
    pub trials: usize,
    pub converged: usize,
    pub never_converged: usize,
    /// Trials in which the robot left the pipe.
    pub failures: usize,
    /// Over converged trials.
    pub steps_to_converge: Option<Stats>,
    pub steady_state_error_m: Option<Stats>,
    pub final_distance_m: Option<Stats>,
}

impl BenchmarkSummary {
    pub fn from_trials(trials: &[TrialResult]) -> Self {
        let steps: Vec<f64> = trials
            .iter()
            .filter_map(|t| t.steps_to_converge.map(|s| s as f64))
            .collect();
        let sse: Vec<f64> = trials.iter().filter_map(|t| t.steady_state_error_m).collect();
        let finals: Vec<f64> = trials
            .iter()
            .filter(|t| !t.exited_pipe)
            .map(|t| t.final_distance_m)
            .collect();
        let failures = trials.iter().filter(|t| t.exited_pipe).count();
        Self {
            trials: trials.len(),
            converged: steps.len(),
            never_converged: trials.len() - steps.len() - failures,
            failures,
            steps_to_converge: Stats::of(&steps),
            steady_state_error_m: Stats::of(&sse),
            final_distance_m: Stats::of(&finals),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkResult {
    pub summary: BenchmarkSummary,
    pub trials: Vec<TrialResult>,
}

/// Runs `cfg.trials` independent trials in parallel. Results are ordered by
/// trial index, so the output does not depend on the thread count.
pub fn run_benchmark(cfg: &SimConfig, stack: &NavStack) -> Result<BenchmarkResult, SimError> {
    let v = cfg.violations("sim");
    if !v.is_empty() {
        return Err(SimError::InvalidSpec(v));
    }
    let trials = (0..cfg.trials)
        .into_par_iter()
        .map(|i| run_trial(cfg, stack, i))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(BenchmarkResult {
        summary: BenchmarkSummary::from_trials(&trials),
        trials,
    })
}

/// Median distance to the center at each step across trials that stayed in
/// the pipe for the whole run.
pub fn median_distance_curve(trials: &[TrialResult]) -> Vec<f64> {
    let curves: Vec<Vec<f64>> = trials
        .iter()
        .filter(|t| !t.exited_pipe)
        .map(TrialResult::distances)
        .collect();
    let len = curves.iter().map(Vec::len).min().unwrap_or(0);
    (0..len)
        .map(|k| {
            let col: Vec<f64> = curves.iter().map(|c| c[k]).collect();
            Stats::of(&col).map_or(f64::NAN, |s| s.median)
        })
        .collect()
}
