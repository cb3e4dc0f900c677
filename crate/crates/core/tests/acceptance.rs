//! Acceptance criteria. Runs as a plain binary so every criterion prints one
//! PASS/FAIL line regardless of test-output capture.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pipenav::center_geometry::{candidate_centers, select_center, WallPoint};
use pipenav::cli_io::Config;
use pipenav::control::{depth_command, forward_command, yaw_command, ControlGains, Controller, VehicleState};
use pipenav::pipe_sim::{generate_corpus, run_benchmark};
use pipenav::sonar_dsp::detect_range;
use pipenav::uncertainty::{confidence_weight, VarianceProfile};
use pipenav::{CenterEstimate, Vec2};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn simulation_replication() -> Outcome {
    let mut lines = Vec::new();
    let mut pass = true;
    for seed in [42, 7, 2024] {
        let gating = seed == 42;
        let mut cfg = Config::default();
        cfg.sim.seed = seed;
        assert_eq!(cfg.sim.noise_half_width_m, 0.04);
        assert_eq!((cfg.sim.sweeps, cfg.sim.trials), (3, 100));
        let started = Instant::now();
        let res = run_benchmark(&cfg.sim, &cfg.nav_stack()).expect("benchmark runs");
        let secs = started.elapsed().as_secs_f64();
        let s = &res.summary;
        let steps = s.steps_to_converge.map_or(f64::INFINITY, |x| x.mean);
        let sse = s.steady_state_error_m.map_or(f64::INFINITY, |x| x.mean);
        let ok = steps <= 15.0 && sse <= 0.04 && s.failures == 0 && s.never_converged == 0 && secs < 10.0;
        if gating {
            pass &= ok;
        }
        lines.push(format!(
            "{}seed {seed}: mean steps {steps:.2} (<= 15), mean SSE {sse:.4} m (<= 0.04), exits {}, unconverged {}, {secs:.2} s (< 10)",
            if gating { "" } else { "informational " },
            s.failures, s.never_converged
        ));
    }
    outcome(pass, lines.join("; "))
}

fn range_extraction_accuracy() -> Outcome {
    let cfg = Config::load(&configs_dir().join("corpus.toml")).expect("corpus config");
    let spec = &cfg.corpus;
    assert_eq!((spec.model.n_bins, spec.model.max_range_m), (1200, 2.0));
    let corpus = generate_corpus(spec, 1000, 42).expect("corpus");
    let multipath = corpus.iter().filter(|p| p.has_multipath).count();
    let mut detected = 0usize;
    let mut sq = 0.0;
    for p in &corpus {
        if let Some(d) = detect_range(&p.profile, &cfg.dsp).expect("valid profile") {
            detected += 1;
            sq += (d.raw_range_m - p.label_range_m).powi(2);
        }
    }
    let rmse = (sq / detected.max(1) as f64).sqrt();
    let bin = spec.model.max_range_m / (spec.model.n_bins - 1) as f64;
    let rate = detected as f64 / corpus.len() as f64;
    let pass = rmse <= 0.03 && rmse <= 2.0 * bin && rate >= 0.95;
    outcome(
        pass,
        format!(
            "1000 profiles, {multipath} with multipath: RMSE {rmse:.5} m = {:.2} bins (<= 0.03 m, <= 2 bins), detection {:.1}% (>= 95%)",
            rmse / bin,
            100.0 * rate
        ),
    )
}

/// Ray/circle hit relative to the robot, written out independently of the
/// simulator.
fn hit(robot: Vec2, az_deg: f64, r: f64) -> Vec2 {
    let (s, c) = az_deg.to_radians().sin_cos();
    let b = robot.x * c + robot.z * s;
    let t = -b + (b * b - (robot.x * robot.x + robot.z * robot.z - r * r)).sqrt();
    Vec2::new(t * c, t * s)
}

/// Reflection of `p` across the line through `a` and `b`.
fn mirror(p: Vec2, a: Vec2, b: Vec2) -> Vec2 {
    let d = b - a;
    let u = d * (1.0 / d.norm());
    let ap = p - a;
    let foot = a + u * ap.dot(u);
    foot * 2.0 - p
}

/// Brute-force least-squares center on one side of the chord. Every local
/// minimum of a coarse grid seeds a compass search down to sub-nanometer
/// steps; the lowest refined cost wins. Short chords make the cost a long
/// shallow valley, so a single coarse argmin is not enough.
fn lsq_center(pd: Vec2, pr: Vec2, r: f64, side: f64) -> Vec2 {
    let cost = |c: Vec2| (c.distance(pd) - r).powi(2) + (c.distance(pr) - r).powi(2);
    let chord = pr - pd;
    let on_side = |c: Vec2| {
        let rel = c - pd;
        side * (chord.x * rel.z - chord.z * rel.x) >= 0.0
    };
    let n = 200;
    let cell = 6.0 * r / n as f64;
    let at = |i: usize, j: usize| Vec2::new(-3.0 * r + i as f64 * cell, -3.0 * r + j as f64 * cell);
    let grid: Vec<Vec<f64>> = (0..=n)
        .map(|i| (0..=n).map(|j| if on_side(at(i, j)) { cost(at(i, j)) } else { f64::INFINITY }).collect())
        .collect();
    let mut seeds = Vec::new();
    for i in 1..n {
        for j in 1..n {
            let v = grid[i][j];
            if v.is_finite()
                && (i - 1..=i + 1).all(|a| (j - 1..=j + 1).all(|b| grid[a][b] >= v))
            {
                seeds.push((v, at(i, j)));
            }
        }
    }
    seeds.sort_by(|a, b| a.0.total_cmp(&b.0));
    seeds.truncate(25);

    let mut best = (f64::INFINITY, Vec2::ZERO);
    for (_, start) in seeds {
        let mut c = start;
        let mut v = cost(c);
        let mut step = cell;
        while step > 1e-13 {
            let moved = [(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0)].iter().any(|&(dx, dz)| {
                let t = c + Vec2::new(dx * step, dz * step);
                let tv = cost(t);
                if on_side(t) && tv < v {
                    c = t;
                    v = tv;
                    true
                } else {
                    false
                }
            });
            if !moved {
                step *= 0.5;
            }
        }
        if v < best.0 {
            best = (v, c);
        }
    }
    best.1
}

/// Agreement required between the refined grid search and the closed form.
const LSQ_RESOLUTION_M: f64 = 1e-7;

fn geometry_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut worst_on_circle: f64 = 0.0;
    let mut worst_selected: f64 = 0.0;
    let mut errors = 0;
    let mut no_history_mismatch = 0;
    let n = 10_000;
    let mut instances = Vec::new();
    for k in 0..n {
        let r = if k % 2 == 0 { 0.23 } else { rng.random_range(0.05..2.0) };
        let rho = r * rng.random::<f64>().sqrt();
        let phi = rng.random_range(0.0..std::f64::consts::TAU);
        let robot = Vec2::new(rho * phi.cos(), rho * phi.sin());
        let az = rng.random_range(0.0..360.0);
        let pd = hit(robot, 270.0, r);
        let pr = hit(robot, az, r);
        let truth = -robot;
        let pair = match candidate_centers(&WallPoint::downward(pd), &WallPoint::rotating(pr, az), r) {
            Ok(p) => p,
            Err(_) => {
                errors += 1;
                continue;
            }
        };
        for c in [pair.c1, pair.c2] {
            for p in [pd, pr] {
                worst_on_circle = worst_on_circle.max((c.distance(p) - r).abs());
            }
        }
        // Prior estimate: the truth moved by less than half the spacing to
        // its mirror image across the chord.
        let spacing = truth.distance(mirror(truth, pd, pr));
        let jitter = rng.random_range(0.0..0.45) * spacing;
        let dir = rng.random_range(0.0..std::f64::consts::TAU);
        let prior = truth + Vec2::new(jitter * dir.cos(), jitter * dir.sin());
        let selected = select_center(&pair, r, Some(prior));
        worst_selected = worst_selected.max(selected.distance(truth));
        if select_center(&pair, r, None).distance(truth) > 1e-9 {
            no_history_mismatch += 1;
        }
        if instances.len() < 100 && k % 100 == 1 {
            instances.push((pd, pr, r, pair));
        }
    }

    let mut worst_lsq: f64 = 0.0;
    for (pd, pr, r, pair) in &instances {
        for side in [1.0, -1.0] {
            let c = lsq_center(*pd, *pr, *r, side);
            worst_lsq = worst_lsq.max(c.distance(pair.c1).min(c.distance(pair.c2)));
        }
    }
    let pass = errors == 0 && worst_on_circle <= 1e-9 && worst_selected <= 1e-9 && worst_lsq <= LSQ_RESOLUTION_M;
    outcome(
        pass,
        format!(
            "{n} configs, {errors} errors: max |dist-r| {worst_on_circle:.2e} (<= 1e-9), max selection error {worst_selected:.2e} (<= 1e-9); \
             grid LSQ on {} instances max gap {worst_lsq:.2e} m (<= {LSQ_RESOLUTION_M:.0e}); \
             without a prior {no_history_mismatch} configs pick the mirror center",
            instances.len()
        ),
    )
}

fn covariance_properties() -> Outcome {
    let m = VarianceProfile {
        amplitude_a: 1.0,
        width_w1_deg: 30.0,
        width_w2_deg: 30.0,
    };
    let v180 = m.variance_at(180.0);
    let v90 = m.variance_at(90.0);
    let grid: Vec<f64> = (0..=200_000).map(|i| i as f64 * 5e-4).collect();
    let decreasing = grid.windows(2).all(|w| confidence_weight(w[1]) < confidence_weight(w[0]));
    let pass = (1.0..=1.0001).contains(&v180) && (0.0221..=0.0224).contains(&v90) && decreasing;
    outcome(
        pass,
        format!(
            "sigma2(180) = {v180:.10} in [1, 1.0001], sigma2(90) = {v90:.6} in [0.0221, 0.0224], weight strictly decreasing on {} points of [0, 100]: {decreasing}",
            grid.len()
        ),
    )
}

fn estimate(offset: Vec2, w: (f64, f64)) -> CenterEstimate {
    CenterEstimate {
        offset,
        var: (1.0 / w.0 - 1.0, 1.0 / w.1 - 1.0),
        weights: w,
        posterior_var: (0.0, 0.0),
        beam_separation_deg: 90.0,
        timestamp_s: 0.0,
        stale: false,
    }
}

fn controller_fixpoints() -> Outcome {
    let gains = ControlGains::default();
    let mut notes = Vec::new();

    // Fixpoint: every feedback axis is zero; forward thrust is the gated
    // feed-forward and is zero only when it is configured to be.
    let mut ctl = Controller::new(gains.clone());
    let cmd = ctl.step(&estimate(Vec2::ZERO, (1.0, 1.0)), &VehicleState::default(), 0.1);
    let feedback_zero = [cmd.u_x, cmd.u_z, cmd.u_roll, cmd.u_pitch, cmd.u_yaw].iter().all(|u| *u == 0.0);
    let mut ctl0 = Controller::new(ControlGains {
        u_forward: 0.0,
        ..gains.clone()
    });
    let cmd0 = ctl0.step(&estimate(Vec2::ZERO, (1.0, 1.0)), &VehicleState::default(), 0.1);
    let all_zero = [cmd0.u_x, cmd0.u_y, cmd0.u_z, cmd0.u_roll, cmd0.u_pitch, cmd0.u_yaw]
        .iter()
        .all(|u| *u == 0.0);
    notes.push(format!("zero input: feedback axes zero {feedback_zero}, all six zero with u_forward=0 {all_zero}"));

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut forward_ok = true;
    let mut gate_ok = true;
    for _ in 0..10_000 {
        let h_trg = rng.random_range(-0.1..0.1);
        let g = ControlGains {
            h_trg_m: h_trg,
            ..gains.clone()
        };
        let off = Vec2::new(rng.random_range(-0.1..0.1), rng.random_range(-0.2..0.2));
        let inside = (off.x.powi(2) + (off.z - h_trg).powi(2)).sqrt() < g.epsilon_m;
        let u_y = forward_command(&estimate(off, (1.0, 1.0)), &g);
        forward_ok &= (u_y != 0.0) == inside;

        let w_z = rng.random_range(0.0..1.0);
        let depth = rng.random_range(-1.0..1.0);
        let prior = rng.random_range(-1.0..1.0);
        let state = VehicleState {
            depth_m: depth,
            ..VehicleState::default()
        };
        let (_, h_star) = depth_command(&state, off.z, w_z, &g, Some(prior));
        let updated = h_star != prior;
        gate_ok &= updated == (w_z > g.confidence_gate);
        if w_z > g.confidence_gate {
            gate_ok &= h_star == depth + off.z;
        }
    }
    notes.push(format!("forward gate iff inside epsilon on 10000 draws {forward_ok}, setpoint update iff w_z > gate {gate_ok}"));

    let mut yaw_err: f64 = 0.0;
    for trial in 0..100 {
        let mut psi = 0.0;
        let mut exact = 0.0;
        let mut state = VehicleState::default();
        for k in 0..200 {
            let rate = rng.random_range(-1.0..1.0);
            let dt = [0.05, 0.1, 0.125][(trial + k) % 3];
            state.yaw_est_rad = psi;
            state.yaw_rate_gyro = rate;
            psi = yaw_command(&state, dt, &gains).1;
            exact += rate * dt;
        }
        yaw_err = yaw_err.max((psi - exact).abs());
    }
    // The canonical piecewise-constant case from the controller contract.
    let mut ctl = Controller::new(gains.clone());
    let state = VehicleState {
        yaw_rate_gyro: 0.1,
        ..VehicleState::default()
    };
    for _ in 0..10 {
        ctl.step(&estimate(Vec2::ZERO, (1.0, 1.0)), &state, 0.1);
    }
    let ten_steps = (ctl.yaw_estimate().unwrap() - 0.1).abs();
    notes.push(format!(
        "yaw integration max error {yaw_err:.1e} over 100 random rate sequences, 10 x 0.1 rad/s x 0.1 s error {ten_steps:.1e} (<= 1e-12)"
    ));

    let pass = feedback_zero && all_zero && forward_ok && gate_ok && yaw_err <= 1e-12 && ten_steps <= 1e-12;
    outcome(pass, notes.join("; "))
}

fn run_cli(args: &[&str], cwd: &Path) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_pipenav"))
        .args(args)
        .current_dir(cwd)
        .env_remove(pipenav::cli_io::CONFIG_ENV)
        .output()
        .expect("spawn pipenav");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().expect("tempdir");
    let d = dir.path();
    let corpus_cfg = configs_dir().join("corpus.toml");
    let corpus_cfg = corpus_cfg.to_str().unwrap();
    let mut compared = Vec::new();
    let mut pass = true;
    let runs: [(&str, Vec<&str>); 3] = [
        ("run record", vec!["simulate", "--seed", "42", "--per-trial", "--out"]),
        ("profile log", vec!["--config", corpus_cfg, "synth-corpus", "--count", "300", "--seed", "5", "--out"]),
        ("range table", vec!["--config", corpus_cfg, "process-profiles", "--log", "a_profile log", "--out"]),
    ];
    for (name, args) in runs {
        let mut files = Vec::new();
        for tag in ["a", "b"] {
            let out = format!("{tag}_{name}");
            let mut argv: Vec<&str> = args.clone();
            argv.push(&out);
            let (code, err) = run_cli(&argv, d);
            if code != 0 {
                return outcome(false, format!("{name}: exit {code}: {err}"));
            }
            files.push(std::fs::read(d.join(&out)).expect("output written"));
        }
        let same = files[0] == files[1];
        pass &= same && !files[0].is_empty();
        compared.push(format!("{name} {} bytes identical {same}", files[0].len()));
    }
    outcome(pass, compared.join("; "))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 6] = [
        ("simulation replication", simulation_replication),
        ("range-extraction accuracy", range_extraction_accuracy),
        ("geometry oracle equivalence", geometry_oracle),
        ("covariance model properties", covariance_properties),
        ("controller fixpoints and gates", controller_fixpoints),
        ("determinism", determinism),
    ];
    println!("\nacceptance: {} criteria", criteria.len());
    let mut failed = 0;
    for (name, check) in criteria {
        let o = check();
        println!("[{}] {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if !o.pass {
            failed += 1;
        }
    }
    println!("acceptance: {} passed, {failed} failed\n", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
