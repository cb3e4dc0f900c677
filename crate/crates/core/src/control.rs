//! Confidence-weighted PD control in six degrees of freedom.
//!
//! Translational commands act on the estimated center offset and are scaled
//! by the per-axis confidence weights. Roll and pitch are levelled, and yaw
//! holds the initial heading from an integrated gyro rate. Every output is
//! clamped to the normalized actuator envelope `[-1, 1]`.

use serde::{Deserialize, Serialize};

use crate::center_geometry::CenterEstimate;
use crate::Vec2;

/// Smallest time step used for finite-difference rates, seconds.
pub const MIN_RATE_DT_S: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControlGains {
    pub kp_x: f64,
    pub kd_x: f64,
    pub kp_z: f64,
    pub kd_z: f64,
    pub kp_roll: f64,
    pub kd_roll: f64,
    pub kp_pitch: f64,
    pub kd_pitch: f64,
    pub kp_yaw: f64,
    pub kd_yaw: f64,
    /// Forward assist thrust, normalized units.
    pub u_forward: f64,
    /// Alignment tolerance for enabling forward thrust, meters.
    pub epsilon_m: f64,
    /// Desired vertical offset of the pipe center, meters.
    pub h_trg_m: f64,
    /// Minimum vertical confidence for accepting a new depth setpoint.
    pub confidence_gate: f64,
}

impl Default for ControlGains {
    fn default() -> Self {
        Self {
            kp_x: 1.2,
            kd_x: 0.6,
            kp_z: 1.2,
            kd_z: 0.6,
            kp_roll: 2.0,
            kd_roll: 0.4,
            kp_pitch: 2.0,
            kd_pitch: 0.4,
            kp_yaw: 1.5,
            kd_yaw: 0.3,
            u_forward: 0.3,
            epsilon_m: 0.05,
            h_trg_m: 0.0,
            confidence_gate: 0.5,
        }
    }
}

impl ControlGains {
    pub fn violations(&self, path: &str) -> Vec<(String, String)> {
        let mut out = Vec::new();
        let gains = [
            ("kp_x", self.kp_x),
            ("kd_x", self.kd_x),
            ("kp_z", self.kp_z),
            ("kd_z", self.kd_z),
            ("kp_roll", self.kp_roll),
            ("kd_roll", self.kd_roll),
            ("kp_pitch", self.kp_pitch),
            ("kd_pitch", self.kd_pitch),
            ("kp_yaw", self.kp_yaw),
            ("kd_yaw", self.kd_yaw),
        ];
        for (name, g) in gains {
            if !(g >= 0.0 && g.is_finite()) {
                out.push((format!("{path}.{name}"), "must be >= 0".into()));
            }
        }
        if !self.u_forward.is_finite() {
            out.push((format!("{path}.u_forward"), "must be finite".into()));
        }
        if !(self.epsilon_m > 0.0 && self.epsilon_m.is_finite()) {
            out.push((format!("{path}.epsilon_m"), "must be > 0".into()));
        }
        if !self.h_trg_m.is_finite() {
            out.push((format!("{path}.h_trg_m"), "must be finite".into()));
        }
        if !(self.confidence_gate > 0.0 && self.confidence_gate < 1.0) {
            out.push((format!("{path}.confidence_gate"), "must be in (0, 1)".into()));
        }
        out
    }
}

/// Proprioceptive state from the pressure sensor and IMU.
///
/// `depth_m` is the pressure-derived vertical coordinate along `Z_r`
/// (increasing upward), so that a center offset `ê_z` maps directly onto the
/// setpoint `h + ê_z`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VehicleState {
    pub depth_m: f64,
    pub depth_rate: f64,
    pub roll_rad: f64,
    pub pitch_rad: f64,
    pub roll_rate: f64,
    pub pitch_rate: f64,
    pub yaw_rate_gyro: f64,
    pub yaw_est_rad: f64,
    pub yaw_ref_rad: f64,
}

/// Body-frame thrusts and moments, each in `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlCommand {
    pub u_x: f64,
    pub u_y: f64,
    pub u_z: f64,
    pub u_roll: f64,
    pub u_pitch: f64,
    pub u_yaw: f64,
    pub stale: bool,
}

fn clamp_unit(u: f64) -> f64 {
    if u.is_nan() {
        0.0
    } else {
        u.clamp(-1.0, 1.0)
    }
}

/// `u_x = (K_Px ê_x + K_Dx ė_x) · w_x`.
pub fn lateral_command(e_x: f64, e_x_rate: f64, w_x: f64, gains: &ControlGains) -> f64 {
    clamp_unit((gains.kp_x * e_x + gains.kd_x * e_x_rate) * w_x)
}

/// Depth hold. The setpoint moves to `h + ê_z` only when `w_z` clears the
/// confidence gate; the setpoint rate is taken as zero between updates.
/// Returns `(u_z, h*)`.
pub fn depth_command(
    state: &VehicleState,
    e_z: f64,
    w_z: f64,
    gains: &ControlGains,
    setpoint: Option<f64>,
) -> (f64, f64) {
    let mut h_star = setpoint.unwrap_or(state.depth_m);
    if w_z > gains.confidence_gate {
        h_star = state.depth_m + e_z;
    }
    let u = gains.kp_z * (h_star - state.depth_m) + gains.kd_z * (0.0 - state.depth_rate);
    (clamp_unit(u), h_star)
}

/// Forward assist thrust, enabled only while the center offset is within
/// `epsilon_m` of `(0, h_trg)` and the estimate is fresh.
pub fn forward_command(center: &CenterEstimate, gains: &ControlGains) -> f64 {
    if center.stale {
        return 0.0;
    }
    let misalignment = center.offset - Vec2::new(0.0, gains.h_trg_m);
    if misalignment.norm() < gains.epsilon_m {
        clamp_unit(gains.u_forward)
    } else {
        0.0
    }
}

/// Roll and pitch leveling moments.
pub fn attitude_commands(state: &VehicleState, gains: &ControlGains) -> (f64, f64) {
    let roll = -gains.kp_roll * state.roll_rad - gains.kd_roll * state.roll_rate;
    let pitch = -gains.kp_pitch * state.pitch_rad - gains.kd_pitch * state.pitch_rate;
    (clamp_unit(roll), clamp_unit(pitch))
}

/// Integrates the gyro rate into the heading estimate held in
/// `state.yaw_est_rad`, then returns `(u_yaw, new heading estimate)`.
pub fn yaw_command(state: &VehicleState, dt_s: f64, gains: &ControlGains) -> (f64, f64) {
    let yaw_est = state.yaw_est_rad + state.yaw_rate_gyro * dt_s;
    let u = gains.kp_yaw * (state.yaw_ref_rad - yaw_est) - gains.kd_yaw * state.yaw_rate_gyro;
    (clamp_unit(u), yaw_est)
}

/// The PD stack with its internal state: depth setpoint, integrated heading
/// and the previous lateral offset for the derivative term.
#[derive(Debug, Clone, PartialEq)]
pub struct Controller {
    pub gains: ControlGains,
    depth_setpoint: Option<f64>,
    yaw_est: Option<f64>,
    prev_lateral: Option<(f64, f64)>,
}

impl Controller {
    pub fn new(gains: ControlGains) -> Self {
        Self {
            gains,
            depth_setpoint: None,
            yaw_est: None,
            prev_lateral: None,
        }
    }

    pub fn depth_setpoint(&self) -> Option<f64> {
        self.depth_setpoint
    }

    pub fn yaw_estimate(&self) -> Option<f64> {
        self.yaw_est
    }

    pub fn reset(&mut self) {
        self.depth_setpoint = None;
        self.yaw_est = None;
        self.prev_lateral = None;
    }

    pub fn step(&mut self, center: &CenterEstimate, state: &VehicleState, dt_s: f64) -> ControlCommand {
        let g = &self.gains;
        let (u_roll, u_pitch) = attitude_commands(state, g);

        let heading = VehicleState {
            yaw_est_rad: self.yaw_est.unwrap_or(state.yaw_ref_rad),
            ..*state
        };
        let (u_yaw, yaw_est) = yaw_command(&heading, dt_s, g);
        self.yaw_est = Some(yaw_est);

        if center.stale {
            return ControlCommand {
                u_roll,
                u_pitch,
                u_yaw,
                stale: true,
                ..ControlCommand::default()
            };
        }

        let e_x = center.offset.x;
        let e_x_rate = match self.prev_lateral {
            Some((prev, t_prev)) => (e_x - prev) / (center.timestamp_s - t_prev).max(MIN_RATE_DT_S),
            None => 0.0,
        };
        self.prev_lateral = Some((e_x, center.timestamp_s));

        let u_x = lateral_command(e_x, e_x_rate, center.weights.0, g);
        let (u_z, h_star) =
            depth_command(state, center.offset.z, center.weights.1, g, self.depth_setpoint);
        self.depth_setpoint = Some(h_star);
        let u_y = forward_command(center, g);

        ControlCommand {
            u_x,
            u_y,
            u_z,
            u_roll,
            u_pitch,
            u_yaw,
            stale: false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn estimate(offset: Vec2, weights: (f64, f64), stale: bool) -> CenterEstimate {
        CenterEstimate {
            offset,
            var: (1.0 / weights.0 - 1.0, 1.0 / weights.1 - 1.0),
            weights,
            posterior_var: (0.0, 0.0),
            beam_separation_deg: 90.0,
            timestamp_s: 0.0,
            stale,
        }
    }

    #[test]
    fn lateral_examples() {
        let g = ControlGains {
            kp_x: 1.0,
            kd_x: 0.0,
            ..ControlGains::default()
        };
        assert_eq!(lateral_command(0.0, 0.0, 1.0, &g), 0.0);
        assert!((lateral_command(0.1, 0.0, 0.5, &g) - 0.05).abs() < 1e-15);
        let w1 = crate::uncertainty::confidence_weight(1.0);
        let w3 = crate::uncertainty::confidence_weight(3.0);
        assert_eq!((w1, w3), (0.5, 0.25));
        let ratio = lateral_command(0.1, 0.0, w3, &g) / lateral_command(0.1, 0.0, w1, &g);
        assert!((ratio - 0.5).abs() < 1e-15);
    }

    #[test]
    fn depth_gate() {
        let g = ControlGains::default();
        let s = VehicleState {
            depth_m: 3.0,
            ..VehicleState::default()
        };
        let (_, h) = depth_command(&s, -0.1, 0.9, &g, Some(5.0));
        assert!((h - 2.9).abs() < 1e-15);
        let (_, h) = depth_command(&s, -0.1, 0.2, &g, Some(5.0));
        assert_eq!(h, 5.0);
        let (u, h) = depth_command(&s, -0.1, 0.2, &g, None);
        assert_eq!((u, h), (0.0, 3.0));
    }

    #[test]
    fn forward_gate() {
        let g = ControlGains::default();
        assert_eq!(forward_command(&estimate(Vec2::new(0.02, 0.01), (1.0, 1.0), false), &g), 0.3);
        assert_eq!(forward_command(&estimate(Vec2::new(0.2, 0.0), (1.0, 1.0), false), &g), 0.0);
        assert_eq!(forward_command(&estimate(Vec2::ZERO, (1.0, 1.0), true), &g), 0.0);
        let lifted = ControlGains {
            h_trg_m: 0.1,
            ..g
        };
        assert_eq!(forward_command(&estimate(Vec2::new(0.02, 0.11), (1.0, 1.0), false), &lifted), 0.3);
        assert_eq!(forward_command(&estimate(Vec2::new(0.02, 0.01), (1.0, 1.0), false), &lifted), 0.0);
    }

    #[test]
    fn attitude_signs() {
        let g = ControlGains::default();
        assert_eq!(attitude_commands(&VehicleState::default(), &g), (0.0, 0.0));
        let s = VehicleState {
            roll_rad: 0.1,
            ..VehicleState::default()
        };
        let (roll, pitch) = attitude_commands(&s, &g);
        assert!((roll + 0.2).abs() < 1e-15);
        assert_eq!(pitch, 0.0);
    }

    #[test]
    fn yaw_integration_and_sign() {
        let g = ControlGains::default();
        let mut c = Controller::new(g.clone());
        let s = VehicleState {
            yaw_rate_gyro: 0.1,
            ..VehicleState::default()
        };
        let e = estimate(Vec2::ZERO, (1.0, 1.0), false);
        for _ in 0..10 {
            c.step(&e, &s, 0.1);
        }
        assert!((c.yaw_estimate().unwrap() - 0.1).abs() < 1e-12);

        let on = VehicleState::default();
        assert_eq!(yaw_command(&on, 0.1, &g).0, 0.0);
        let off = VehicleState {
            yaw_est_rad: 0.2,
            ..VehicleState::default()
        };
        assert!(yaw_command(&off, 0.1, &g).0 < 0.0);
    }

    #[test]
    fn centered_level_fresh_gives_forward_only() {
        let mut c = Controller::new(ControlGains::default());
        let cmd = c.step(&estimate(Vec2::ZERO, (1.0, 1.0), false), &VehicleState::default(), 0.1);
        assert_eq!(
            cmd,
            ControlCommand {
                u_y: 0.3,
                ..ControlCommand::default()
            }
        );
    }

    #[test]
    fn stale_zeroes_translation_but_keeps_attitude() {
        let mut c = Controller::new(ControlGains::default());
        let s = VehicleState {
            roll_rad: 0.2,
            pitch_rad: -0.1,
            ..VehicleState::default()
        };
        let cmd = c.step(&estimate(Vec2::new(0.1, 0.1), (1.0, 1.0), true), &s, 0.1);
        assert_eq!((cmd.u_x, cmd.u_y, cmd.u_z), (0.0, 0.0, 0.0));
        assert!(cmd.u_roll < 0.0 && cmd.u_pitch > 0.0);
        assert!(cmd.stale);
    }

    #[test]
    fn outputs_are_clamped() {
        let mut c = Controller::new(ControlGains::default());
        let s = VehicleState {
            roll_rad: 100.0,
            pitch_rad: -100.0,
            yaw_rate_gyro: 1e6,
            depth_rate: -1e9,
            ..VehicleState::default()
        };
        let cmd = c.step(&estimate(Vec2::new(1e6, -1e6), (1.0, 1.0), false), &s, 0.1);
        for u in [cmd.u_x, cmd.u_y, cmd.u_z, cmd.u_roll, cmd.u_pitch, cmd.u_yaw] {
            assert!((-1.0..=1.0).contains(&u));
        }
    }

    #[test]
    fn derivative_uses_timestamps() {
        let g = ControlGains {
            kp_x: 0.0,
            kd_x: 1.0,
            ..ControlGains::default()
        };
        let mut c = Controller::new(g);
        let s = VehicleState::default();
        let mut e = estimate(Vec2::new(0.10, 0.0), (1.0, 1.0), false);
        c.step(&e, &s, 0.5);
        e.offset.x = 0.05;
        e.timestamp_s = 0.5;
        let cmd = c.step(&e, &s, 0.5);
        assert!((cmd.u_x + 0.1).abs() < 1e-12);
    }
}
