//! Minimal-sensing centering stack for free-swimming robots in flooded pipes.
//!
//! The crate is organised along the processing chain:
//!
//! * [`sonar_dsp`] turns a raw single-beam intensity profile into a wall range.
//! * [`filtering`] holds the scalar and 2D Kalman smoothers.
//! * [`center_geometry`] recovers the pipe center from two wall points and a
//!   known radius.
//! * [`uncertainty`] maps beam geometry to measurement variance and control
//!   confidence.
//! * [`control`] is the six-DOF confidence-weighted PD stack.
//! * [`pipe_sim`] is a seeded 2D point-robot simulator and synthetic profile
//!   generator used for benchmarking.
//! * [`cli_io`] contains the configuration schema, file formats and command
//!   drivers behind the `pipenav` binary.
//!
//! All coordinates live in the robot cross-sectional plane `(X_r, Z_r)`:
//! `x` is lateral, `z` is vertical (up).

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

pub mod center_geometry;
pub mod cli_io;
pub mod control;
pub mod filtering;
pub mod pipe_sim;
pub mod sonar_dsp;
pub mod uncertainty;

pub use center_geometry::{
    candidate_centers, estimate_center, select_center, CandidatePair, CenterEstimate,
    GeometryError, WallPoint, WallPointSource,
};
pub use control::{ControlCommand, ControlGains, Controller, VehicleState};
pub use filtering::{Center2DKalman, FilterError, ScalarKalman};
pub use pipe_sim::{SimConfig, SimError, TrialResult};
pub use sonar_dsp::{DspError, DspParams, IntensityProfile, RangeDetection};
pub use uncertainty::{CovarianceModel, VarianceProfile};

/// A point or displacement in the cross-sectional plane, meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub z: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, z: 0.0 };

    pub const fn new(x: f64, z: f64) -> Self {
        Self { x, z }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.z)
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.z * other.z
    }

    pub fn distance(self, other: Vec2) -> f64 {
        (self - other).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.z.is_finite()
    }

    /// Unit vector at `deg` degrees counterclockwise from +X toward +Z.
    pub fn from_heading_deg(deg: f64) -> Self {
        let (s, c) = deg.to_radians().sin_cos();
        Self { x: c, z: s }
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.z + rhs.z)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.z - rhs.z)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, k: f64) -> Vec2 {
        Vec2::new(self.x * k, self.z * k)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.z)
    }
}
