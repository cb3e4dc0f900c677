//! Beam-geometry-dependent measurement variance and control confidence.
//!
//! The center measurement is well conditioned when the two sonar returns are
//! roughly orthogonal as seen from the robot, and degenerates when they are
//! colinear. The variance per axis is a mixture of three Gaussians in the
//! beam-separation angle, centered at 0°, 180° and 360°.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Vec2;

/// Lower bound on σ², m². Keeps the Kalman update well posed when very
/// narrow components underflow to zero far from their centers.
pub const MIN_VARIANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum UncertaintyError {
    #[error("beam vector has zero length")]
    ZeroLengthBeam,
}

/// Counterclockwise angle, in degrees `[0, 360)`, from the downward-beam
/// return `p_d` to the rotating-beam return `p_360`, measured at the robot
/// origin.
pub fn beam_separation(p_d: Vec2, p_360: Vec2) -> Result<f64, UncertaintyError> {
    if p_d.norm() == 0.0 || p_360.norm() == 0.0 {
        return Err(UncertaintyError::ZeroLengthBeam);
    }
    let cross = p_d.x * p_360.z - p_d.z * p_360.x;
    let dot = p_d.dot(p_360);
    let theta = cross.atan2(dot).to_degrees().rem_euclid(360.0);
    // rem_euclid can round a tiny negative up to exactly 360
    Ok(if theta >= 360.0 { 0.0 } else { theta })
}

/// Parameters of one axis' variance curve σ²(θ).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VarianceProfile {
    /// Overall scale A, m².
    pub amplitude_a: f64,
    /// Width of the 0° component, degrees.
    pub width_w1_deg: f64,
    /// Width of the 180° and 360° components, degrees.
    pub width_w2_deg: f64,
}

impl Default for VarianceProfile {
    fn default() -> Self {
        Self {
            amplitude_a: 0.05,
            width_w1_deg: 30.0,
            width_w2_deg: 30.0,
        }
    }
}

impl VarianceProfile {
    pub fn variance_at(&self, theta_deg: f64) -> f64 {
        let g = |center: f64, w: f64| {
            let d = theta_deg - center;
            (-(d * d) / (2.0 * w * w)).exp()
        };
        let v = self.amplitude_a
            * (g(0.0, self.width_w1_deg) + g(180.0, self.width_w2_deg) + g(360.0, self.width_w2_deg));
        v.max(MIN_VARIANCE)
    }

    pub fn violations(&self, path: &str) -> Vec<(String, String)> {
        let mut out = Vec::new();
        if !(self.amplitude_a > 0.0 && self.amplitude_a.is_finite()) {
            out.push((format!("{path}.amplitude_a"), "must be > 0".into()));
        }
        if !(self.width_w1_deg > 0.0 && self.width_w1_deg.is_finite()) {
            out.push((format!("{path}.width_w1_deg"), "must be > 0".into()));
        }
        if !(self.width_w2_deg > 0.0 && self.width_w2_deg.is_finite()) {
            out.push((format!("{path}.width_w2_deg"), "must be > 0".into()));
        }
        out
    }
}

/// Per-axis variance models for the center measurement.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CovarianceModel {
    pub x: VarianceProfile,
    pub z: VarianceProfile,
}

impl CovarianceModel {
    pub fn uniform(profile: VarianceProfile) -> Self {
        Self { x: profile, z: profile }
    }

    /// `(σ_x², σ_z²)` at beam separation `theta_deg`.
    pub fn variances(&self, theta_deg: f64) -> (f64, f64) {
        (self.x.variance_at(theta_deg), self.z.variance_at(theta_deg))
    }
}

/// `w = 1 / (1 + σ²)` per axis.
pub fn confidence_weights(var: (f64, f64)) -> (f64, f64) {
    (confidence_weight(var.0), confidence_weight(var.1))
}

pub fn confidence_weight(var: f64) -> f64 {
    1.0 / (1.0 + var)
}
