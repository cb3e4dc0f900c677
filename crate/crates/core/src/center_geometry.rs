//! Pipe-center recovery from two wall returns and a known radius.
//!
//! Two points on a circle of radius `r` admit two centers, mirror images
//! across the chord joining the points. [`candidate_centers`] computes both
//! in closed form, [`select_center`] picks the physically consistent one and
//! [`estimate_center`] runs the full measurement/filter cycle.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::filtering::{Center2DKalman, FilterError};
use crate::uncertainty::{beam_separation, confidence_weights, CovarianceModel};
use crate::Vec2;

/// Tolerance for degeneracy checks, meters.
pub const EPS_GEOM: f64 = 1e-9;

/// Nominal azimuth of the downward-facing beam in the cross-sectional plane.
pub const DOWNWARD_AZIMUTH_DEG: f64 = 270.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("pipe radius must be positive and finite, got {0}")]
    InvalidRadius(f64),
    #[error("wall points coincide; the chord is undefined")]
    DegeneratePoints,
    #[error("half chord {half_chord} m exceeds pipe radius {radius} m")]
    ChordTooLong { half_chord: f64, radius: f64 },
    #[error("wall point has non-finite coordinates")]
    NonFinite,
    #[error("wall point coincides with the robot origin")]
    ZeroLengthBeam,
    #[error(transparent)]
    Filter(#[from] FilterError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WallPointSource {
    Downward,
    Rotating,
}

/// A sonar wall return in the robot frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WallPoint {
    pub x_m: f64,
    pub z_m: f64,
    pub source: WallPointSource,
    pub azimuth_deg: f64,
}

impl WallPoint {
    pub fn downward(pos: Vec2) -> Self {
        Self {
            x_m: pos.x,
            z_m: pos.z,
            source: WallPointSource::Downward,
            azimuth_deg: DOWNWARD_AZIMUTH_DEG,
        }
    }

    pub fn rotating(pos: Vec2, azimuth_deg: f64) -> Self {
        Self {
            x_m: pos.x,
            z_m: pos.z,
            source: WallPointSource::Rotating,
            azimuth_deg,
        }
    }

    /// Wall point at `range_m` along `azimuth_deg` from the robot origin.
    pub fn from_range(range_m: f64, azimuth_deg: f64, source: WallPointSource) -> Self {
        let pos = Vec2::from_heading_deg(azimuth_deg) * range_m;
        Self {
            x_m: pos.x,
            z_m: pos.z,
            source,
            azimuth_deg,
        }
    }

    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x_m, self.z_m)
    }

    pub fn with_position(self, pos: Vec2) -> Self {
        Self {
            x_m: pos.x,
            z_m: pos.z,
            ..self
        }
    }
}

/// The two centers consistent with a chord of a circle of known radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CandidatePair {
    pub c1: Vec2,
    pub c2: Vec2,
    pub half_chord_a: f64,
    pub perp_offset_b: f64,
    pub midpoint: Vec2,
}

pub fn candidate_centers(
    p_d: &WallPoint,
    p_360: &WallPoint,
    radius_m: f64,
) -> Result<CandidatePair, GeometryError> {
    if !(radius_m > 0.0 && radius_m.is_finite()) {
        return Err(GeometryError::InvalidRadius(radius_m));
    }
    let (pd, pr) = (p_d.position(), p_360.position());
    if !pd.is_finite() || !pr.is_finite() {
        return Err(GeometryError::NonFinite);
    }
    if pd.distance(pr) <= EPS_GEOM {
        return Err(GeometryError::DegeneratePoints);
    }

    let x_a = 0.5 * (pr.x - pd.x);
    let z_a = 0.5 * (pr.z - pd.z);
    let midpoint = Vec2::new(pd.x + x_a, pd.z + z_a);
    let a = x_a.hypot(z_a);
    if a > radius_m + EPS_GEOM {
        return Err(GeometryError::ChordTooLong {
            half_chord: a,
            radius: radius_m,
        });
    }
    let b = if radius_m - a < EPS_GEOM {
        0.0
    } else {
        (radius_m * radius_m - a * a).sqrt()
    };
    let (ux, uz) = (z_a / a, -x_a / a);
    Ok(CandidatePair {
        c1: Vec2::new(midpoint.x + b * ux, midpoint.z + b * uz),
        c2: Vec2::new(midpoint.x - b * ux, midpoint.z - b * uz),
        half_chord_a: a,
        perp_offset_b: b,
        midpoint,
    })
}

/// Picks the center consistent with the robot (at the frame origin) being
/// inside the pipe. When both or neither candidate contains the origin the
/// one nearest `previous` wins; with no history the candidate nearer the
/// origin is taken, and an exact tie returns `c1`.
pub fn select_center(pair: &CandidatePair, radius_m: f64, previous: Option<Vec2>) -> Vec2 {
    let in1 = pair.c1.norm() < radius_m;
    let in2 = pair.c2.norm() < radius_m;
    if in1 != in2 {
        return if in1 { pair.c1 } else { pair.c2 };
    }
    let reference = previous.unwrap_or(Vec2::ZERO);
    if pair.c2.distance(reference) < pair.c1.distance(reference) {
        pair.c2
    } else {
        pair.c1
    }
}

/// Filtered pipe-center displacement in the robot frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CenterEstimate {
    /// Estimated position of the pipe center relative to the robot, meters.
    pub offset: Vec2,
    /// Measurement variances `(σ_x², σ_z²)` used for this update, m².
    pub var: (f64, f64),
    /// Confidence weights `1 / (1 + σ²)`.
    pub weights: (f64, f64),
    /// Posterior filter variances, m².
    pub posterior_var: (f64, f64),
    pub beam_separation_deg: f64,
    pub timestamp_s: f64,
    /// Set when the measurement was rejected and the prior is being held.
    pub stale: bool,
}

/// Runs candidate construction, selection, variance lookup and the Kalman
/// correction for one pair of wall returns.
///
/// A chord longer than the pipe diameter means one of the ranges is bad; the
/// filter is left untouched and its prior is returned with `stale` set.
pub fn estimate_center(
    p_d: &WallPoint,
    p_360: &WallPoint,
    radius_m: f64,
    filter: &mut Center2DKalman,
    cov_model: &CovarianceModel,
    timestamp_s: f64,
) -> Result<CenterEstimate, GeometryError> {
    let theta = beam_separation(p_d.position(), p_360.position())
        .map_err(|_| GeometryError::ZeroLengthBeam)?;
    let var = cov_model.variances(theta);
    let weights = confidence_weights(var);

    let pair = match candidate_centers(p_d, p_360, radius_m) {
        Ok(pair) => pair,
        Err(GeometryError::ChordTooLong { .. }) => {
            return Ok(CenterEstimate {
                offset: filter.previous().unwrap_or(Vec2::ZERO),
                var,
                weights,
                posterior_var: (filter.state_cov[0][0], filter.state_cov[1][1]),
                beam_separation_deg: theta,
                timestamp_s,
                stale: true,
            })
        }
        Err(e) => return Err(e),
    };
    let measured = select_center(&pair, radius_m, filter.previous());
    let offset = filter.update(measured, var)?;
    Ok(CenterEstimate {
        offset,
        var,
        weights,
        posterior_var: (filter.state_cov[0][0], filter.state_cov[1][1]),
        beam_separation_deg: theta,
        timestamp_s,
        stale: false,
    })
}
