//! Discrete Kalman smoothers with a static (identity-transition) state model.
//!
//! [`ScalarKalman`] smooths successive sonar ranges. [`Center2DKalman`]
//! smooths the pipe-center measurement in the robot frame. Both use the
//! predict step `P += Q` followed by the usual gain/correct step, and
//! initialise from the first measurement.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Vec2;

/// Default per-step process noise for both filters, m².
pub const DEFAULT_PROCESS_NOISE: f64 = 1e-4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FilterError {
    #[error("measurement is not finite: {0}")]
    NonFiniteMeasurement(f64),
    #[error("measurement variance must be positive and finite, got {0}")]
    InvalidVariance(f64),
}

/// One-dimensional Kalman filter over a constant state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarKalman {
    pub state_mean: f64,
    pub state_var: f64,
    pub process_noise_q: f64,
    pub default_meas_var_r: f64,
    pub initialized: bool,
}

impl Default for ScalarKalman {
    fn default() -> Self {
        Self::new(DEFAULT_PROCESS_NOISE, 1e-3)
    }
}

impl ScalarKalman {
    pub fn new(process_noise_q: f64, default_meas_var_r: f64) -> Self {
        Self {
            state_mean: 0.0,
            state_var: 0.0,
            process_noise_q,
            default_meas_var_r,
            initialized: false,
        }
    }

    /// Folds `measurement` with variance `meas_var` into the state and
    /// returns the posterior mean.
    pub fn update(&mut self, measurement: f64, meas_var: f64) -> Result<f64, FilterError> {
        if !measurement.is_finite() {
            return Err(FilterError::NonFiniteMeasurement(measurement));
        }
        if !(meas_var > 0.0) || !meas_var.is_finite() {
            return Err(FilterError::InvalidVariance(meas_var));
        }
        if !self.initialized {
            self.state_mean = measurement;
            self.state_var = meas_var;
            self.initialized = true;
            return Ok(self.state_mean);
        }
        (self.state_mean, self.state_var) =
            scalar_step(self.state_mean, self.state_var, self.process_noise_q, measurement, meas_var);
        Ok(self.state_mean)
    }

    /// Update using the filter's default measurement variance.
    pub fn update_default(&mut self, measurement: f64) -> Result<f64, FilterError> {
        self.update(measurement, self.default_meas_var_r)
    }

    pub fn reset(&mut self) {
        self.state_mean = 0.0;
        self.state_var = 0.0;
        self.initialized = false;
    }
}

/// One predict/correct cycle of the static scalar model; returns the
/// posterior `(mean, var)`.
fn scalar_step(mean: f64, var: f64, q: f64, z: f64, r: f64) -> (f64, f64) {
    let predicted = var + q;
    let gain = predicted / (predicted + r);
    (mean + gain * (z - mean), predicted * (1.0 - gain))
}

/// Row-major 2×2 matrix.
pub type Mat2 = [[f64; 2]; 2];

pub fn diag2(a: f64, b: f64) -> Mat2 {
    [[a, 0.0], [0.0, b]]
}

/// Kalman filter over the 2D pipe-center position `(x, z)`.
///
/// Measurement noise is always diagonal. When the predicted covariance is
/// diagonal too (diagonal process noise and a diagonal start, which is the
/// case throughout the stack) the gain is diagonal and the update is exactly
/// two independent [`ScalarKalman`] updates, which is how it is computed.
/// A non-diagonal state covariance takes the general 2×2 path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Center2DKalman {
    pub state_mean: Vec2,
    pub state_cov: Mat2,
    pub process_noise_q: Mat2,
    pub initialized: bool,
}

impl Default for Center2DKalman {
    fn default() -> Self {
        Self::new(diag2(DEFAULT_PROCESS_NOISE, DEFAULT_PROCESS_NOISE))
    }
}

impl Center2DKalman {
    pub fn new(process_noise_q: Mat2) -> Self {
        Self {
            state_mean: Vec2::ZERO,
            state_cov: [[0.0; 2]; 2],
            process_noise_q,
            initialized: false,
        }
    }

    /// Previous center estimate, if the filter has been initialised.
    pub fn previous(&self) -> Option<Vec2> {
        self.initialized.then_some(self.state_mean)
    }

    pub fn update(&mut self, measurement: Vec2, meas_var: (f64, f64)) -> Result<Vec2, FilterError> {
        for v in [measurement.x, measurement.z] {
            if !v.is_finite() {
                return Err(FilterError::NonFiniteMeasurement(v));
            }
        }
        for v in [meas_var.0, meas_var.1] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(FilterError::InvalidVariance(v));
            }
        }
        if !self.initialized {
            self.state_mean = measurement;
            self.state_cov = diag2(meas_var.0, meas_var.1);
            self.initialized = true;
            return Ok(self.state_mean);
        }

        let q = self.process_noise_q;
        let p = self.state_cov;
        let pp = [
            [p[0][0] + q[0][0], p[0][1] + q[0][1]],
            [p[1][0] + q[1][0], p[1][1] + q[1][1]],
        ];
        if pp[0][1] == 0.0 && pp[1][0] == 0.0 {
            let (mx, vx) = scalar_step(self.state_mean.x, p[0][0], q[0][0], measurement.x, meas_var.0);
            let (mz, vz) = scalar_step(self.state_mean.z, p[1][1], q[1][1], measurement.z, meas_var.1);
            self.state_mean = Vec2::new(mx, mz);
            self.state_cov = diag2(vx, vz);
            return Ok(self.state_mean);
        }

        // S = P + R, K = P S^-1
        let s = [[pp[0][0] + meas_var.0, pp[0][1]], [pp[1][0], pp[1][1] + meas_var.1]];
        let det = s[0][0] * s[1][1] - s[0][1] * s[1][0];
        let s_inv = [[s[1][1] / det, -s[0][1] / det], [-s[1][0] / det, s[0][0] / det]];
        let k = mat_mul(pp, s_inv);

        let innov = measurement - self.state_mean;
        self.state_mean = self.state_mean
            + Vec2::new(
                k[0][0] * innov.x + k[0][1] * innov.z,
                k[1][0] * innov.x + k[1][1] * innov.z,
            );

        // P = (I - K) P_pred, symmetrised
        let i_k = [[1.0 - k[0][0], -k[0][1]], [-k[1][0], 1.0 - k[1][1]]];
        let mut post = mat_mul(i_k, pp);
        let off = 0.5 * (post[0][1] + post[1][0]);
        post[0][1] = off;
        post[1][0] = off;
        self.state_cov = post;
        Ok(self.state_mean)
    }

    pub fn reset(&mut self) {
        self.state_mean = Vec2::ZERO;
        self.state_cov = [[0.0; 2]; 2];
        self.initialized = false;
    }
}

fn mat_mul(a: Mat2, b: Mat2) -> Mat2 {
    [
        [
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
        ],
        [
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        ],
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn primed(mean: f64, var: f64, q: f64) -> ScalarKalman {
        ScalarKalman {
            state_mean: mean,
            state_var: var,
            process_noise_q: q,
            default_meas_var_r: 1.0,
            initialized: true,
        }
    }

    #[test]
    fn scalar_textbook_update() {
        let mut f = primed(1.0, 1.0, 0.0);
        let m = f.update(2.0, 1.0).unwrap();
        assert!((m - 1.5).abs() < 1e-15);
        assert!((f.state_var - 0.5).abs() < 1e-15);
    }

    #[test]
    fn scalar_first_measurement_initialises() {
        let mut f = ScalarKalman::new(1e-4, 0.1);
        assert_eq!(f.update(3.3, 0.1).unwrap(), 3.3);
        assert!(f.initialized);
        assert_eq!(f.state_var, 0.1);
    }

    #[test]
    fn scalar_constant_stream_converges_monotonically() {
        let mut f = ScalarKalman::new(0.0, 0.5);
        f.update(0.0, 0.5).unwrap();
        let c = 2.0;
        let (mut last_err, mut last_var) = (f64::INFINITY, f64::INFINITY);
        for _ in 0..200 {
            let m = f.update(c, 0.5).unwrap();
            let err = (m - c).abs();
            assert!(err < last_err);
            assert!(f.state_var < last_var);
            last_err = err;
            last_var = f.state_var;
        }
        assert!(last_err < 0.01);
        assert!(last_var < 0.01);
    }

    #[test]
    fn scalar_rejects_bad_inputs() {
        let mut f = ScalarKalman::default();
        assert!(matches!(f.update(f64::NAN, 1.0), Err(FilterError::NonFiniteMeasurement(_))));
        assert!(matches!(f.update(1.0, 0.0), Err(FilterError::InvalidVariance(_))));
        assert!(!f.initialized);
    }

    #[test]
    fn reset_clears_state() {
        let mut f = ScalarKalman::default();
        f.update(1.0, 1.0).unwrap();
        f.reset();
        assert!(!f.initialized);
        let mut c = Center2DKalman::default();
        c.update(Vec2::new(1.0, 1.0), (1.0, 1.0)).unwrap();
        c.reset();
        assert!(c.previous().is_none());
    }

    #[test]
    fn center_decoupled_axes() {
        let mut f = Center2DKalman {
            state_mean: Vec2::ZERO,
            state_cov: diag2(1.0, 1.0),
            process_noise_q: diag2(0.0, 0.0),
            initialized: true,
        };
        let m = f.update(Vec2::new(1.0, 0.0), (1.0, 1.0)).unwrap();
        assert!((m.x - 0.5).abs() < 1e-15);
        assert_eq!(m.z, 0.0);
        assert!((f.state_cov[0][0] - 0.5).abs() < 1e-15);
        assert!((f.state_cov[1][1] - 0.5).abs() < 1e-15);
        assert_eq!(f.state_cov[0][1], 0.0);
    }

    #[test]
    fn center_huge_variance_is_ignored() {
        let mut f = Center2DKalman {
            state_mean: Vec2::ZERO,
            state_cov: diag2(0.01, 0.01),
            process_noise_q: diag2(1e-4, 1e-4),
            initialized: true,
        };
        let innov = 0.3;
        let m = f.update(Vec2::new(innov, 0.0), (1e9, 0.01)).unwrap();
        assert!(m.x.abs() < 1e-6 * innov);
    }

    #[test]
    fn center_repeated_measurements_converge() {
        let target = Vec2::new(0.12, -0.04);
        let mut fresh = Center2DKalman::default();
        for _ in 0..10 {
            fresh.update(target, (0.01, 0.01)).unwrap();
        }
        assert!(fresh.state_mean.distance(target) < 1e-3);

        // From an offset prior the residual after 10 steps is the product of
        // (1 - K_i) along the variance recursion, iterated here by hand.
        let mut primed = Center2DKalman::default();
        primed.update(Vec2::ZERO, (0.01, 0.01)).unwrap();
        let (mut p, mut residual) = (0.01_f64, 1.0_f64);
        for _ in 0..10 {
            primed.update(target, (0.01, 0.01)).unwrap();
            let pred = p + 1e-4;
            let k = pred / (pred + 0.01);
            residual *= 1.0 - k;
            p = pred * (1.0 - k);
        }
        let expected = target * (1.0 - residual);
        assert!(primed.state_mean.distance(expected) < 1e-12);
        assert!(residual < 0.1);
    }

    #[test]
    fn center_correlated_prior_matches_information_form() {
        // Information form: P+ = (P^-1 + R^-1)^-1, m+ = P+ (P^-1 m + R^-1 z).
        // With P = [[1, .5], [.5, 1]], R = I, m = 0, z = (1, 0) that gives
        // P+ = [[7, 2], [2, 7]] / 15 and m+ = (7, 2) / 15.
        let mut f = Center2DKalman::new([[0.0; 2]; 2]);
        f.update(Vec2::ZERO, (1.0, 1.0)).unwrap();
        f.state_cov = [[1.0, 0.5], [0.5, 1.0]];
        let m = f.update(Vec2::new(1.0, 0.0), (1.0, 1.0)).unwrap();
        assert!((m.x - 7.0 / 15.0).abs() < 1e-15);
        assert!((m.z - 2.0 / 15.0).abs() < 1e-15);
        let expected = [[7.0 / 15.0, 2.0 / 15.0], [2.0 / 15.0, 7.0 / 15.0]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((f.state_cov[i][j] - expected[i][j]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn center_rejects_non_finite() {
        let mut f = Center2DKalman::default();
        assert!(f.update(Vec2::new(f64::INFINITY, 0.0), (1.0, 1.0)).is_err());
        assert!(f.update(Vec2::new(0.0, 0.0), (1.0, -1.0)).is_err());
    }
}
