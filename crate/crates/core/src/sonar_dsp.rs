//! First-return range extraction from single-beam sonar intensity profiles.
//!
//! Stages, in order: near-field suppression, Gaussian denoising, edge
//! enhancement with a linear ±1 taper, first-peak detection and bin-to-range
//! conversion. The detected range is then smoothed by a [`ScalarKalman`].

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::filtering::{FilterError, ScalarKalman};

/// Default threshold multiplier on the robust noise level of the enhanced
/// signal (median magnitude of its negative samples).
pub const DEFAULT_NOISE_THRESHOLD_FACTOR: f64 = 8.0;

/// Floor applied to data-derived thresholds so they stay strictly positive.
pub const MIN_PEAK_THRESHOLD: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DspError {
    #[error("profile needs at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("sample {index} is negative or not finite: {value}")]
    InvalidSample { index: usize, value: f64 },
    #[error("max range must be positive and finite, got {0}")]
    InvalidMaxRange(f64),
    #[error("azimuth must be in [0, 360), got {0}")]
    InvalidAzimuth(f64),
    #[error("near-field cut of {n0} bins leaves nothing of a {n}-bin profile")]
    NearFieldTooLong { n0: usize, n: usize },
    #[error("gaussian sigma must be positive and finite, got {0}")]
    InvalidSigma(f64),
    #[error("cannot process an empty signal")]
    EmptySignal,
    #[error("edge kernel length must be odd and >= 3, got {0}")]
    InvalidKernelLength(usize),
    #[error("edge kernel of length {kernel} is longer than the {signal}-sample signal")]
    KernelLongerThanSignal { kernel: usize, signal: usize },
    #[error("peak threshold must be positive, got {0}")]
    InvalidThreshold(f64),
    #[error("bin {bin} is outside [0, {max}]")]
    BinOutOfRange { bin: usize, max: usize },
    #[error(transparent)]
    Filter(#[from] FilterError),
}

/// One azimuthal ping: echo strength per range bin plus geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntensityProfile {
    pub samples: Vec<f64>,
    pub azimuth_deg: f64,
    pub max_range_m: f64,
    pub timestamp_s: f64,
}

impl IntensityProfile {
    pub fn new(
        samples: Vec<f64>,
        azimuth_deg: f64,
        max_range_m: f64,
        timestamp_s: f64,
    ) -> Result<Self, DspError> {
        let p = Self {
            samples,
            azimuth_deg,
            max_range_m,
            timestamp_s,
        };
        p.validate()?;
        Ok(p)
    }

    /// Builds a profile from raw ADC counts.
    pub fn from_counts(
        counts: &[u16],
        azimuth_deg: f64,
        max_range_m: f64,
        timestamp_s: f64,
    ) -> Result<Self, DspError> {
        Self::new(
            counts.iter().map(|&c| f64::from(c)).collect(),
            azimuth_deg,
            max_range_m,
            timestamp_s,
        )
    }

    pub fn n_bins(&self) -> usize {
        self.samples.len()
    }

    pub fn validate(&self) -> Result<(), DspError> {
        if self.samples.len() < 2 {
            return Err(DspError::TooFewSamples(self.samples.len()));
        }
        if let Some((index, &value)) = self
            .samples
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < 0.0)
        {
            return Err(DspError::InvalidSample { index, value });
        }
        if !(self.max_range_m > 0.0 && self.max_range_m.is_finite()) {
            return Err(DspError::InvalidMaxRange(self.max_range_m));
        }
        if !(0.0..360.0).contains(&self.azimuth_deg) {
            return Err(DspError::InvalidAzimuth(self.azimuth_deg));
        }
        Ok(())
    }
}

/// Tuning of the range-extraction chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DspParams {
    /// Leading bins to discard. `None` discards 10% of the profile.
    pub near_field_bins: Option<usize>,
    pub gauss_sigma_bins: f64,
    pub edge_kernel_len: usize,
    /// Fixed detection threshold on the edge-enhanced signal. When absent the
    /// threshold is `noise_threshold_factor` times the median magnitude of
    /// the enhanced signal's negative samples.
    pub peak_threshold: Option<f64>,
    pub noise_threshold_factor: f64,
}

impl Default for DspParams {
    fn default() -> Self {
        Self {
            near_field_bins: None,
            gauss_sigma_bins: 2.0,
            edge_kernel_len: 11,
            peak_threshold: None,
            noise_threshold_factor: DEFAULT_NOISE_THRESHOLD_FACTOR,
        }
    }
}

impl DspParams {
    pub fn near_field_for(&self, n_bins: usize) -> usize {
        self.near_field_bins.unwrap_or(n_bins / 10)
    }

    pub fn violations(&self, path: &str) -> Vec<(String, String)> {
        let mut out = Vec::new();
        if !(self.gauss_sigma_bins > 0.0 && self.gauss_sigma_bins.is_finite()) {
            out.push((format!("{path}.gauss_sigma_bins"), "must be > 0".into()));
        }
        if self.edge_kernel_len < 3 || self.edge_kernel_len % 2 == 0 {
            out.push((format!("{path}.edge_kernel_len"), "must be odd and >= 3".into()));
        }
        if let Some(t) = self.peak_threshold {
            if !(t > 0.0 && t.is_finite()) {
                out.push((format!("{path}.peak_threshold"), "must be > 0".into()));
            }
        }
        if !(self.noise_threshold_factor > 0.0 && self.noise_threshold_factor.is_finite()) {
            out.push((format!("{path}.noise_threshold_factor"), "must be > 0".into()));
        }
        out
    }
}

/// A detected first wall return.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RangeDetection {
    /// Temporally filtered range, meters.
    pub range_m: f64,
    /// Range of this ping alone, before temporal filtering.
    pub raw_range_m: f64,
    /// Peak index in the edge-enhanced signal.
    pub peak_index: usize,
    /// Bin in the original profile.
    pub source_bin: usize,
    pub azimuth_deg: f64,
}

pub fn suppress_near_field(samples: &[f64], near_field_bins: usize) -> Result<&[f64], DspError> {
    if near_field_bins >= samples.len() {
        return Err(DspError::NearFieldTooLong {
            n0: near_field_bins,
            n: samples.len(),
        });
    }
    Ok(&samples[near_field_bins..])
}

/// Unit-sum Gaussian kernel of radius `ceil(3σ)`.
pub fn gaussian_kernel(sigma_bins: f64) -> Vec<f64> {
    let radius = (3.0 * sigma_bins).ceil() as isize;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|i| {
            let x = i as f64 / sigma_bins;
            (-0.5 * x * x).exp()
        })
        .collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|w| *w /= sum);
    k
}

/// Same-length Gaussian smoothing with edge-value padding.
pub fn gaussian_smooth(signal: &[f64], sigma_bins: f64) -> Result<Vec<f64>, DspError> {
    if signal.is_empty() {
        return Err(DspError::EmptySignal);
    }
    if !(sigma_bins > 0.0 && sigma_bins.is_finite()) {
        return Err(DspError::InvalidSigma(sigma_bins));
    }
    let kernel = gaussian_kernel(sigma_bins);
    let radius = (kernel.len() / 2) as isize;
    let last = signal.len() as isize - 1;
    let out = (0..signal.len() as isize)
        .map(|i| {
            kernel
                .iter()
                .enumerate()
                .map(|(j, w)| w * signal[(i + j as isize - radius).clamp(0, last) as usize])
                .sum()
        })
        .collect();
    Ok(out)
}

/// Taper weights `w_j = 1 - 2j/(L-1)`, `j = 0..L`.
///
/// Orientation: `w_0 = +1` multiplies the *latest* sample of each window, so
/// a rising edge yields a positive response.
pub fn edge_kernel(kernel_len: usize) -> Vec<f64> {
    let span = (kernel_len - 1) as f64;
    (0..kernel_len).map(|j| 1.0 - 2.0 * j as f64 / span).collect()
}

/// Valid-mode convolution with [`edge_kernel`]:
/// `d[k] = Σ_j w_j · g[k + L - 1 - j]`, length `len - L + 1`.
pub fn edge_enhance(signal: &[f64], kernel_len: usize) -> Result<Vec<f64>, DspError> {
    if kernel_len < 3 || kernel_len % 2 == 0 {
        return Err(DspError::InvalidKernelLength(kernel_len));
    }
    if kernel_len > signal.len() {
        return Err(DspError::KernelLongerThanSignal {
            kernel: kernel_len,
            signal: signal.len(),
        });
    }
    let w = edge_kernel(kernel_len);
    let out = signal
        .windows(kernel_len)
        .map(|win| w.iter().zip(win.iter().rev()).map(|(a, b)| a * b).sum())
        .collect();
    Ok(out)
}

/// Index of the first strict local maximum above `threshold`.
///
/// A plateau counts as one peak, reported at its first index, when both of
/// its outer neighbors are lower. The first and last samples have only one
/// neighbor and are never peaks.
pub fn detect_first_peak(enhanced: &[f64], threshold: f64) -> Option<usize> {
    let n = enhanced.len();
    let mut i = 1;
    while i + 1 < n {
        let v = enhanced[i];
        let mut end = i;
        while end + 1 < n && enhanced[end + 1] == v {
            end += 1;
        }
        if end + 1 < n && enhanced[i - 1] < v && enhanced[end + 1] < v && v > threshold {
            return Some(i);
        }
        i = end + 1;
    }
    None
}

/// `factor · median(|d_k|)` over the negative samples of `enhanced`.
pub fn noise_threshold(enhanced: &[f64], factor: f64) -> f64 {
    let mut neg: Vec<f64> = enhanced.iter().filter(|v| **v < 0.0).map(|v| -v).collect();
    if neg.is_empty() {
        return MIN_PEAK_THRESHOLD;
    }
    neg.sort_by(f64::total_cmp);
    let mid = neg.len() / 2;
    let median = if neg.len() % 2 == 0 {
        0.5 * (neg[mid - 1] + neg[mid])
    } else {
        neg[mid]
    };
    (factor * median).max(MIN_PEAK_THRESHOLD)
}

/// `b / (N - 1) · r_max`.
pub fn bin_to_range(bin: usize, n_bins: usize, max_range_m: f64) -> Result<f64, DspError> {
    if n_bins < 2 {
        return Err(DspError::TooFewSamples(n_bins));
    }
    if bin > n_bins - 1 {
        return Err(DspError::BinOutOfRange {
            bin,
            max: n_bins - 1,
        });
    }
    Ok(bin as f64 / (n_bins - 1) as f64 * max_range_m)
}

/// Runs the detection chain without temporal smoothing. `range_m` and
/// `raw_range_m` are equal in the result.
pub fn detect_range(
    profile: &IntensityProfile,
    params: &DspParams,
) -> Result<Option<RangeDetection>, DspError> {
    profile.validate()?;
    let n = profile.n_bins();
    let n0 = params.near_field_for(n);
    let truncated = suppress_near_field(&profile.samples, n0)?;
    let smoothed = gaussian_smooth(truncated, params.gauss_sigma_bins)?;
    let enhanced = edge_enhance(&smoothed, params.edge_kernel_len)?;
    let threshold = match params.peak_threshold {
        Some(t) if t > 0.0 => t,
        Some(t) => return Err(DspError::InvalidThreshold(t)),
        None => noise_threshold(&enhanced, params.noise_threshold_factor),
    };
    let Some(peak_index) = detect_first_peak(&enhanced, threshold) else {
        return Ok(None);
    };
    let source_bin = n0 + peak_index + (params.edge_kernel_len - 1);
    let range = bin_to_range(source_bin, n, profile.max_range_m)?;
    Ok(Some(RangeDetection {
        range_m: range,
        raw_range_m: range,
        peak_index,
        source_bin,
        azimuth_deg: profile.azimuth_deg,
    }))
}

/// Full chain including temporal smoothing. The filter is only touched when
/// a return is detected.
pub fn extract_range(
    profile: &IntensityProfile,
    params: &DspParams,
    filter: &mut ScalarKalman,
) -> Result<Option<RangeDetection>, DspError> {
    let Some(mut det) = detect_range(profile, params)? else {
        return Ok(None);
    };
    det.range_m = filter.update_default(det.raw_range_m)?;
    Ok(Some(det))
}
