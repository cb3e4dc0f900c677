//! Synthetic single-beam intensity profiles with known wall range.
//!
//! A profile is a noisy baseline, an exponentially decaying transducer
//! ring-down over the first bins, a Gaussian echo centered on the bin of the
//! true wall range and optional later multipath echoes.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::SimError;
use crate::sonar_dsp::IntensityProfile;

/// Ring-down decays by `e^-RINGDOWN_DECAY` across `ringdown_bins`.
const RINGDOWN_DECAY: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Echo {
    pub range_m: f64,
    pub amplitude: f64,
}

/// Everything about a ping except the ranges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EchoModel {
    pub n_bins: usize,
    pub max_range_m: f64,
    /// Standard deviation of the Gaussian echo, bins.
    pub echo_width_bins: f64,
    pub echo_amplitude: f64,
    pub ringdown_bins: usize,
    pub ringdown_amplitude: f64,
    pub noise_std: f64,
    pub baseline: f64,
}

impl Default for EchoModel {
    fn default() -> Self {
        Self {
            n_bins: 1200,
            max_range_m: 2.0,
            echo_width_bins: 3.5,
            echo_amplitude: 80.0,
            ringdown_bins: 50,
            ringdown_amplitude: 150.0,
            noise_std: 3.0,
            baseline: 5.0,
        }
    }
}

impl EchoModel {
    pub fn violations(&self, path: &str) -> Vec<(String, String)> {
        let mut out = Vec::new();
        if self.n_bins < 2 {
            out.push((format!("{path}.n_bins"), "must be >= 2".into()));
        }
        if !(self.max_range_m > 0.0 && self.max_range_m.is_finite()) {
            out.push((format!("{path}.max_range_m"), "must be > 0".into()));
        }
        if !(self.echo_width_bins > 0.0 && self.echo_width_bins.is_finite()) {
            out.push((format!("{path}.echo_width_bins"), "must be > 0".into()));
        }
        if !(self.echo_amplitude > 0.0 && self.echo_amplitude.is_finite()) {
            out.push((format!("{path}.echo_amplitude"), "must be > 0".into()));
        }
        if !(self.ringdown_amplitude >= 0.0 && self.ringdown_amplitude.is_finite()) {
            out.push((format!("{path}.ringdown_amplitude"), "must be >= 0".into()));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            out.push((format!("{path}.noise_std"), "must be >= 0".into()));
        }
        if !(self.baseline >= 0.0 && self.baseline.is_finite()) {
            out.push((format!("{path}.baseline"), "must be >= 0".into()));
        }
        out
    }

    pub fn spec_for(&self, true_range_m: f64) -> SyntheticProfileSpec {
        SyntheticProfileSpec {
            true_range_m,
            model: self.clone(),
            multipath: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticProfileSpec {
    pub true_range_m: f64,
    #[serde(flatten)]
    pub model: EchoModel,
    #[serde(default)]
    pub multipath: Vec<Echo>,
}

impl SyntheticProfileSpec {
    pub fn validate(&self) -> Result<(), SimError> {
        let mut v = self.model.violations("spec");
        let m = &self.model;
        if !(self.true_range_m > 0.0 && self.true_range_m <= m.max_range_m) {
            v.push(("spec.true_range_m".into(), "must be in (0, max_range_m]".into()));
        }
        for (i, e) in self.multipath.iter().enumerate() {
            if !(e.range_m > self.true_range_m && e.range_m <= m.max_range_m) {
                v.push((
                    format!("spec.multipath[{i}].range_m"),
                    "must lie after the primary echo and within max_range_m".into(),
                ));
            }
            if !(e.amplitude > 0.0 && e.amplitude.is_finite()) {
                v.push((format!("spec.multipath[{i}].amplitude"), "must be > 0".into()));
            }
        }
        if v.is_empty() {
            Ok(())
        } else {
            Err(SimError::InvalidSpec(v))
        }
    }

    /// Fractional bin of a range under this spec's binning.
    pub fn bin_of(&self, range_m: f64) -> f64 {
        range_m / self.model.max_range_m * (self.model.n_bins - 1) as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticProfile {
    pub profile: IntensityProfile,
    pub true_range_m: f64,
    /// Fractional bin at the center of the primary echo.
    pub true_bin: f64,
}

/// Renders one profile. Exactly `n_bins` normal draws are consumed from
/// `rng` whatever the noise level.
pub fn synth_profile<R: Rng + ?Sized>(
    spec: &SyntheticProfileSpec,
    azimuth_deg: f64,
    timestamp_s: f64,
    rng: &mut R,
) -> Result<SyntheticProfile, SimError> {
    spec.validate()?;
    let m = &spec.model;
    let true_bin = spec.bin_of(spec.true_range_m);
    let echoes: Vec<(f64, f64)> = std::iter::once((true_bin, m.echo_amplitude))
        .chain(spec.multipath.iter().map(|e| (spec.bin_of(e.range_m), e.amplitude)))
        .collect();
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let samples = (0..m.n_bins)
        .map(|i| {
            let x = i as f64;
            let mut s = m.baseline;
            if i < m.ringdown_bins {
                s += m.ringdown_amplitude * (-RINGDOWN_DECAY * x / m.ringdown_bins as f64).exp();
            }
            for &(center, amp) in &echoes {
                let z = (x - center) / m.echo_width_bins;
                s += amp * (-0.5 * z * z).exp();
            }
            s += m.noise_std * unit.sample(rng);
            s.max(0.0)
        })
        .collect();
    let profile = IntensityProfile::new(samples, azimuth_deg.rem_euclid(360.0), m.max_range_m, timestamp_s)
        .map_err(SimError::Dsp)?;
    Ok(SyntheticProfile {
        profile,
        true_range_m: spec.true_range_m,
        true_bin,
    })
}

/// Recipe for a labeled corpus of independent pings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusSpec {
    pub count: usize,
    pub seed: u64,
    pub model: EchoModel,
    /// Wall ranges are drawn uniformly in
    /// `[range_min_frac, range_max_frac] · max_range_m`.
    pub range_min_frac: f64,
    pub range_max_frac: f64,
    /// Primary echo amplitude is scaled by a uniform draw in this interval.
    pub amplitude_jitter: (f64, f64),
    /// Fraction of profiles that carry one multipath echo.
    pub multipath_fraction: f64,
    /// Multipath range as a multiple of the wall range.
    pub multipath_range_factor: (f64, f64),
    /// Multipath amplitude relative to the primary echo.
    pub multipath_amplitude_frac: (f64, f64),
    /// Ping rate used to stamp timestamps, Hz.
    pub ping_rate_hz: f64,
    pub azimuth_step_deg: f64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            count: 1000,
            seed: 42,
            model: EchoModel::default(),
            range_min_frac: 0.05,
            range_max_frac: 0.95,
            amplitude_jitter: (0.6, 1.0),
            multipath_fraction: 0.2,
            multipath_range_factor: (1.5, 3.0),
            multipath_amplitude_frac: (0.3, 1.0),
            ping_rate_hz: 15.0,
            azimuth_step_deg: 9.0,
        }
    }
}

impl CorpusSpec {
    pub fn violations(&self) -> Vec<(String, String)> {
        let mut v = self.model.violations("model");
        if !(0.0 < self.range_min_frac
            && self.range_min_frac <= self.range_max_frac
            && self.range_max_frac <= 1.0)
        {
            v.push((
                "range_min_frac".into(),
                "need 0 < range_min_frac <= range_max_frac <= 1".into(),
            ));
        }
        let pair_ok = |p: (f64, f64), lo: f64| p.0 > lo && p.0 <= p.1 && p.1.is_finite();
        if !pair_ok(self.amplitude_jitter, 0.0) {
            v.push(("amplitude_jitter".into(), "need 0 < lo <= hi".into()));
        }
        if !(0.0..=1.0).contains(&self.multipath_fraction) {
            v.push(("multipath_fraction".into(), "must be in [0, 1]".into()));
        }
        if !pair_ok(self.multipath_range_factor, 1.0) {
            v.push(("multipath_range_factor".into(), "need 1 < lo <= hi".into()));
        }
        if !pair_ok(self.multipath_amplitude_frac, 0.0) {
            v.push(("multipath_amplitude_frac".into(), "need 0 < lo <= hi".into()));
        }
        if !(self.ping_rate_hz > 0.0 && self.ping_rate_hz.is_finite()) {
            v.push(("ping_rate_hz".into(), "must be > 0".into()));
        }
        if !(self.azimuth_step_deg > 0.0 && self.azimuth_step_deg <= 360.0) {
            v.push(("azimuth_step_deg".into(), "must be in (0, 360]".into()));
        }
        v
    }
}

/// A generated ping with its label.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledProfile {
    pub profile: IntensityProfile,
    pub label_range_m: f64,
    pub has_multipath: bool,
}

/// Draws `count` independent labeled profiles. Each profile's randomness
/// comes from its own stream so the corpus is reproducible per index.
pub fn generate_corpus(spec: &CorpusSpec, count: usize, seed: u64) -> Result<Vec<LabeledProfile>, SimError> {
    let v = spec.violations();
    if !v.is_empty() {
        return Err(SimError::InvalidSpec(v));
    }
    let m = &spec.model;
    (0..count)
        .map(|i| {
            let mut rng = super::trial_rng(seed, i as u64);
            let frac = rng.random_range(spec.range_min_frac..=spec.range_max_frac);
            let range = frac * m.max_range_m;
            let jitter = rng.random_range(spec.amplitude_jitter.0..=spec.amplitude_jitter.1);
            let mut ps = m.spec_for(range);
            ps.model.echo_amplitude = m.echo_amplitude * jitter;

            let wants_multipath = rng.random::<f64>() < spec.multipath_fraction;
            let factor = rng.random_range(spec.multipath_range_factor.0..=spec.multipath_range_factor.1);
            let amp_frac =
                rng.random_range(spec.multipath_amplitude_frac.0..=spec.multipath_amplitude_frac.1);
            // Keep the echo a few widths inside the window; ranges near the
            // far end get squeezed between the wall echo and r_max.
            let bin = m.max_range_m / (m.n_bins - 1) as f64;
            let lo = range + 6.0 * m.echo_width_bins * bin;
            let hi = m.max_range_m - 3.0 * m.echo_width_bins * bin;
            let mut has_multipath = false;
            if wants_multipath && lo < hi {
                let mp_range = (range * factor).clamp(lo, hi);
                ps.multipath.push(Echo {
                    range_m: mp_range,
                    amplitude: ps.model.echo_amplitude * amp_frac,
                });
                has_multipath = true;
            }
            let azimuth = (i as f64 * spec.azimuth_step_deg).rem_euclid(360.0);
            let t = i as f64 / spec.ping_rate_hz;
            let sp = synth_profile(&ps, azimuth, t, &mut rng)?;
            Ok(LabeledProfile {
                profile: sp.profile,
                label_range_m: range,
                has_multipath,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sonar_dsp::{detect_range, DspParams};

    fn rng() -> rand_chacha::ChaCha8Rng {
        super::super::trial_rng(7, 0)
    }

    fn params() -> DspParams {
        DspParams {
            near_field_bins: Some(60),
            ..DspParams::default()
        }
    }

    #[test]
    fn noise_free_recovery_within_two_bins() {
        let model = EchoModel {
            noise_std: 0.0,
            ..EchoModel::default()
        };
        let bin = model.max_range_m / (model.n_bins - 1) as f64;
        for r in [0.2, 0.5, 0.77, 1.3, 1.8] {
            let sp = synth_profile(&model.spec_for(r), 0.0, 0.0, &mut rng()).unwrap();
            let det = detect_range(&sp.profile, &params()).unwrap().unwrap();
            assert!((det.range_m - r).abs() <= 2.0 * bin, "range {r} got {}", det.range_m);
        }
    }

    #[test]
    fn multipath_does_not_capture_first_return() {
        let model = EchoModel::default();
        let mut spec = model.spec_for(0.4);
        spec.multipath.push(Echo {
            range_m: 1.2,
            amplitude: 3.0 * model.echo_amplitude,
        });
        let sp = synth_profile(&spec, 0.0, 0.0, &mut rng()).unwrap();
        let det = detect_range(&sp.profile, &params()).unwrap().unwrap();
        let bin = model.max_range_m / (model.n_bins - 1) as f64;
        assert!((det.range_m - 0.4).abs() <= 2.0 * bin);
    }

    #[test]
    fn echo_in_ring_down_is_suppressed() {
        let model = EchoModel {
            noise_std: 0.0,
            ..EchoModel::default()
        };
        // bin ~30, inside the default 10% (120 bin) cut
        let sp = synth_profile(&model.spec_for(0.05), 0.0, 0.0, &mut rng()).unwrap();
        assert_eq!(detect_range(&sp.profile, &DspParams::default()).unwrap(), None);
    }

    #[test]
    fn spec_validation() {
        let model = EchoModel::default();
        assert!(model.spec_for(0.0).validate().is_err());
        assert!(model.spec_for(2.5).validate().is_err());
        let mut s = model.spec_for(1.0);
        s.multipath.push(Echo {
            range_m: 0.5,
            amplitude: 1.0,
        });
        let Err(SimError::InvalidSpec(v)) = s.validate() else {
            panic!("expected invalid spec")
        };
        assert_eq!(v[0].0, "spec.multipath[0].range_m");
    }

    #[test]
    fn corpus_respects_bounds_and_is_reproducible() {
        let spec = CorpusSpec::default();
        let a = generate_corpus(&spec, 200, 11).unwrap();
        let b = generate_corpus(&spec, 200, 11).unwrap();
        assert_eq!(a, b);
        for p in &a {
            assert!(p.label_range_m >= 0.05 * 2.0 - 1e-12 && p.label_range_m <= 0.95 * 2.0 + 1e-12);
        }
        let with_mp = a.iter().filter(|p| p.has_multipath).count();
        assert!((20..=60).contains(&with_mp), "{with_mp}");
        assert!(generate_corpus(&spec, 0, 1).unwrap().is_empty());
    }
}
