//! Active stimulus synthesis.
//!
//! Four stimulus kinds are supported: an exponential (logarithmic) sine
//! sweep, uniform white noise, band-limited white noise and a pure tone.
//! Synthesis is a pure function of [`SoundSpec`]; noise kinds draw from a
//! ChaCha8 stream keyed by the spec's seed, so a stimulus can be generated
//! once and replayed bit-identically for every recording.

pub mod filter;

use std::f64::consts::PI;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng;

pub const DEFAULT_SAMPLE_RATE: u32 = 48_000;

/// RMS of a uniform distribution on [-1, 1].
pub const REFERENCE_NOISE_RMS: f64 = 0.577_350_269_189_625_8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SignalError {
    #[error("invalid sound spec: `{field}` {reason}")]
    InvalidSpec { field: &'static str, reason: String },
    #[error("invalid band {low_hz} Hz - {high_hz} Hz (Nyquist {nyquist_hz} Hz)")]
    InvalidBand {
        low_hz: f64,
        high_hz: f64,
        nyquist_hz: f64,
    },
    #[error("volume fraction {0} outside (0, 1]")]
    InvalidFraction(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SoundKind {
    LogSweep,
    WhiteNoise,
    BandNoise,
    Sine,
}

impl SoundKind {
    pub const ALL: [SoundKind; 4] = [
        SoundKind::LogSweep,
        SoundKind::WhiteNoise,
        SoundKind::BandNoise,
        SoundKind::Sine,
    ];

    pub fn is_noise(self) -> bool {
        matches!(self, SoundKind::WhiteNoise | SoundKind::BandNoise)
    }

    pub fn name(self) -> &'static str {
        match self {
            SoundKind::LogSweep => "log-sweep",
            SoundKind::WhiteNoise => "white-noise",
            SoundKind::BandNoise => "band-noise",
            SoundKind::Sine => "sine",
        }
    }
}

impl fmt::Display for SoundKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for SoundKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "log-sweep" | "sweep" => Ok(SoundKind::LogSweep),
            "white-noise" | "noise" => Ok(SoundKind::WhiteNoise),
            "band-noise" => Ok(SoundKind::BandNoise),
            "sine" => Ok(SoundKind::Sine),
            other => Err(format!("unknown sound kind `{other}`")),
        }
    }
}

/// Parametric description of an active stimulus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SoundSpec {
    pub kind: SoundKind,
    pub duration_s: f64,
    pub sample_rate_hz: u32,
    pub volume: f64,
    pub seed: u64,
    pub f_start_hz: f64,
    pub f_end_hz: f64,
    pub band_low_hz: f64,
    pub band_high_hz: f64,
    pub sine_freq_hz: f64,
}

impl Default for SoundSpec {
    fn default() -> Self {
        Self {
            kind: SoundKind::LogSweep,
            duration_s: 1.0,
            sample_rate_hz: DEFAULT_SAMPLE_RATE,
            volume: 1.0,
            seed: 0,
            f_start_hz: 20.0,
            f_end_hz: 20_000.0,
            band_low_hz: 2_000.0,
            band_high_hz: 4_000.0,
            sine_freq_hz: 2_580.0,
        }
    }
}

impl SoundSpec {
    pub fn new(kind: SoundKind, duration_s: f64) -> Self {
        Self {
            kind,
            duration_s,
            ..Self::default()
        }
    }

    pub fn log_sweep(duration_s: f64) -> Self {
        Self::new(SoundKind::LogSweep, duration_s)
    }

    pub fn white_noise(duration_s: f64, seed: u64) -> Self {
        Self {
            seed,
            ..Self::new(SoundKind::WhiteNoise, duration_s)
        }
    }

    pub fn band_noise(duration_s: f64, seed: u64) -> Self {
        Self {
            seed,
            ..Self::new(SoundKind::BandNoise, duration_s)
        }
    }

    pub fn sine(freq_hz: f64, duration_s: f64) -> Self {
        Self {
            sine_freq_hz: freq_hz,
            ..Self::new(SoundKind::Sine, duration_s)
        }
    }

    pub fn with_volume(mut self, volume: f64) -> Self {
        self.volume = volume;
        self
    }

    pub fn with_sample_rate(mut self, sample_rate_hz: u32) -> Self {
        self.sample_rate_hz = sample_rate_hz;
        self
    }

    pub fn nyquist_hz(&self) -> f64 {
        self.sample_rate_hz as f64 / 2.0
    }

    /// `round(duration_s * sample_rate_hz)`.
    pub fn num_samples(&self) -> usize {
        (self.duration_s * self.sample_rate_hz as f64).round() as usize
    }

    pub fn validate(&self) -> Result<(), SignalError> {
        let bad = |field, reason: String| Err(SignalError::InvalidSpec { field, reason });
        if self.sample_rate_hz == 0 {
            return bad("sample_rate_hz", "must be positive".into());
        }
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) {
            return bad("duration_s", format!("must be > 0, got {}", self.duration_s));
        }
        if self.num_samples() < 1 {
            return bad(
                "duration_s",
                format!("{} s is shorter than one sample", self.duration_s),
            );
        }
        if !(self.volume > 0.0 && self.volume <= 1.0) {
            return bad("volume", format!("must be in (0, 1], got {}", self.volume));
        }
        let nyq = self.nyquist_hz();
        match self.kind {
            SoundKind::LogSweep => {
                if !(self.f_start_hz > 0.0) {
                    return bad("f_start_hz", format!("must be > 0, got {}", self.f_start_hz));
                }
                if !(self.f_end_hz > self.f_start_hz && self.f_end_hz <= nyq) {
                    return bad(
                        "f_end_hz",
                        format!(
                            "must be in ({}, {nyq}], got {}",
                            self.f_start_hz, self.f_end_hz
                        ),
                    );
                }
            }
            SoundKind::BandNoise => {
                if !(self.band_low_hz > 0.0) {
                    return bad("band_low_hz", format!("must be > 0, got {}", self.band_low_hz));
                }
                if !(self.band_high_hz > self.band_low_hz && self.band_high_hz <= nyq) {
                    return bad(
                        "band_high_hz",
                        format!(
                            "must be in ({}, {nyq}], got {}",
                            self.band_low_hz, self.band_high_hz
                        ),
                    );
                }
            }
            SoundKind::Sine => {
                if !(self.sine_freq_hz > 0.0 && self.sine_freq_hz <= nyq) {
                    return bad(
                        "sine_freq_hz",
                        format!("must be in (0, {nyq}], got {}", self.sine_freq_hz),
                    );
                }
            }
            SoundKind::WhiteNoise => {}
        }
        Ok(())
    }
}

/// Mono waveform at a fixed sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub samples: Vec<f64>,
    pub sample_rate_hz: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate_hz: u32) -> Self {
        Self {
            samples,
            sample_rate_hz,
        }
    }

    pub fn zeros(len: usize, sample_rate_hz: u32) -> Self {
        Self::new(vec![0.0; len], sample_rate_hz)
    }

    /// Unit impulse at the first sample.
    pub fn impulse(len: usize, sample_rate_hz: u32) -> Self {
        let mut w = Self::zeros(len, sample_rate_hz);
        if let Some(first) = w.samples.first_mut() {
            *first = 1.0;
        }
        w
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz as f64
    }

    pub fn mean_square(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().map(|x| x * x).sum::<f64>() / self.samples.len() as f64
    }

    pub fn rms(&self) -> f64 {
        self.mean_square().sqrt()
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

/// Synthesizes the stimulus described by `spec`.
pub fn synthesize(spec: &SoundSpec) -> Result<Waveform, SignalError> {
    spec.validate()?;
    let n = spec.num_samples();
    let fs = spec.sample_rate_hz as f64;
    let samples = match spec.kind {
        SoundKind::Sine => {
            let f = spec.sine_freq_hz;
            (0..n)
                .map(|k| spec.volume * (2.0 * PI * f * k as f64 / fs).sin())
                .collect()
        }
        SoundKind::LogSweep => {
            let (f0, f1) = (spec.f_start_hz, spec.f_end_hz);
            let t_log = spec.duration_s / (f1 / f0).ln();
            (0..n)
                .map(|k| {
                    let t = k as f64 / fs;
                    let phase = 2.0 * PI * f0 * t_log * ((t / t_log).exp() - 1.0);
                    spec.volume * phase.sin()
                })
                .collect()
        }
        SoundKind::WhiteNoise => uniform_noise(n, spec.seed, spec.volume),
        SoundKind::BandNoise => {
            let white = uniform_noise(n, spec.seed, spec.volume);
            let sections = filter::butterworth_bandpass(spec.band_low_hz, spec.band_high_hz, fs);
            filter::filtfilt(&sections, &white)
                .into_iter()
                .map(|x| x.clamp(-1.0, 1.0))
                .collect()
        }
    };
    Ok(Waveform::new(samples, spec.sample_rate_hz))
}

/// `volume * U(-1, 1)` from the ChaCha8 stream keyed by `seed`.
pub fn uniform_noise(n: usize, seed: u64, volume: f64) -> Vec<f64> {
    let mut rng = rng::stream(seed);
    (0..n)
        .map(|_| volume * (2.0 * rng.random::<f64>() - 1.0))
        .collect()
}

/// Zero-phase fourth-order Butterworth band-pass.
pub fn filter_bandpass(w: &Waveform, low_hz: f64, high_hz: f64) -> Result<Waveform, SignalError> {
    let nyquist_hz = w.sample_rate_hz as f64 / 2.0;
    if !(low_hz > 0.0 && high_hz > low_hz && high_hz <= nyquist_hz) {
        return Err(SignalError::InvalidBand {
            low_hz,
            high_hz,
            nyquist_hz,
        });
    }
    let sections = filter::butterworth_bandpass(low_hz, high_hz, w.sample_rate_hz as f64);
    Ok(Waveform::new(
        filter::filtfilt(&sections, &w.samples),
        w.sample_rate_hz,
    ))
}

/// Multiplies every sample by `fraction`.
///
/// A fraction of zero is rejected: silence is passive sensing, not a
/// stimulus.
pub fn scale_volume(w: &Waveform, fraction: f64) -> Result<Waveform, SignalError> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(SignalError::InvalidFraction(fraction));
    }
    Ok(Waveform::new(
        w.samples.iter().map(|x| x * fraction).collect(),
        w.sample_rate_hz,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sine_matches_closed_form() {
        let w = synthesize(&SoundSpec::sine(2580.0, 1.0)).unwrap();
        assert_eq!(w.len(), 48_000);
        for (k, &s) in w.samples.iter().enumerate() {
            let expected = (2.0 * PI * 2580.0 * k as f64 / 48_000.0).sin();
            assert_eq!(s, expected);
        }
    }

    #[test]
    fn five_ms_is_240_samples_for_every_kind() {
        for kind in SoundKind::ALL {
            let w = synthesize(&SoundSpec::new(kind, 0.005)).unwrap();
            assert_eq!(w.len(), 240, "{kind}");
        }
    }

    #[test]
    fn white_noise_is_reproducible() {
        let spec = SoundSpec::white_noise(0.02, 42);
        assert_eq!(synthesize(&spec).unwrap(), synthesize(&spec).unwrap());
        let other = SoundSpec::white_noise(0.02, 43);
        assert_ne!(synthesize(&spec).unwrap(), synthesize(&other).unwrap());
    }

    #[test]
    fn white_noise_rms_tracks_volume() {
        let w = synthesize(&SoundSpec::white_noise(1.0, 1).with_volume(0.5)).unwrap();
        assert!((w.rms() - 0.5 * REFERENCE_NOISE_RMS).abs() < 0.005);
        assert!(w.peak() <= 0.5);
    }

    #[test]
    fn deterministic_kinds_peak_at_volume() {
        for kind in [SoundKind::Sine, SoundKind::LogSweep] {
            let w = synthesize(&SoundSpec::new(kind, 0.5).with_volume(0.3)).unwrap();
            assert!(w.peak() <= 0.3 + 1e-12);
            assert!(w.peak() > 0.299, "{kind}: {}", w.peak());
        }
    }

    #[test]
    fn invalid_specs_name_their_field() {
        let cases = [
            (SoundSpec::sine(30_000.0, 1.0), "sine_freq_hz"),
            (SoundSpec::log_sweep(0.0), "duration_s"),
            (SoundSpec::log_sweep(1.0).with_volume(0.0), "volume"),
            (SoundSpec::log_sweep(1.0).with_volume(1.5), "volume"),
            (
                SoundSpec {
                    f_end_hz: 10.0,
                    ..SoundSpec::log_sweep(1.0)
                },
                "f_end_hz",
            ),
            (
                SoundSpec {
                    band_low_hz: 5000.0,
                    ..SoundSpec::band_noise(1.0, 0)
                },
                "band_high_hz",
            ),
        ];
        for (spec, field) in cases {
            match synthesize(&spec) {
                Err(SignalError::InvalidSpec { field: f, .. }) => assert_eq!(f, field),
                other => panic!("expected InvalidSpec({field}), got {other:?}"),
            }
        }
    }

    #[test]
    fn scale_volume_bounds() {
        let w = synthesize(&SoundSpec::white_noise(0.1, 3)).unwrap();
        assert_eq!(scale_volume(&w, 1.0).unwrap(), w);
        let quarter = scale_volume(&w, 0.25).unwrap();
        assert!((quarter.rms() - 0.25 * w.rms()).abs() < 1e-15);
        assert_eq!(scale_volume(&w, 0.0), Err(SignalError::InvalidFraction(0.0)));
        assert!(scale_volume(&w, 1.01).is_err());
    }

    #[test]
    fn bandpass_rejects_bad_bands_and_keeps_zero() {
        let z = Waveform::zeros(1000, 48_000);
        assert_eq!(filter_bandpass(&z, 2000.0, 4000.0).unwrap(), z);
        assert!(matches!(
            filter_bandpass(&z, 4000.0, 2000.0),
            Err(SignalError::InvalidBand { .. })
        ));
        assert!(filter_bandpass(&z, 0.0, 2000.0).is_err());
        assert!(filter_bandpass(&z, 2000.0, 25_000.0).is_err());
    }

    #[test]
    fn bandpass_passes_in_band_tone() {
        let tone = synthesize(&SoundSpec::sine(3000.0, 0.5)).unwrap();
        let out = filter_bandpass(&tone, 2000.0, 4000.0).unwrap();
        let ratio_db = 20.0 * (out.rms() / tone.rms()).log10();
        assert!(ratio_db.abs() < 3.0, "{ratio_db} dB");
    }

    #[test]
    fn band_noise_never_clips_at_full_volume() {
        let w = synthesize(&SoundSpec::band_noise(1.0, 9)).unwrap();
        let clipped = w.samples.iter().filter(|x| x.abs() >= 1.0).count();
        assert!((clipped as f64) < 0.001 * w.len() as f64);
    }
}
