//! Amplitude-spectrum features.
//!
//! Recordings are trimmed to a common length and transformed with a DFT.
//! The feature vector keeps the magnitudes of bins `1..=N/2` scaled by
//! `2/N`, so a full-scale sinusoid centered on a bin reads 1.0 there. The
//! DC bin and the phase are discarded, no window is applied and no bins
//! are merged.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::actuator::{ActuatorState, ContactLocation, Material, Recording};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FeatureError {
    #[error("recordings mix sample rates ({0} Hz and {1} Hz)")]
    MixedSampleRates(u32, u32),
    #[error("target length {target} exceeds shortest recording ({shortest} samples)")]
    TargetTooLong { target: usize, shortest: usize },
    #[error("waveform of {0} samples is too short for a spectrum (need >= 2)")]
    TooShort(usize),
    #[error("no recordings to featurize")]
    Empty,
}

/// Real-valued amplitude spectrum of one recording.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumFeature {
    pub amplitudes: Vec<f64>,
    pub bin_hz: f64,
    pub first_bin_hz: f64,
    pub sample_rate_hz: u32,
    /// Number of time samples the spectrum was computed from.
    pub frame_len: usize,
}

impl SpectrumFeature {
    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    /// Frequency of retained bin `i`.
    pub fn freq_hz(&self, i: usize) -> f64 {
        self.first_bin_hz + i as f64 * self.bin_hz
    }

    /// Index of the retained bin closest to `freq_hz`.
    pub fn bin_of(&self, freq_hz: f64) -> usize {
        let i = ((freq_hz - self.first_bin_hz) / self.bin_hz).round();
        (i.max(0.0) as usize).min(self.dim().saturating_sub(1))
    }

    pub fn argmax(&self) -> usize {
        self.amplitudes
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map_or(0, |(i, _)| i)
    }

    /// Time-domain energy `sum x^2` implied by these bins plus the DC term
    /// `dc` (the raw DFT value at bin 0).
    pub fn energy_with_dc(&self, dc: f64) -> f64 {
        let n = self.frame_len as f64;
        let half = n / 2.0;
        let mut sum = dc * dc / n;
        for (i, a) in self.amplitudes.iter().enumerate() {
            let bin = i + 1;
            // |X_k| = a * N / 2; each non-Nyquist bin stands for itself and its mirror.
            let mag_sq = (a * half).powi(2);
            let weight = if self.frame_len % 2 == 0 && bin == self.frame_len / 2 {
                1.0
            } else {
                2.0
            };
            sum += weight * mag_sq / n;
        }
        sum
    }
}

/// Per-sample scaling applied after the spectrum. Off by default.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    #[default]
    None,
    /// Divide each vector by its Euclidean norm.
    UnitL2,
}

/// Labels copied from a recording's state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Labels {
    pub location: ContactLocation,
    pub force_n: f64,
    pub inflation_kpa: f64,
    pub temperature_c: f64,
    pub material: Material,
    pub pose_id: u32,
    pub actuator_id: String,
}

impl Labels {
    pub fn from_state(state: &ActuatorState, actuator_id: &str) -> Self {
        Self {
            location: state.location,
            force_n: state.contact_force_n,
            inflation_kpa: state.inflation_kpa,
            temperature_c: state.temperature_c,
            material: state.material,
            pose_id: state.pose_id,
            actuator_id: actuator_id.to_string(),
        }
    }
}

/// Label field a sensor model predicts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Target {
    /// Categorical contact site.
    Location,
    /// Continuous contact position in mm.
    Position,
    Force,
    Inflation,
    Temperature,
    Material,
    Pose,
    Actuator,
}

impl Target {
    pub fn name(self) -> &'static str {
        match self {
            Target::Location => "location",
            Target::Position => "position",
            Target::Force => "force",
            Target::Inflation => "inflation",
            Target::Temperature => "temperature",
            Target::Material => "material",
            Target::Pose => "pose",
            Target::Actuator => "actuator",
        }
    }

    /// Whether the target has a numeric value usable for regression.
    pub fn is_numeric(self) -> bool {
        matches!(
            self,
            Target::Position | Target::Force | Target::Inflation | Target::Temperature
        )
    }

    /// Class label for classification. Numeric targets use their value
    /// with a unit suffix.
    pub fn class_label(self, labels: &Labels) -> Option<String> {
        match self {
            Target::Location => match labels.location {
                ContactLocation::Site(site) => Some(site.name().to_string()),
                ContactLocation::Along { .. } => None,
            },
            Target::Position => labels.location.position_mm().map(|p| format!("{p}mm")),
            Target::Force => Some(format!("{}N", labels.force_n)),
            Target::Inflation => Some(format!("{}kPa", labels.inflation_kpa)),
            Target::Temperature => Some(format!("{}C", labels.temperature_c)),
            Target::Material => Some(labels.material.name().to_string()),
            Target::Pose => Some(format!("pose{}", labels.pose_id)),
            Target::Actuator => Some(labels.actuator_id.clone()),
        }
    }

    pub fn value(self, labels: &Labels) -> Option<f64> {
        match self {
            Target::Position => labels.location.position_mm(),
            Target::Force => Some(labels.force_n),
            Target::Inflation => Some(labels.inflation_kpa),
            Target::Temperature => Some(labels.temperature_c),
            _ => None,
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Target {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [
            Target::Location,
            Target::Position,
            Target::Force,
            Target::Inflation,
            Target::Temperature,
            Target::Material,
            Target::Pose,
            Target::Actuator,
        ]
        .into_iter()
        .find(|t| t.name() == s)
        .ok_or_else(|| format!("unknown target `{s}`"))
    }
}

/// Feature vectors of equal dimension with their labels.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FeatureSet {
    pub features: Vec<SpectrumFeature>,
    pub labels: Vec<Labels>,
}

impl FeatureSet {
    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.first().map_or(0, SpectrumFeature::dim)
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> FeatureSet {
        FeatureSet {
            features: indices.iter().map(|&i| self.features[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i].clone()).collect(),
        }
    }

    /// Concatenation of `self` and `other`.
    pub fn concat(mut self, other: &FeatureSet) -> FeatureSet {
        self.features.extend(other.features.iter().cloned());
        self.labels.extend(other.labels.iter().cloned());
        self
    }

    pub fn class_labels(&self, target: Target) -> Option<Vec<String>> {
        self.labels.iter().map(|l| target.class_label(l)).collect()
    }

    pub fn values(&self, target: Target) -> Option<Vec<f64>> {
        self.labels.iter().map(|l| target.value(l)).collect()
    }
}

/// Truncates every recording (from the end) to `target_len`, or to the
/// shortest length present.
pub fn trim(recordings: &[Recording], target_len: Option<usize>) -> Result<Vec<Recording>, FeatureError> {
    let len = common_length(recordings, target_len)?;
    Ok(recordings
        .iter()
        .map(|r| {
            let mut r = r.clone();
            r.waveform.samples.truncate(len);
            r
        })
        .collect())
}

fn common_length(recordings: &[Recording], target_len: Option<usize>) -> Result<usize, FeatureError> {
    let first = recordings.first().ok_or(FeatureError::Empty)?;
    let rate = first.waveform.sample_rate_hz;
    if let Some(r) = recordings.iter().find(|r| r.waveform.sample_rate_hz != rate) {
        return Err(FeatureError::MixedSampleRates(rate, r.waveform.sample_rate_hz));
    }
    let shortest = recordings.iter().map(|r| r.waveform.len()).min().unwrap_or(0);
    match target_len {
        Some(target) if target > shortest => Err(FeatureError::TargetTooLong { target, shortest }),
        Some(target) => Ok(target),
        None => Ok(shortest),
    }
}

/// Reusable forward transform for one frame length.
#[derive(Clone)]
pub struct SpectrumAnalyzer {
    fft: Arc<dyn Fft<f64>>,
    len: usize,
}

impl fmt::Debug for SpectrumAnalyzer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectrumAnalyzer").field("len", &self.len).finish()
    }
}

impl SpectrumAnalyzer {
    pub fn new(len: usize) -> Result<Self, FeatureError> {
        if len < 2 {
            return Err(FeatureError::TooShort(len));
        }
        Ok(Self {
            fft: FftPlanner::new().plan_fft_forward(len),
            len,
        })
    }

    /// Raw DFT of `samples` (which must have the analyzer's length).
    pub fn dft(&self, samples: &[f64]) -> Vec<Complex64> {
        assert_eq!(samples.len(), self.len, "frame length mismatch");
        let mut buf: Vec<Complex64> = samples.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.fft.process(&mut buf);
        buf
    }

    pub fn amplitude(&self, samples: &[f64], sample_rate_hz: u32) -> SpectrumFeature {
        let spectrum = self.dft(samples);
        let n = self.len;
        let scale = 2.0 / n as f64;
        let amplitudes = spectrum[1..=n / 2].iter().map(|c| c.norm() * scale).collect();
        let bin_hz = sample_rate_hz as f64 / n as f64;
        SpectrumFeature {
            amplitudes,
            bin_hz,
            first_bin_hz: bin_hz,
            sample_rate_hz,
            frame_len: n,
        }
    }
}

/// Amplitude spectrum of the whole recording.
pub fn amplitude_spectrum(r: &Recording) -> Result<SpectrumFeature, FeatureError> {
    let w = &r.waveform;
    Ok(SpectrumAnalyzer::new(w.len())?.amplitude(&w.samples, w.sample_rate_hz))
}

/// Trim to the shortest recording, then take each amplitude spectrum.
pub fn featurize(recordings: &[Recording]) -> Result<FeatureSet, FeatureError> {
    featurize_with(recordings, None, Normalization::None)
}

pub fn featurize_with(
    recordings: &[Recording],
    target_len: Option<usize>,
    normalization: Normalization,
) -> Result<FeatureSet, FeatureError> {
    let len = common_length(recordings, target_len)?;
    let analyzer = SpectrumAnalyzer::new(len)?;
    let features = recordings
        .par_iter()
        .map(|r| {
            let mut f = analyzer.amplitude(&r.waveform.samples[..len], r.waveform.sample_rate_hz);
            if normalization == Normalization::UnitL2 {
                let norm = f.amplitudes.iter().map(|a| a * a).sum::<f64>().sqrt();
                if norm > 0.0 {
                    f.amplitudes.iter_mut().for_each(|a| *a /= norm);
                }
            }
            f
        })
        .collect();
    let labels = recordings
        .iter()
        .map(|r| Labels::from_state(&r.state, &r.actuator_id))
        .collect();
    Ok(FeatureSet { features, labels })
}
