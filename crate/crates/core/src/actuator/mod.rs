//! Virtual actuator: a parametric stand-in for a sensorized soft finger.
//!
//! The stimulus is passed through a bank of second-order resonators whose
//! centers, Q factors and gains are functions of the [`ActuatorState`].
//! Outside sound, robot hum and microphone noise are added afterwards.
//! This is a test oracle with known ground truth, not a physical model.

mod model;
mod state;

use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use model::{ActuatorModel, PoseHum, Resonance, HUM_TONES};
pub use state::{ActuatorState, ContactLocation, ContactSite, Material, ROOM_TEMPERATURE_C};

use crate::rng;
use crate::signal_gen::filter::Biquad;
use crate::signal_gen::{self, SignalError, SoundSpec, Waveform};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ActuatorError {
    #[error("sample rate mismatch: model runs at {expected} Hz, input is {found} Hz")]
    RateMismatch { expected: u32, found: u32 },
    #[error("resonance {mode} is unstable in this state (center {center_hz} Hz, Q {q_factor})")]
    UnstableFilter {
        mode: usize,
        center_hz: f64,
        q_factor: f64,
    },
    #[error("external sound has {found} samples, recording needs {needed}")]
    ExternalTooShort { needed: usize, found: usize },
    #[error("invalid actuator state: {0}")]
    InvalidState(String),
    #[error("invalid actuator model: {0}")]
    InvalidModel(String),
    #[error("repeats must be at least 1")]
    NoRepeats,
    #[error(transparent)]
    Signal(#[from] SignalError),
}

/// What excites the chamber during a recording.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stimulus {
    /// The embedded speaker plays a synthesized sound.
    Active(SoundSpec),
    /// No excitation; only outside sound and noise are recorded.
    Passive { duration_s: f64, sample_rate_hz: u32 },
    /// A single tap transient, realized as a unit impulse.
    Tap { duration_s: f64, sample_rate_hz: u32 },
}

impl Stimulus {
    pub fn passive(duration_s: f64) -> Self {
        Stimulus::Passive {
            duration_s,
            sample_rate_hz: signal_gen::DEFAULT_SAMPLE_RATE,
        }
    }

    pub fn tap(duration_s: f64) -> Self {
        Stimulus::Tap {
            duration_s,
            sample_rate_hz: signal_gen::DEFAULT_SAMPLE_RATE,
        }
    }

    pub fn sample_rate_hz(&self) -> u32 {
        match self {
            Stimulus::Active(spec) => spec.sample_rate_hz,
            Stimulus::Passive { sample_rate_hz, .. } | Stimulus::Tap { sample_rate_hz, .. } => {
                *sample_rate_hz
            }
        }
    }

    pub fn duration_s(&self) -> f64 {
        match self {
            Stimulus::Active(spec) => spec.duration_s,
            Stimulus::Passive { duration_s, .. } | Stimulus::Tap { duration_s, .. } => *duration_s,
        }
    }

    pub fn num_samples(&self) -> usize {
        (self.duration_s() * self.sample_rate_hz() as f64).round() as usize
    }

    pub fn is_active(&self) -> bool {
        matches!(self, Stimulus::Active(_))
    }
}

/// A stimulus together with its synthesized excitation waveform.
#[derive(Debug, Clone)]
pub struct Source {
    stimulus: Stimulus,
    excitation: Option<Waveform>,
}

impl Source {
    pub fn new(stimulus: Stimulus) -> Result<Self, ActuatorError> {
        let n = stimulus.num_samples();
        let excitation = match &stimulus {
            Stimulus::Active(spec) => Some(signal_gen::synthesize(spec)?),
            Stimulus::Tap { sample_rate_hz, .. } => {
                if n == 0 {
                    return Err(ActuatorError::InvalidState("tap recording has no samples".into()));
                }
                Some(Waveform::impulse(n, *sample_rate_hz))
            }
            Stimulus::Passive { .. } => {
                if n == 0 {
                    return Err(ActuatorError::InvalidState(
                        "passive recording has no samples".into(),
                    ));
                }
                None
            }
        };
        Ok(Self {
            stimulus,
            excitation,
        })
    }

    /// Plays an arbitrary waveform; recorded as an active source with `spec`.
    pub fn from_waveform(spec: SoundSpec, waveform: Waveform) -> Self {
        Self {
            stimulus: Stimulus::Active(spec),
            excitation: Some(waveform),
        }
    }

    pub fn stimulus(&self) -> &Stimulus {
        &self.stimulus
    }

    pub fn excitation(&self) -> Option<&Waveform> {
        self.excitation.as_ref()
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.excitation
            .as_ref()
            .map_or(self.stimulus.sample_rate_hz(), |w| w.sample_rate_hz)
    }

    pub fn len(&self) -> usize {
        self.excitation
            .as_ref()
            .map_or(self.stimulus.num_samples(), Waveform::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Sound reaching the actuator from outside, at `level_db` relative to the
/// model's `external_ref_rms`.
#[derive(Debug, Clone, Copy)]
pub struct External<'a> {
    pub waveform: &'a Waveform,
    pub level_db: f64,
}

/// Outside-noise condition stored with a recording.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentNoise {
    pub level_db: f64,
    /// Seed of the white-noise source, when the simulator generated it.
    pub seed: Option<u64>,
}

/// A labeled microphone recording.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub waveform: Waveform,
    pub state: ActuatorState,
    pub actuator_id: String,
    pub stimulus: Stimulus,
    pub noise_seed: u64,
    pub environment: Option<EnvironmentNoise>,
}

/// Resonator parameters after applying the state and repeatability jitter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShiftedMode {
    pub center_hz: f64,
    pub q_factor: f64,
    pub gain: f64,
}

/// Resonances as moved by `state`, with per-mode relative center offsets
/// and gain offsets (dB) from the repeatability jitter.
pub fn shifted_modes(
    model: &ActuatorModel,
    state: &ActuatorState,
    center_offsets: &[f64],
    gain_offsets_db: &[f64],
) -> Result<Vec<ShiftedMode>, ActuatorError> {
    let scale = 1.0
        + model.inflation_shift_coeff * state.inflation_kpa
        + model.temperature_coeff * (state.temperature_c - ROOM_TEMPERATURE_C);
    let q_scale = if state.is_contact() {
        1.0 - model.force_q_coeff * state.contact_force_n
    } else {
        1.0
    };
    let tilt = if state.is_contact() && state.contact_force_n > 0.0 {
        model
            .material_gain_tilt
            .get(&state.material)
            .copied()
            .unwrap_or(0.0)
    } else {
        0.0
    };
    let nyquist = model.nyquist_hz();
    model
        .resonances
        .iter()
        .enumerate()
        .map(|(k, r)| {
            let location_shift = match state.location {
                ContactLocation::Site(site) => model
                    .location_shift_hz
                    .get(&site)
                    .map_or(0.0, |shifts| shifts[k]),
                ContactLocation::Along { position_mm } => {
                    model.position_shift_hz_per_mm[k] * position_mm
                }
            };
            let center_hz = r.center_hz * (1.0 + center_offsets.get(k).copied().unwrap_or(0.0))
                * scale
                + location_shift;
            let q_factor = r.q_factor * q_scale;
            if !(center_hz > 0.0 && center_hz < nyquist && q_factor > 0.0) {
                return Err(ActuatorError::UnstableFilter {
                    mode: k,
                    center_hz,
                    q_factor,
                });
            }
            let tilt_db = tilt * (center_hz / model.tilt_pivot_hz).log10();
            let jitter_db = gain_offsets_db.get(k).copied().unwrap_or(0.0);
            let gain = r.gain * 10f64.powf((tilt_db + jitter_db) / 20.0);
            Ok(ShiftedMode {
                center_hz,
                q_factor,
                gain,
            })
        })
        .collect()
}

const JITTER_STREAM: u64 = 1;
const HUM_STREAM: u64 = 2;
const MIC_STREAM: u64 = 3;
const EXTERNAL_STREAM: u64 = 4;

/// Records `source` through the simulated actuator in `state`.
///
/// The output is the sum of the resonator bank driven by the excitation,
/// the insulated outside sound, robot hum for the state's pose and
/// microphone noise, clamped to [-1, 1] and stored at 32-bit float
/// precision. Every random term is drawn from streams keyed by `seed`.
pub fn modulate(
    model: &ActuatorModel,
    state: &ActuatorState,
    source: &Source,
    external: Option<External<'_>>,
    seed: u64,
) -> Result<Recording, ActuatorError> {
    model.validate().map_err(ActuatorError::InvalidModel)?;
    state
        .validate(model.finger_length_mm)
        .map_err(ActuatorError::InvalidState)?;
    let rate = model.sample_rate_hz;
    if source.sample_rate_hz() != rate {
        return Err(ActuatorError::RateMismatch {
            expected: rate,
            found: source.sample_rate_hz(),
        });
    }
    let n = source.len();
    let fs = rate as f64;

    let k = model.resonances.len();
    let mut jitter_rng = rng::stream(rng::derive(seed, &[JITTER_STREAM]));
    let mut draw = |std: f64| std * jitter_rng.sample::<f64, _>(StandardNormal);
    let center_offsets: Vec<f64> = (0..k).map(|_| draw(model.center_jitter)).collect();
    let gain_offsets: Vec<f64> = (0..k).map(|_| draw(model.gain_jitter_db)).collect();
    let modes = shifted_modes(model, state, &center_offsets, &gain_offsets)?;

    let mut out = vec![0.0; n];
    if let Some(excitation) = source.excitation() {
        for mode in &modes {
            let mut section = Biquad::resonator(mode.center_hz, mode.q_factor, fs);
            let g = model.mic_gain * mode.gain;
            for (y, &x) in out.iter_mut().zip(&excitation.samples) {
                *y += g * section.process(x);
            }
        }
    }

    if let Some(ext) = external {
        if ext.waveform.sample_rate_hz != rate {
            return Err(ActuatorError::RateMismatch {
                expected: rate,
                found: ext.waveform.sample_rate_hz,
            });
        }
        if ext.waveform.len() < n {
            return Err(ActuatorError::ExternalTooShort {
                needed: n,
                found: ext.waveform.len(),
            });
        }
        let rms = ext.waveform.rms();
        if rms > 0.0 {
            let g = model.external_ref_rms * 10f64.powf((ext.level_db - model.insulation_db) / 20.0)
                / rms;
            for (y, x) in out.iter_mut().zip(&ext.waveform.samples) {
                *y += g * x;
            }
        }
    }

    let hum = model.pose_hum.profile(state.pose_id, &state.location.label());
    let mut hum_rng = rng::stream(rng::derive(seed, &[HUM_STREAM]));
    for (freq, amp) in hum {
        let phase = hum_rng.random_range(0.0..2.0 * PI);
        let w = 2.0 * PI * freq / fs;
        for (i, y) in out.iter_mut().enumerate() {
            *y += amp * (w * i as f64 + phase).sin();
        }
    }

    if model.mic_noise_rms > 0.0 {
        let mut mic_rng = rng::stream(rng::derive(seed, &[MIC_STREAM]));
        for y in out.iter_mut() {
            *y += model.mic_noise_rms * mic_rng.sample::<f64, _>(StandardNormal);
        }
    }

    for y in out.iter_mut() {
        *y = y.clamp(-1.0, 1.0) as f32 as f64;
    }

    Ok(Recording {
        waveform: Waveform::new(out, rate),
        state: state.clone(),
        actuator_id: model.actuator_id.clone(),
        stimulus: source.stimulus().clone(),
        noise_seed: seed,
        environment: None,
    })
}

/// Seed of the recording for `(state_index, repeat)` under `seed`.
pub fn recording_seed(seed: u64, state_index: usize, repeat: usize) -> u64 {
    rng::derive(seed, &[state_index as u64, repeat as u64])
}

/// Records every state `repeats` times in a quiet environment.
pub fn sample_dataset(
    model: &ActuatorModel,
    states: &[ActuatorState],
    stimulus: &Stimulus,
    repeats: usize,
    seed: u64,
) -> Result<Vec<Recording>, ActuatorError> {
    sample_dataset_in(model, states, stimulus, repeats, seed, None)
}

/// Records every state `repeats` times, optionally with outside white
/// noise at `environment_db`.
///
/// Each recording's seed depends only on `(seed, state index, repeat)`,
/// so any subset can be regenerated alone. Output order is a seeded
/// shuffle of the state/repeat grid.
pub fn sample_dataset_in(
    model: &ActuatorModel,
    states: &[ActuatorState],
    stimulus: &Stimulus,
    repeats: usize,
    seed: u64,
    environment_db: Option<f64>,
) -> Result<Vec<Recording>, ActuatorError> {
    if repeats == 0 {
        return Err(ActuatorError::NoRepeats);
    }
    let source = Source::new(stimulus.clone())?;
    let mut jobs: Vec<(usize, usize)> = (0..states.len())
        .flat_map(|s| (0..repeats).map(move |r| (s, r)))
        .collect();
    jobs.shuffle(&mut rng::stream(rng::derive(seed, &[u64::MAX])));

    jobs.par_iter()
        .map(|&(s, r)| {
            let noise_seed = recording_seed(seed, s, r);
            match environment_db {
                None => modulate(model, &states[s], &source, None, noise_seed),
                Some(level_db) => {
                    let ext_seed = rng::derive(noise_seed, &[EXTERNAL_STREAM]);
                    let noise = Waveform::new(
                        signal_gen::uniform_noise(source.len(), ext_seed, 1.0),
                        source.sample_rate_hz(),
                    );
                    let ext = External {
                        waveform: &noise,
                        level_db,
                    };
                    let mut rec = modulate(model, &states[s], &source, Some(ext), noise_seed)?;
                    rec.environment = Some(EnvironmentNoise {
                        level_db,
                        seed: Some(ext_seed),
                    });
                    Ok(rec)
                }
            }
        })
        .collect()
}
