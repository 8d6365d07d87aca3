use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::state::{ContactSite, Material};
use crate::rng;
use crate::signal_gen::DEFAULT_SAMPLE_RATE;

/// One acoustic mode of the air chamber.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Resonance {
    pub center_hz: f64,
    pub q_factor: f64,
    pub gain: f64,
}

/// Robot-arm hum: three tones per pose below `max_freq_hz`. Tone
/// frequencies depend on the pose; tone levels depend on the pose and on
/// the contact location, because each contact within a pose needs its own
/// arm configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseHum {
    /// Peak amplitude of the loudest possible tone; 0 disables hum.
    pub amplitude: f64,
    pub min_freq_hz: f64,
    pub max_freq_hz: f64,
    pub seed: u64,
}

pub const HUM_TONES: usize = 3;

impl PoseHum {
    /// `(frequency_hz, amplitude)` for each hum tone. Pose 0 is silent.
    pub fn profile(&self, pose_id: u32, location_key: &str) -> Vec<(f64, f64)> {
        if pose_id == 0 || self.amplitude == 0.0 {
            return Vec::new();
        }
        let mut freq_rng = rng::stream(rng::derive(self.seed, &[pose_id as u64]));
        let mut level_rng = rng::stream(rng::derive(
            self.seed,
            &[pose_id as u64, rng::hash_str(location_key)],
        ));
        (0..HUM_TONES)
            .map(|_| {
                let f = freq_rng.random_range(self.min_freq_hz..self.max_freq_hz);
                let a = self.amplitude * level_rng.random_range(0.1..1.0);
                (f, a)
            })
            .collect()
    }
}

/// Parameterization of a simulated actuator as a bank of resonators whose
/// centers, bandwidths and gains move with the actuator state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActuatorModel {
    pub actuator_id: String,
    pub sample_rate_hz: u32,
    pub resonances: Vec<Resonance>,
    /// Per-site additive center shift, one entry per resonance.
    pub location_shift_hz: BTreeMap<ContactSite, Vec<f64>>,
    /// Per-resonance center shift per millimetre for continuous positions.
    pub position_shift_hz_per_mm: Vec<f64>,
    pub finger_length_mm: f64,
    /// Relative Q reduction per newton of contact force.
    pub force_q_coeff: f64,
    /// Relative center shift per kPa of inflation.
    pub inflation_shift_coeff: f64,
    /// Relative center shift per degree above 20 degC.
    pub temperature_coeff: f64,
    /// Spectral tilt in dB per decade around `tilt_pivot_hz`, applied while
    /// touching an object of the given material.
    pub material_gain_tilt: BTreeMap<Material, f64>,
    pub tilt_pivot_hz: f64,
    /// Attenuation of sound entering the chamber from outside.
    pub insulation_db: f64,
    /// Outside RMS amplitude that corresponds to an external level of 0 dB.
    pub external_ref_rms: f64,
    /// Microphone sensitivity applied to the resonator output.
    pub mic_gain: f64,
    pub mic_noise_rms: f64,
    /// Recording-to-recording repeatability: relative std of each
    /// resonance center and std of each resonance gain in dB.
    pub center_jitter: f64,
    pub gain_jitter_db: f64,
    pub pose_hum: PoseHum,
}

const CENTERS_HZ: [f64; 8] = [210.0, 470.0, 920.0, 1560.0, 2580.0, 3850.0, 5900.0, 8800.0];
const Q_FACTORS: [f64; 8] = [5.0, 7.0, 9.0, 11.0, 15.0, 12.0, 10.0, 8.0];
const GAINS: [f64; 8] = [0.30, 0.45, 0.55, 0.65, 1.00, 0.70, 0.50, 0.35];

/// Site shifts in percent of each center.
const SITE_SHIFT_PCT: [(ContactSite, [f64; 8]); 6] = [
    (ContactSite::Base, [1.2, -0.8, 0.6, 1.0, -0.9, 0.7, -0.5, 0.8]),
    (ContactSite::Middle, [-0.6, 1.1, -0.9, 0.4, 1.2, -0.7, 0.9, -0.4]),
    (ContactSite::Tip, [0.5, 0.4, 1.2, -1.1, 0.6, 1.0, -0.8, -0.9]),
    (ContactSite::Left, [-1.0, -0.5, 0.3, 0.8, -0.4, -1.1, 0.6, 1.0]),
    (ContactSite::Right, [0.9, -1.2, -0.7, -0.3, 0.3, 0.5, 1.1, -0.6]),
    (ContactSite::Top, [-0.4, 0.7, 0.9, -0.6, -1.2, 0.3, -1.0, 0.5]),
];

/// Relative center shift per millimetre along the palmar side.
const POSITION_SHIFT_PER_MM: [f64; 8] = [
    4.0e-4, -3.0e-4, 5.0e-4, 3.6e-4, -4.4e-4, 2.4e-4, 4.0e-4, -3.2e-4,
];

impl ActuatorModel {
    /// The unperturbed reference actuator. Its strongest mode sits at 2580 Hz.
    pub fn reference(actuator_id: impl Into<String>) -> Self {
        let resonances = CENTERS_HZ
            .iter()
            .zip(Q_FACTORS)
            .zip(GAINS)
            .map(|((&center_hz, q_factor), gain)| Resonance {
                center_hz,
                q_factor,
                gain,
            })
            .collect();
        let mut location_shift_hz: BTreeMap<ContactSite, Vec<f64>> = SITE_SHIFT_PCT
            .iter()
            .map(|(site, pct)| {
                let shifts = CENTERS_HZ
                    .iter()
                    .zip(pct)
                    .map(|(c, p)| c * p / 100.0)
                    .collect();
                (*site, shifts)
            })
            .collect();
        location_shift_hz.insert(ContactSite::None, vec![0.0; CENTERS_HZ.len()]);
        let position_shift_hz_per_mm = CENTERS_HZ
            .iter()
            .zip(POSITION_SHIFT_PER_MM)
            .map(|(c, r)| c * r)
            .collect();
        let material_gain_tilt = [
            (Material::Wood, 0.0),
            (Material::Silicone, -0.6),
            (Material::Aluminum, 0.6),
            (Material::None, 0.0),
        ]
        .into_iter()
        .collect();
        Self {
            actuator_id: actuator_id.into(),
            sample_rate_hz: DEFAULT_SAMPLE_RATE,
            resonances,
            location_shift_hz,
            position_shift_hz_per_mm,
            finger_length_mm: 90.0,
            force_q_coeff: 0.08,
            inflation_shift_coeff: 2.0e-3,
            temperature_coeff: 1.8e-3,
            material_gain_tilt,
            tilt_pivot_hz: 2580.0,
            insulation_db: 40.0,
            external_ref_rms: 1.0e-5,
            mic_gain: 0.5,
            mic_noise_rms: 2.0e-4,
            center_jitter: 1.0e-3,
            gain_jitter_db: 0.2,
            pose_hum: PoseHum {
                amplitude: 1.5e-2,
                min_freq_hz: 60.0,
                max_freq_hz: 480.0,
                seed: 0x5EED_0F_A12A,
            },
        }
    }

    /// Reference actuator with per-actuator manufacturing spread: centers
    /// within +-5 % and gains within +-20 %, keyed by `(seed, actuator_id)`.
    pub fn default_model(actuator_id: &str, seed: u64) -> Self {
        Self::reference(actuator_id).manufactured(actuator_id, seed)
    }

    /// This model renamed to `actuator_id`, with resonance centers and
    /// gains perturbed (up to +-5 % and +-20 %) by a draw keyed on
    /// `(seed, actuator_id)`.
    pub fn manufactured(mut self, actuator_id: &str, seed: u64) -> Self {
        self.actuator_id = actuator_id.to_string();
        let mut rng = rng::stream(rng::derive(seed, &[rng::hash_str(actuator_id)]));
        for r in &mut self.resonances {
            r.center_hz *= 1.0 + rng.random_range(-0.05..=0.05);
            r.gain *= 1.0 + rng.random_range(-0.2..=0.2);
        }
        self
    }

    pub fn nyquist_hz(&self) -> f64 {
        self.sample_rate_hz as f64 / 2.0
    }

    /// Index of the resonance with the largest gain.
    pub fn dominant_mode(&self) -> usize {
        self.resonances
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.gain.total_cmp(&b.1.gain))
            .map(|(i, _)| i)
            .unwrap_or(0)
    }

    /// Removes every stochastic term: microphone noise, repeatability
    /// jitter and robot hum.
    pub fn noiseless(mut self) -> Self {
        self.mic_noise_rms = 0.0;
        self.center_jitter = 0.0;
        self.gain_jitter_db = 0.0;
        self.pose_hum.amplitude = 0.0;
        self
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.sample_rate_hz == 0 {
            return Err("sample rate must be positive".into());
        }
        if self.resonances.is_empty() {
            return Err("model has no resonances".into());
        }
        let k = self.resonances.len();
        for (i, r) in self.resonances.iter().enumerate() {
            if !(r.q_factor > 0.0) {
                return Err(format!("resonance {i}: q_factor must be > 0"));
            }
            if !(r.center_hz > 0.0 && r.center_hz < self.nyquist_hz()) {
                return Err(format!("resonance {i}: center outside (0, Nyquist)"));
            }
        }
        for (site, shifts) in &self.location_shift_hz {
            if shifts.len() != k {
                return Err(format!("location shift table for {site} has {} entries, expected {k}", shifts.len()));
            }
        }
        if self.position_shift_hz_per_mm.len() != k {
            return Err("position shift table length differs from resonance count".into());
        }
        if !(self.insulation_db >= 0.0) {
            return Err("insulation_db must be >= 0".into());
        }
        if !(self.mic_noise_rms >= 0.0 && self.center_jitter >= 0.0 && self.gain_jitter_db >= 0.0) {
            return Err("noise terms must be non-negative".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_dominant_mode_is_2580() {
        let m = ActuatorModel::reference("ref");
        assert_eq!(m.resonances[m.dominant_mode()].center_hz, 2580.0);
        assert_eq!(m.resonances.len(), 8);
        assert!(m.resonances.first().unwrap().center_hz >= 200.0);
        assert!(m.resonances.last().unwrap().center_hz <= 9000.0);
        m.validate().unwrap();
    }

    #[test]
    fn default_model_is_keyed_by_id() {
        let a1 = ActuatorModel::default_model("A", 1);
        let a2 = ActuatorModel::default_model("A", 1);
        let b = ActuatorModel::default_model("B", 1);
        assert_eq!(a1, a2);
        let max_rel_diff = a1
            .resonances
            .iter()
            .zip(&b.resonances)
            .map(|(x, y)| ((x.center_hz - y.center_hz) / x.center_hz).abs())
            .fold(0.0, f64::max);
        assert!(max_rel_diff > 0.01, "{max_rel_diff}");
        let reference = ActuatorModel::reference("A");
        for (j, r) in a1.resonances.iter().zip(&reference.resonances) {
            assert!((j.center_hz / r.center_hz - 1.0).abs() <= 0.05 + 1e-12);
            assert!((j.gain / r.gain - 1.0).abs() <= 0.2 + 1e-12);
        }
    }

    #[test]
    fn hum_profile_depends_on_pose_and_location() {
        let hum = ActuatorModel::reference("x").pose_hum;
        assert!(hum.profile(0, "tip").is_empty());
        let p1_tip = hum.profile(1, "tip");
        let p1_base = hum.profile(1, "base");
        let p2_tip = hum.profile(2, "tip");
        assert_eq!(p1_tip.len(), HUM_TONES);
        // Same pose: same tone frequencies, different levels.
        assert!(p1_tip.iter().zip(&p1_base).all(|(a, b)| a.0 == b.0 && a.1 != b.1));
        assert!(p1_tip.iter().zip(&p2_tip).all(|(a, b)| a.0 != b.0));
        assert!(p1_tip.iter().all(|(f, _)| *f < 500.0));
    }
}
