use std::f64::consts::PI;

use acoustic_sensing::eval::*;
use acoustic_sensing::features::SpectrumAnalyzer;
use acoustic_sensing::signal_gen::filter::Biquad;
use acoustic_sensing::signal_gen::{synthesize, uniform_noise};
use acoustic_sensing::{ActuatorModel, ActuatorState, ContactSite, SoundKind, SoundSpec};

/// Direct O(n^2) DFT amplitude of bin `k`, scaled like the analyzer.
fn naive_amplitude(x: &[f64], k: usize) -> f64 {
    let n = x.len() as f64;
    let (mut re, mut im) = (0.0, 0.0);
    for (t, v) in x.iter().enumerate() {
        let ph = -2.0 * PI * k as f64 * t as f64 / n;
        re += v * ph.cos();
        im += v * ph.sin();
    }
    2.0 * (re * re + im * im).sqrt() / n
}

#[test]
fn analyzer_matches_direct_dft() {
    let x = uniform_noise(480, 17, 1.0);
    let s = SpectrumAnalyzer::new(480).unwrap().amplitude(&x, 48_000);
    assert_eq!(s.dim(), 240);
    for k in [1, 2, 37, 120, 239, 240] {
        let want = naive_amplitude(&x, k);
        assert!((s.amplitudes[k - 1] - want).abs() < 1e-12, "bin {k}: {} vs {want}", s.amplitudes[k - 1]);
        assert!((s.freq_hz(k - 1) - k as f64 * 100.0).abs() < 1e-9);
    }
}

#[test]
fn resonator_peaks_at_its_center() {
    let fs = 48_000.0;
    let f = Biquad::resonator(2580.0, 20.0, fs);
    let at = f.response(2580.0, fs).norm();
    assert!((at - 1.0).abs() < 1e-9, "{at}");
    for off in [0.9, 0.98, 1.02, 1.1] {
        assert!(f.response(2580.0 * off, fs).norm() < at);
    }
    // the half-power bandwidth is center / Q
    let half = f.response(2580.0 + 2580.0 / 40.0, fs).norm();
    assert!((half - 0.5f64.sqrt()).abs() < 0.02, "{half}");
}

#[test]
fn tone_spectrum_of_the_sine_stimulus() {
    let w = synthesize(&SoundSpec::sine(1000.0, 0.1)).unwrap();
    let s = SpectrumAnalyzer::new(w.len()).unwrap().amplitude(&w.samples, 48_000);
    assert_eq!(s.freq_hz(s.argmax()), 1000.0);
}

#[test]
fn quiet_snr_is_in_the_measured_range() {
    let model = ActuatorModel::default_model("A", 0);
    let state = ActuatorState::touching(ContactSite::Middle, 1.0);
    let snr = quiet_snr(&model, &state, &sweep_1s(), 4).unwrap();
    assert!((35.0..=55.0).contains(&snr), "{snr} dB");
}

#[test]
fn silent_passive_recording_gives_infinite_snr() {
    let a = synthesize(&SoundSpec::sine(500.0, 0.01)).unwrap();
    let p = acoustic_sensing::Waveform::zeros(a.len(), 48_000);
    assert_eq!(snr_db(&a, &p).unwrap(), f64::INFINITY);
}

#[test]
fn wide_band_stimuli_beat_a_pure_tone() {
    let cfg = SimConfig::default();
    let r = run_sound_ablation(&cfg, &SoundKind::ALL, &[0.02, 0.5]).unwrap();
    let means = group_means(&r, 0);
    let sine = means["sine"];
    for kind in ["log-sweep", "white-noise", "band-noise"] {
        assert!(means[kind] >= sine, "{kind} {} < sine {sine}", means[kind]);
        assert!(means[kind] >= 0.9, "{kind} {}", means[kind]);
    }
}

#[test]
fn force_and_temperature_are_sensed() {
    let cfg = SimConfig::default();
    assert!(run_force_experiment(&cfg).unwrap().acr.unwrap() >= 0.9);
    let active = run_temperature_experiment(&cfg, SensingMode::Active).unwrap().rmse.unwrap();
    let passive = run_temperature_experiment(&cfg, SensingMode::Passive).unwrap().rmse.unwrap();
    assert!(active < passive, "{active} vs {passive}");
}
