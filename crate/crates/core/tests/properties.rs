use acoustic_sensing::actuator::{modulate, shifted_modes, Source, Stimulus};
use acoustic_sensing::eval::{confusion, stratified_indices};
use acoustic_sensing::features::{Labels, SpectrumAnalyzer};
use acoustic_sensing::models::{knn_train, svc_train, KnnMode, Metric, Predictor};
use acoustic_sensing::signal_gen::synthesize;
use acoustic_sensing::{ActuatorModel, ActuatorState, ContactSite, FeatureSet, SoundSpec, SpectrumFeature, Target, Waveform};
use proptest::prelude::*;

fn feature(amplitudes: Vec<f64>) -> SpectrumFeature {
    SpectrumFeature {
        frame_len: 2 * amplitudes.len(),
        amplitudes,
        bin_hz: 1.0,
        first_bin_hz: 1.0,
        sample_rate_hz: 48_000,
    }
}

fn set(points: &[Vec<f64>], classes: &[u8]) -> FeatureSet {
    let mut s = FeatureSet::default();
    for (p, &c) in points.iter().zip(classes) {
        s.features.push(feature(p.clone()));
        let mut l = Labels::from_state(&ActuatorState::touching(ContactSite::Tip, 1.0), "A");
        l.force_n = c as f64 + 1.0;
        s.labels.push(l);
    }
    s
}

fn labelled_points(max_n: usize) -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<u8>)> {
    (1usize..=4, 2usize..=max_n).prop_flat_map(|(dim, n)| {
        (
            prop::collection::vec(prop::collection::vec(-1.0f64..1.0, dim), n),
            prop::collection::vec(0u8..3, n),
        )
    })
}

fn metric() -> impl Strategy<Value = Metric> {
    prop_oneof![Just(Metric::L1), Just(Metric::L2)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn knn_ignores_training_order(
        (points, classes) in labelled_points(12),
        k in 1usize..5,
        m in metric(),
        rot in 0usize..12,
        q in prop::collection::vec(-1.0f64..1.0, 4),
    ) {
        let k = k.min(points.len());
        let a = knn_train(&set(&points, &classes), Target::Force, k, m, KnnMode::Classify).unwrap();
        let r = rot % points.len();
        let mut p2 = points.clone();
        let mut c2 = classes.clone();
        p2.rotate_left(r);
        c2.rotate_left(r);
        p2.reverse();
        c2.reverse();
        let b = knn_train(&set(&p2, &c2), Target::Force, k, m, KnnMode::Classify).unwrap();
        let x = feature(q[..points[0].len()].to_vec());
        prop_assert_eq!(a.predict(&x).unwrap(), b.predict(&x).unwrap());
    }

    #[test]
    fn one_nearest_neighbour_recalls_training_labels(
        (points, classes) in labelled_points(12),
        m in metric(),
    ) {
        // duplicated points with different labels are ambiguous; skip them
        for i in 0..points.len() {
            for j in 0..i {
                prop_assume!(points[i] != points[j]);
            }
        }
        let data = set(&points, &classes);
        let model = knn_train(&data, Target::Force, 1, m, KnnMode::Classify).unwrap();
        let truth = data.class_labels(Target::Force).unwrap();
        for (x, t) in data.features.iter().zip(&truth) {
            let p = model.predict(x).unwrap();
            prop_assert_eq!(p.label(), Some(t.as_str()));
        }
    }

    #[test]
    fn spectrum_is_homogeneous_and_sign_blind(
        samples in prop::collection::vec(-1.0f64..1.0, 64),
        a in -4.0f64..4.0,
    ) {
        let an = SpectrumAnalyzer::new(64).unwrap();
        let base = an.amplitude(&samples, 48_000).amplitudes;
        let scaled: Vec<f64> = samples.iter().map(|x| a * x).collect();
        let flipped: Vec<f64> = samples.iter().map(|x| -x).collect();
        let s = an.amplitude(&scaled, 48_000).amplitudes;
        let f = an.amplitude(&flipped, 48_000).amplitudes;
        for i in 0..base.len() {
            prop_assert!((s[i] - a.abs() * base[i]).abs() <= 1e-12);
            prop_assert!((f[i] - base[i]).abs() <= 1e-12);
        }
    }

    #[test]
    fn spectrum_ignores_circular_shift(
        samples in prop::collection::vec(-1.0f64..1.0, 64),
        shift in 0usize..64,
    ) {
        let an = SpectrumAnalyzer::new(64).unwrap();
        let mut rotated = samples.clone();
        rotated.rotate_left(shift);
        let a = an.amplitude(&samples, 48_000).amplitudes;
        let b = an.amplitude(&rotated, 48_000).amplitudes;
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn stratified_split_partitions_each_class(
        classes in prop::collection::vec(0u8..4, 2..60),
        ratio in 0.05f64..0.95,
        seed in any::<u64>(),
    ) {
        let labels: Vec<String> = classes.iter().map(|c| format!("c{c}")).collect();
        let res = stratified_indices(&labels, ratio, seed);
        let small = (0u8..4).any(|c| classes.iter().filter(|&&x| x == c).count() == 1);
        prop_assert_eq!(res.is_err(), small);
        let Ok((train, test)) = res else { return Ok(()) };
        let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..labels.len()).collect::<Vec<_>>());
        for c in 0u8..4 {
            let n = classes.iter().filter(|&&x| x == c).count();
            if n == 0 {
                continue;
            }
            let n_train = train.iter().filter(|&&i| classes[i] == c).count();
            let expect = ((ratio * n as f64).round() as usize).clamp(1, n - 1);
            prop_assert_eq!(n_train, expect);
        }
        prop_assert_eq!(stratified_indices(&labels, ratio, seed).unwrap(), (train, test));
    }

    #[test]
    fn confusion_rows_are_distributions(
        pairs in prop::collection::vec((0u8..4, 0u8..4), 1..50),
    ) {
        let truth: Vec<String> = pairs.iter().map(|p| format!("c{}", p.0)).collect();
        let pred: Vec<String> = pairs.iter().map(|p| format!("c{}", p.1)).collect();
        let (classes, rows, counts) = confusion(&truth, &pred);
        for (c, row) in classes.iter().zip(&rows) {
            let sum: f64 = row.iter().sum();
            if counts.get(c).copied().unwrap_or(0) > 0 {
                prop_assert!((sum - 1.0).abs() <= 1e-12);
            } else {
                prop_assert_eq!(sum, 0.0);
            }
        }
    }

    #[test]
    fn svc_duplicated_data_with_half_c_agrees(
        dim in 2usize..4,
        seed in any::<u64>(),
        c in prop_oneof![Just(1.0f64), Just(10.0), Just(100.0)],
    ) {
        // two well separated clusters
        let mut r = acoustic_sensing::rng::stream(seed);
        use rand::Rng;
        let mut points = Vec::new();
        let mut classes = Vec::new();
        for i in 0..12 {
            let off = if i % 2 == 0 { 2.0 } else { -2.0 };
            points.push((0..dim).map(|_| off + r.random_range(-0.5..0.5)).collect::<Vec<f64>>());
            classes.push((i % 2) as u8);
        }
        let once = svc_train(&set(&points, &classes), Target::Force, c).unwrap();
        let p2: Vec<Vec<f64>> = points.iter().chain(&points).cloned().collect();
        let c2: Vec<u8> = classes.iter().chain(&classes).copied().collect();
        let twice = svc_train(&set(&p2, &c2), Target::Force, c / 2.0).unwrap();
        for _ in 0..20 {
            let q = feature((0..dim).map(|_| r.random_range(-3.0..3.0)).collect());
            let s1 = once.class_scores(&q).unwrap();
            let s2 = twice.class_scores(&q).unwrap();
            for ((_, a), (_, b)) in s1.iter().zip(&s2) {
                prop_assert!((a - b).abs() <= 1e-2 * (1.0 + a.abs()), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn recording_is_linear_in_the_source(
        volume in 0.01f64..0.3,
        factor in 0.1f64..3.0,
        site in 0usize..6,
    ) {
        let model = ActuatorModel::reference("A").noiseless();
        let state = ActuatorState::touching(ContactSite::CONTACTS[site], 1.0);
        let spec = SoundSpec::white_noise(0.01, 4).with_volume(volume);
        let w = synthesize(&spec).unwrap();
        let scaled = Waveform::new(w.samples.iter().map(|x| factor * x).collect(), w.sample_rate_hz);
        let a = modulate(&model, &state, &Source::from_waveform(spec.clone(), w), None, 1).unwrap();
        let b = modulate(&model, &state, &Source::from_waveform(spec, scaled), None, 1).unwrap();
        let peak = a.waveform.peak().max(1e-12);
        for (x, y) in a.waveform.samples.iter().zip(&b.waveform.samples) {
            // samples are stored in single precision
            prop_assert!((factor * x - y).abs() <= 1e-6 * factor * peak + 1e-9);
        }
    }

    #[test]
    fn modes_rise_with_inflation(lo in 0.0f64..40.0, step in 0.1f64..20.0, site in 0usize..6) {
        let model = ActuatorModel::reference("A");
        let s = ActuatorState::touching(ContactSite::CONTACTS[site], 1.0);
        let a = shifted_modes(&model, &s.clone().with_inflation(lo), &[], &[]).unwrap();
        let b = shifted_modes(&model, &s.with_inflation(lo + step), &[], &[]).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!(y.center_hz > x.center_hz);
        }
    }

    #[test]
    fn recordings_are_deterministic(seed in any::<u64>(), site in 0usize..6) {
        let model = ActuatorModel::default_model("B", 3);
        let state = ActuatorState::touching(ContactSite::CONTACTS[site], 1.0);
        let src = Source::new(Stimulus::Active(SoundSpec::white_noise(0.005, 1))).unwrap();
        let a = modulate(&model, &state, &src, None, seed).unwrap();
        let b = modulate(&model, &state, &src, None, seed).unwrap();
        prop_assert_eq!(a, b);
    }
}
