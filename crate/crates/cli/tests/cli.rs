use std::path::Path;
use std::process::{Command, Output};

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_acoustic-sensor"))
        .current_dir(dir)
        .env_remove("ACOUSTIC_SENSING_OUT")
        .args(args)
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn gen_sound_writes_one_second_at_48k() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["gen-sound", "--kind", "sine", "--freq", "2580", "--dur", "1", "--out", "s.wav"]);
    let r = hound::WavReader::open(dir.path().join("s.wav")).unwrap();
    assert_eq!(r.spec().sample_rate, 48_000);
    assert_eq!(r.spec().channels, 1);
    assert_eq!(r.duration(), 48_000);
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), &["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(dir.path(), &["ablate", "--task", "volume"]).status.code(), Some(2));
    assert_eq!(run(dir.path(), &["--jobs", "0", "snr", "--active", "a", "--passive", "b"]).status.code(), Some(2));
}

#[test]
fn data_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["featurize", "--data", "nowhere", "--out", "f.jsonl"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.starts_with("error:"), "{err}");
    assert!(err.contains("nowhere"), "{err}");
}

#[test]
fn volume_ablation_report_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["ablate", "--task", "volume", "--seed", "0", "--out", "one"];
    ok(dir.path(), &args);
    let csv = std::fs::read_to_string(dir.path().join("one.csv")).unwrap();
    // header plus eight fractions
    assert_eq!(csv.lines().count(), 9, "{csv}");
    ok(dir.path(), &["ablate", "--task", "volume", "--seed", "0", "--out", "two"]);
    for ext in ["csv", "json"] {
        let a = std::fs::read(dir.path().join(format!("one.{ext}"))).unwrap();
        let b = std::fs::read(dir.path().join(format!("two.{ext}"))).unwrap();
        assert_eq!(a, b, "{ext} differs");
    }
}

#[test]
fn simulate_train_evaluate_predict() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["simulate", "--task", "location6", "--seed", "1", "--repeats", "6", "--out", "data"]);
    ok(d, &["featurize", "--data", "data", "--out", "f.jsonl"]);
    ok(d, &["train", "--features", "f.jsonl", "--target", "location", "--method", "knn", "--out", "m.json"]);
    let table = ok(d, &["evaluate", "--model", "m.json", "--features", "f.jsonl"]);
    assert!(table.contains("tip"), "{table}");
    ok(d, &["predict", "--model", "m.json", "--features", "f.jsonl", "--out", "p.tsv"]);
    let preds = std::fs::read_to_string(d.join("p.tsv")).unwrap();
    assert_eq!(preds.lines().count(), 1 + 36);
}

#[test]
fn out_dir_roots_relative_outputs() {
    let dir = tempfile::tempdir().unwrap();
    ok(
        dir.path(),
        &["--out-dir", "res", "gen-sound", "--kind", "white-noise", "--dur", "0.01", "--out", "n.wav"],
    );
    assert!(dir.path().join("res/n.wav").is_file());
}

#[test]
fn snr_of_generated_sounds() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["gen-sound", "--kind", "sine", "--freq", "1000", "--dur", "0.1", "--out", "a.wav"]);
    ok(d, &["gen-sound", "--kind", "white-noise", "--dur", "0.1", "--volume", "0.1", "--out", "p.wav"]);
    let out = ok(d, &["snr", "--active", "a.wav", "--passive", "p.wav"]);
    let db: f64 = out.split_whitespace().find_map(|t| t.parse().ok()).unwrap();
    assert!(db > 15.0 && db < 30.0, "{out}");
}
