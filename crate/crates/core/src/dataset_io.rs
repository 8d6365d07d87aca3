//! On-disk formats: mono 32-bit float WAVE files with a line-delimited JSON
//! manifest for recordings, JSON lines for feature sets, and JSON documents
//! for models and reports.
//!
//! A dataset directory looks like
//!
//! ```text
//! manifest.jsonl
//! rec_00000.wav
//! rec_00001.wav
//! ...
//! ```
//!
//! The first manifest line is a [`ManifestHeader`]; every further line is a
//! [`ManifestEntry`]. Samples are stored as `f32`, so a recording read back
//! holds its samples rounded to single precision. Writing that recording
//! again reproduces the files byte for byte.

use std::collections::HashSet;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::actuator::{ActuatorState, EnvironmentNoise, Recording, Stimulus};
use crate::features::{FeatureSet, Labels, SpectrumFeature};
use crate::models::{SensorModel, MODEL_FORMAT_VERSION};
use crate::signal_gen::{Waveform, DEFAULT_SAMPLE_RATE};

pub const SCHEMA_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.jsonl";
const DATASET_SCHEMA: &str = "acoustic-sensing/dataset";
const FEATURES_SCHEMA: &str = "acoustic-sensing/features";

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{}: {message}", .path.display())]
    IoFailure { path: PathBuf, message: String },
    #[error("unsupported sample rate {0} Hz")]
    UnsupportedRate(u32),
    #[error("missing audio file {}", .0.display())]
    MissingAudio(PathBuf),
    #[error("{}: {message}", .path.display())]
    SchemaMismatch { path: PathBuf, message: String },
    #[error("corrupt audio file {}: {message}", .path.display())]
    CorruptAudio { path: PathBuf, message: String },
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> DatasetError {
    DatasetError::IoFailure {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

fn schema_err(path: &Path, message: impl Into<String>) -> DatasetError {
    DatasetError::SchemaMismatch {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

fn corrupt(path: &Path, e: impl std::fmt::Display) -> DatasetError {
    DatasetError::CorruptAudio {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

/// First manifest line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestHeader {
    pub schema: String,
    pub version: u32,
    pub default_sample_rate_hz: u32,
    pub count: usize,
}

/// One recording: where its audio lives and everything needed to
/// reproduce or label it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Audio path relative to the dataset directory.
    pub audio: String,
    pub num_samples: usize,
    pub sample_rate_hz: u32,
    pub actuator_id: String,
    pub state: ActuatorState,
    pub stimulus: Stimulus,
    pub noise_seed: u64,
    #[serde(default)]
    pub environment: Option<EnvironmentNoise>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub header: ManifestHeader,
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    fn for_recordings(recs: &[Recording]) -> Self {
        let entries = recs
            .iter()
            .enumerate()
            .map(|(i, r)| ManifestEntry {
                audio: format!("rec_{i:05}.wav"),
                num_samples: r.waveform.len(),
                sample_rate_hz: r.waveform.sample_rate_hz,
                actuator_id: r.actuator_id.clone(),
                state: r.state.clone(),
                stimulus: r.stimulus.clone(),
                noise_seed: r.noise_seed,
                environment: r.environment,
            })
            .collect::<Vec<_>>();
        Self {
            header: ManifestHeader {
                schema: DATASET_SCHEMA.into(),
                version: SCHEMA_VERSION,
                default_sample_rate_hz: DEFAULT_SAMPLE_RATE,
                count: entries.len(),
            },
            entries,
        }
    }

    /// The manifest as JSON lines.
    pub fn to_jsonl(&self) -> String {
        let mut out = serde_json::to_string(&self.header).expect("header serializes");
        out.push('\n');
        for e in &self.entries {
            out.push_str(&serde_json::to_string(e).expect("entry serializes"));
            out.push('\n');
        }
        out
    }

    /// Parses and validates a manifest; `path` is only used in errors.
    pub fn parse(text: &str, path: &Path) -> Result<Self, DatasetError> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let first = lines.next().ok_or_else(|| schema_err(path, "empty manifest"))?;
        let header: ManifestHeader =
            serde_json::from_str(first).map_err(|e| schema_err(path, format!("bad header: {e}")))?;
        check_schema(path, &header.schema, DATASET_SCHEMA, header.version)?;
        let entries = lines
            .enumerate()
            .map(|(i, l)| serde_json::from_str(l).map_err(|e| schema_err(path, format!("entry {i}: {e}"))))
            .collect::<Result<Vec<ManifestEntry>, _>>()?;
        if entries.len() != header.count {
            return Err(schema_err(
                path,
                format!("header announces {} entries, found {}", header.count, entries.len()),
            ));
        }
        let mut seen = HashSet::new();
        for e in &entries {
            if !seen.insert(e.audio.as_str()) {
                return Err(schema_err(path, format!("audio path `{}` listed twice", e.audio)));
            }
        }
        Ok(Self { header, entries })
    }
}

fn check_schema(path: &Path, schema: &str, expected: &str, version: u32) -> Result<(), DatasetError> {
    if schema != expected {
        return Err(schema_err(path, format!("expected schema `{expected}`, found `{schema}`")));
    }
    if version != SCHEMA_VERSION {
        return Err(schema_err(
            path,
            format!("unsupported schema version {version} (this build reads {SCHEMA_VERSION})"),
        ));
    }
    Ok(())
}

fn wav_spec(rate: u32) -> WavSpec {
    WavSpec {
        channels: 1,
        sample_rate: rate,
        bits_per_sample: 32,
        sample_format: SampleFormat::Float,
    }
}

/// Writes `w` as a mono 32-bit float WAVE file.
pub fn write_wav(path: &Path, w: &Waveform) -> Result<(), DatasetError> {
    if w.sample_rate_hz == 0 {
        return Err(DatasetError::UnsupportedRate(w.sample_rate_hz));
    }
    ensure_parent(path)?;
    let mut writer = WavWriter::create(path, wav_spec(w.sample_rate_hz)).map_err(|e| io_err(path, e))?;
    for &s in &w.samples {
        writer.write_sample(s as f32).map_err(|e| io_err(path, e))?;
    }
    writer.finalize().map_err(|e| io_err(path, e))
}

/// Reads a mono 32-bit float WAVE file.
pub fn read_wav(path: &Path) -> Result<Waveform, DatasetError> {
    if !path.is_file() {
        return Err(DatasetError::MissingAudio(path.to_path_buf()));
    }
    let reader = WavReader::open(path).map_err(|e| corrupt(path, e))?;
    let spec = reader.spec();
    if spec.channels != 1 || spec.bits_per_sample != 32 || spec.sample_format != SampleFormat::Float {
        return Err(corrupt(
            path,
            format!(
                "expected mono 32-bit float, found {} channel(s) of {}-bit {:?}",
                spec.channels, spec.bits_per_sample, spec.sample_format
            ),
        ));
    }
    if spec.sample_rate == 0 {
        return Err(DatasetError::UnsupportedRate(0));
    }
    let declared = reader.len() as usize;
    let samples = reader
        .into_samples::<f32>()
        .map(|s| s.map(f64::from))
        .collect::<Result<Vec<f64>, _>>()
        .map_err(|e| corrupt(path, e))?;
    if samples.len() != declared {
        return Err(corrupt(path, format!("header declares {declared} samples, read {}", samples.len())));
    }
    Ok(Waveform::new(samples, spec.sample_rate))
}

/// Writes one WAVE file per recording plus the manifest into `dir`,
/// creating it if needed.
pub fn write_dataset(recs: &[Recording], dir: &Path) -> Result<Manifest, DatasetError> {
    if let Some(r) = recs.iter().find(|r| r.waveform.sample_rate_hz == 0) {
        return Err(DatasetError::UnsupportedRate(r.waveform.sample_rate_hz));
    }
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let manifest = Manifest::for_recordings(recs);
    recs.par_iter()
        .zip(&manifest.entries)
        .try_for_each(|(r, e)| write_wav(&dir.join(&e.audio), &r.waveform))?;
    write_text(&dir.join(MANIFEST_FILE), &manifest.to_jsonl())?;
    Ok(manifest)
}

pub fn read_manifest(dir: &Path) -> Result<Manifest, DatasetError> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
    Manifest::parse(&text, &path)
}

/// Reads the recordings of a dataset directory in manifest order.
pub fn read_dataset(dir: &Path) -> Result<Vec<Recording>, DatasetError> {
    let manifest = read_manifest(dir)?;
    manifest
        .entries
        .par_iter()
        .map(|e| {
            let path = dir.join(&e.audio);
            let waveform = read_wav(&path)?;
            if waveform.len() != e.num_samples || waveform.sample_rate_hz != e.sample_rate_hz {
                return Err(corrupt(
                    &path,
                    format!(
                        "expected {} samples at {} Hz, found {} at {} Hz",
                        e.num_samples,
                        e.sample_rate_hz,
                        waveform.len(),
                        waveform.sample_rate_hz
                    ),
                ));
            }
            Ok(Recording {
                waveform,
                state: e.state.clone(),
                actuator_id: e.actuator_id.clone(),
                stimulus: e.stimulus.clone(),
                noise_seed: e.noise_seed,
                environment: e.environment,
            })
        })
        .collect()
}

#[derive(Debug, Serialize, Deserialize)]
struct FeaturesHeader {
    schema: String,
    version: u32,
    count: usize,
    dim: usize,
}

#[derive(Serialize, Deserialize)]
struct FeatureRow {
    labels: Labels,
    spectrum: SpectrumFeature,
}

/// Writes a feature set as JSON lines: a header, then one sample per line.
pub fn save_features(path: &Path, set: &FeatureSet) -> Result<(), DatasetError> {
    ensure_parent(path)?;
    let file = fs::File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    let header = FeaturesHeader {
        schema: FEATURES_SCHEMA.into(),
        version: SCHEMA_VERSION,
        count: set.len(),
        dim: set.dim(),
    };
    let mut put = |line: String| writeln!(w, "{line}").map_err(|e| io_err(path, e));
    put(serde_json::to_string(&header).expect("header serializes"))?;
    for (f, l) in set.features.iter().zip(&set.labels) {
        let row = FeatureRow {
            labels: l.clone(),
            spectrum: f.clone(),
        };
        put(serde_json::to_string(&row).expect("row serializes"))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn load_features(path: &Path) -> Result<FeatureSet, DatasetError> {
    let file = fs::File::open(path).map_err(|e| io_err(path, e))?;
    let mut lines = BufReader::new(file).lines();
    let first = lines
        .next()
        .ok_or_else(|| schema_err(path, "empty feature file"))?
        .map_err(|e| io_err(path, e))?;
    let header: FeaturesHeader =
        serde_json::from_str(&first).map_err(|e| schema_err(path, format!("bad header: {e}")))?;
    check_schema(path, &header.schema, FEATURES_SCHEMA, header.version)?;
    let mut set = FeatureSet::default();
    for (i, line) in lines.enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let row: FeatureRow = serde_json::from_str(&line).map_err(|e| schema_err(path, format!("row {i}: {e}")))?;
        if row.spectrum.dim() != header.dim {
            return Err(schema_err(
                path,
                format!("row {i} has dimension {}, header says {}", row.spectrum.dim(), header.dim),
            ));
        }
        set.features.push(row.spectrum);
        set.labels.push(row.labels);
    }
    if set.len() != header.count {
        return Err(schema_err(
            path,
            format!("header announces {} rows, found {}", header.count, set.len()),
        ));
    }
    Ok(set)
}

pub fn save_model(path: &Path, model: &SensorModel) -> Result<(), DatasetError> {
    write_json(path, model)
}

pub fn load_model(path: &Path) -> Result<SensorModel, DatasetError> {
    let m: SensorModel = read_json(path)?;
    if m.version != MODEL_FORMAT_VERSION {
        return Err(schema_err(
            path,
            format!("unsupported model version {} (this build reads {MODEL_FORMAT_VERSION})", m.version),
        ));
    }
    Ok(m)
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), DatasetError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| io_err(path, e))?;
    text.push('\n');
    write_text(path, &text)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, DatasetError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| schema_err(path, e.to_string()))
}

fn ensure_parent(path: &Path) -> Result<(), DatasetError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
    }
    Ok(())
}

pub fn write_text(path: &Path, text: &str) -> Result<(), DatasetError> {
    ensure_parent(path)?;
    fs::write(path, text).map_err(|e| io_err(path, e))
}
