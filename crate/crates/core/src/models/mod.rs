//! Sensor models: k-nearest neighbors and one-vs-rest linear SVC over
//! amplitude spectra, plus cross-validated grid search.

mod grid;
mod knn;
mod svc;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{FeatureSet, SpectrumFeature, Target};

pub use grid::{grid_search, stratified_folds, CvScore, GridResult, ParamGrid, DEFAULT_FOLDS};
pub use knn::{knn_train, KnnMode};
pub use svc::{svc_train, svc_train_with, SvcDiagnostics, SvcOptions};

/// Version written into serialized models.
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("training data is empty")]
    EmptyData,
    #[error("k = {k} exceeds the {n} training samples")]
    KTooLarge { k: usize, n: usize },
    #[error("target `{target}` cannot be used for {task}")]
    WrongTargetType { target: Target, task: &'static str },
    #[error("feature dimension mismatch: model expects {expected}, got {found}")]
    DimMismatch { expected: usize, found: usize },
    #[error("training data contains a single class `{0}`")]
    SingleClass(String),
    #[error("invalid hyperparameter: {0}")]
    InvalidHyperparameter(String),
    #[error("class `{class}` has {count} samples, fewer than {folds} folds")]
    TooFewPerClass {
        class: String,
        count: usize,
        folds: usize,
    },
    #[error("solver stopped after {epochs} epochs with relative duality gap {gap:.3e}")]
    NotConverged { epochs: usize, gap: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    L1,
    #[default]
    L2,
}

impl Metric {
    pub fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Metric::L1 => a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum(),
            Metric::L2 => a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt(),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::L1 => "l1",
            Metric::L2 => "l2",
        })
    }
}

impl std::str::FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "l1" | "manhattan" => Ok(Metric::L1),
            "l2" | "euclidean" => Ok(Metric::L2),
            _ => Err(format!("unknown metric `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weighting {
    #[default]
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelKind {
    KnnClassifier,
    KnnRegressor,
    LinearSvc,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum Hyperparams {
    Knn {
        k: usize,
        metric: Metric,
        #[serde(default)]
        weighting: Weighting,
    },
    Svc {
        c: f64,
        #[serde(default = "default_tolerance")]
        tolerance: f64,
        #[serde(default = "default_max_epochs")]
        max_epochs: usize,
    },
}

fn default_tolerance() -> f64 {
    SvcOptions::default().tolerance
}

fn default_max_epochs() -> usize {
    SvcOptions::default().max_epochs
}

impl Hyperparams {
    /// Default KNN: five neighbors, Euclidean, uniform weights.
    pub fn knn_default() -> Self {
        Hyperparams::Knn {
            k: 5,
            metric: Metric::L2,
            weighting: Weighting::Uniform,
        }
    }

    pub fn knn(k: usize, metric: Metric) -> Self {
        Hyperparams::Knn {
            k,
            metric,
            weighting: Weighting::Uniform,
        }
    }

    pub fn svc(c: f64) -> Self {
        let o = SvcOptions::default();
        Hyperparams::Svc {
            c,
            tolerance: o.tolerance,
            max_epochs: o.max_epochs,
        }
    }
}

impl fmt::Display for Hyperparams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Hyperparams::Knn { k, metric, .. } => write!(f, "k={k} metric={metric}"),
            Hyperparams::Svc { c, .. } => write!(f, "C={c:e}"),
        }
    }
}

/// What a model predicts for one input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Prediction {
    Label(String),
    Value(f64),
}

impl Prediction {
    pub fn label(&self) -> Option<&str> {
        match self {
            Prediction::Label(l) => Some(l),
            Prediction::Value(_) => None,
        }
    }

    pub fn value(&self) -> Option<f64> {
        match self {
            Prediction::Value(v) => Some(*v),
            Prediction::Label(_) => None,
        }
    }
}

impl fmt::Display for Prediction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Prediction::Label(l) => f.write_str(l),
            Prediction::Value(v) => write!(f, "{v}"),
        }
    }
}

/// Anything that maps a spectrum to a prediction of one target.
pub trait Predictor: Sync {
    fn target(&self) -> Target;
    fn feature_dim(&self) -> usize;
    fn predict(&self, x: &SpectrumFeature) -> Result<Prediction, ModelError>;

    fn predict_all(&self, xs: &[SpectrumFeature]) -> Result<Vec<Prediction>, ModelError> {
        xs.iter().map(|x| self.predict(x)).collect()
    }
}

/// Per-feature standardization learned on the training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Scaler {
    pub fn fit(rows: &[Vec<f64>]) -> Self {
        let dim = rows.first().map_or(0, Vec::len);
        let n = rows.len().max(1) as f64;
        let mut mean = vec![0.0; dim];
        for r in rows {
            mean.iter_mut().zip(r).for_each(|(m, x)| *m += x / n);
        }
        let mut var = vec![0.0; dim];
        for r in rows {
            var.iter_mut()
                .zip(r.iter().zip(&mean))
                .for_each(|(v, (x, m))| *v += (x - m) * (x - m) / n);
        }
        let scale = var
            .into_iter()
            .map(|v| if v > 0.0 { v.sqrt() } else { 1.0 })
            .collect();
        Self { mean, scale }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(x, (m, s))| (x - m) / s)
            .collect()
    }
}

/// Learned state of a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Params {
    /// KNN memorizes the training set.
    Knn {
        points: Vec<Vec<f64>>,
        targets: KnnTargets,
    },
    Svc {
        /// Sorted class labels; one linear classifier per class.
        classes: Vec<String>,
        weights: Vec<Vec<f64>>,
        biases: Vec<f64>,
        scaler: Option<Scaler>,
        diagnostics: SvcDiagnostics,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KnnTargets {
    Labels(Vec<String>),
    Values(Vec<f64>),
}

/// A trained, immutable sensor model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorModel {
    pub version: u32,
    pub kind: ModelKind,
    pub target: Target,
    pub feature_dim: usize,
    pub hyperparams: Hyperparams,
    pub params: Params,
}

impl SensorModel {
    /// Trains a model of `hyperparams`' family on `data`. KNN regresses
    /// numeric targets unless `classify` is set; SVC always classifies.
    pub fn fit(
        data: &FeatureSet,
        target: Target,
        hyperparams: &Hyperparams,
        mode: KnnMode,
    ) -> Result<Self, ModelError> {
        match *hyperparams {
            Hyperparams::Knn { k, metric, .. } => knn_train(data, target, k, metric, mode),
            Hyperparams::Svc {
                c,
                tolerance,
                max_epochs,
            } => svc_train_with(
                data,
                target,
                c,
                &SvcOptions {
                    tolerance,
                    max_epochs,
                    ..SvcOptions::default()
                },
            ),
        }
    }

    /// Fails with `NotConverged` when the SVC solver hit its epoch limit.
    pub fn require_converged(&self) -> Result<&Self, ModelError> {
        match &self.params {
            Params::Svc { diagnostics, .. } if !diagnostics.converged => Err(ModelError::NotConverged {
                epochs: diagnostics.epochs,
                gap: diagnostics.relative_gap,
            }),
            _ => Ok(self),
        }
    }

    pub fn class_scores(&self, x: &SpectrumFeature) -> Result<Vec<(String, f64)>, ModelError> {
        self.check_dim(x)?;
        match &self.params {
            Params::Svc {
                classes,
                weights,
                biases,
                scaler,
                ..
            } => {
                let input = match scaler {
                    Some(s) => s.apply(&x.amplitudes),
                    None => x.amplitudes.clone(),
                };
                Ok(classes
                    .iter()
                    .zip(weights.iter().zip(biases))
                    .map(|(c, (w, b))| (c.clone(), dot(w, &input) + b))
                    .collect())
            }
            Params::Knn { .. } => Err(ModelError::WrongTargetType {
                target: self.target,
                task: "decision scores",
            }),
        }
    }

    fn check_dim(&self, x: &SpectrumFeature) -> Result<(), ModelError> {
        if x.dim() != self.feature_dim {
            return Err(ModelError::DimMismatch {
                expected: self.feature_dim,
                found: x.dim(),
            });
        }
        Ok(())
    }
}

impl Predictor for SensorModel {
    fn target(&self) -> Target {
        self.target
    }

    fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    fn predict(&self, x: &SpectrumFeature) -> Result<Prediction, ModelError> {
        self.check_dim(x)?;
        match (&self.params, self.hyperparams) {
            (Params::Knn { points, targets }, Hyperparams::Knn { k, metric, .. }) => {
                Ok(knn::predict(points, targets, k, metric, &x.amplitudes))
            }
            (Params::Svc { .. }, _) => {
                let scores = self.class_scores(x)?;
                Ok(Prediction::Label(svc::argmax(&scores).to_string()))
            }
            _ => unreachable!("params and hyperparams disagree"),
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn rows(data: &FeatureSet) -> Vec<Vec<f64>> {
    data.features.iter().map(|f| f.amplitudes.clone()).collect()
}

fn check_rows(data: &FeatureSet) -> Result<usize, ModelError> {
    if data.is_empty() {
        return Err(ModelError::EmptyData);
    }
    let dim = data.dim();
    if let Some(f) = data.features.iter().find(|f| f.dim() != dim) {
        return Err(ModelError::DimMismatch {
            expected: dim,
            found: f.dim(),
        });
    }
    Ok(dim)
}

fn class_labels(data: &FeatureSet, target: Target) -> Result<Vec<String>, ModelError> {
    data.class_labels(target).ok_or(ModelError::WrongTargetType {
        target,
        task: "classification",
    })
}
