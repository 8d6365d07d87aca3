//! Splits, metrics and the experiment runners.

mod metrics;
mod report;
mod runners;
mod split;

use thiserror::Error;

pub use metrics::{confusion, evaluate, macro_recall, report_from_labels, rmse, snr_db, snr_estimate, EvalReport};
pub use report::{AblationCell, AblationResult};
pub use runners::*;
pub use split::{random_split, stratified_indices, stratified_split, DEFAULT_RATIO};

use crate::actuator::ActuatorError;
use crate::features::{FeatureError, Target};
use crate::models::ModelError;
use crate::signal_gen::SignalError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("test labels have no `{0}` value")]
    MissingTarget(Target),
    #[error("class `{class}` has {count} sample(s); a split needs at least 2")]
    ClassTooSmall { class: String, count: usize },
    #[error("train ratio must lie in (0, 1), got {0}")]
    InvalidRatio(f64),
    #[error("sample rates differ: {0} Hz vs {1} Hz")]
    RateMismatch(u32, u32),
    #[error("recording is empty")]
    EmptyRecording,
    #[error("invalid experiment setting: {0}")]
    InvalidSetting(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Actuator(#[from] ActuatorError),
    #[error(transparent)]
    Signal(#[from] SignalError),
}
