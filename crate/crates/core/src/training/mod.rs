//! Loss, optimizer, data splits, the training loop, cross-validation,
//! classification metrics and their CSV forms.

pub mod adam;
pub mod config;
pub mod cv;
pub mod loss;
pub mod metrics;
pub mod report;
pub mod split;
pub mod train;

use thiserror::Error;

use crate::kv::KvError;
use crate::model::ModelError;
use crate::tensor::TensorError;

pub use adam::{adam_step, AdamState};
pub use config::TrainConfig;
pub use cv::{cross_validate, cross_validate_with, CvResult, FoldResult, MetricSummary};
pub use loss::{sparse_ce_grad, sparse_ce_loss};
pub use metrics::{evaluate, predict, ClassMetrics, MetricsReport};
pub use split::{split_dataset, stratified_kfold, FoldPlan, Split};
pub use train::{train, EpochRecord, History};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("empty {0}")]
    Empty(&'static str),
    #[error("label {label} at position {index} is outside 0..{classes}")]
    Label { index: usize, label: usize, classes: usize },
    #[error("model predicts {model} classes but the data has {data}")]
    ClassMismatch { model: usize, data: usize },
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("non-finite gradient for parameter `{0}`")]
    NonFiniteGradient(String),
    #[error("class {class} has {count} samples, need at least {needed}")]
    Stratify { class: usize, count: usize, needed: usize },
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Kv(#[from] KvError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("malformed CSV: {0}")]
    CsvFormat(String),
}
