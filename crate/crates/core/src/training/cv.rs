//! Stratified k-fold cross-validation.

use log::info;

use crate::model::{build_model, Model, ModelConfig};
use crate::signal::Dataset;

use super::metrics::{evaluate, MetricsReport};
use super::split::{split_dataset, stratified_kfold};
use super::train::{train, History};
use super::{TrainConfig, TrainError};

#[derive(Debug, Clone, PartialEq)]
pub struct FoldResult {
    pub fold: usize,
    pub report: MetricsReport,
    pub history: Option<History>,
    pub train_size: usize,
    pub val_size: usize,
}

/// Mean and sample standard deviation of one metric across folds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricSummary {
    pub mean: f64,
    pub std: f64,
}

impl MetricSummary {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        MetricSummary { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvResult {
    pub folds: Vec<FoldResult>,
    pub accuracy: MetricSummary,
    pub precision: MetricSummary,
    pub recall: MetricSummary,
    pub f1: MetricSummary,
}

impl CvResult {
    pub fn from_folds(folds: Vec<FoldResult>) -> Self {
        let col = |f: fn(&MetricsReport) -> f64| MetricSummary::of(&folds.iter().map(|r| f(&r.report)).collect::<Vec<_>>());
        CvResult {
            accuracy: col(|r| r.accuracy),
            precision: col(|r| r.macro_precision),
            recall: col(|r| r.macro_recall),
            f1: col(|r| r.macro_f1),
            folds,
        }
    }
}

/// Fold `f` is held out for testing; the remaining samples are split
/// stratified 7 : 1 into training and validation and passed to `fit`.
pub fn cross_validate_with<F>(data: &Dataset, k: usize, seed: u64, mut fit: F) -> Result<CvResult, TrainError>
where
    F: FnMut(usize, &Dataset, &Dataset) -> Result<(Model, Option<History>), TrainError>,
{
    let plan = stratified_kfold(&data.labels, data.class_count(), k, seed)?;
    let mut folds = Vec::with_capacity(k);
    for f in 0..k {
        let rest = plan.complement(f);
        let rest_labels: Vec<usize> = rest.iter().map(|&i| data.labels[i]).collect();
        let sub = split_dataset(&rest_labels, data.class_count(), (7.0 / 8.0, 1.0 / 8.0, 0.0), seed ^ (f as u64 + 1))?;
        let pick = |v: &[usize]| v.iter().map(|&j| rest[j]).collect::<Vec<_>>();
        let train_set = data.subset(&pick(&sub.train));
        let val_set = data.subset(&pick(&sub.val));
        let test_set = data.subset(&plan.folds[f]);
        let (model, history) = fit(f, &train_set, &val_set)?;
        let report = evaluate(&model, &test_set)?;
        info!("fold {}/{k}: accuracy {:.4}", f + 1, report.accuracy);
        folds.push(FoldResult {
            fold: f,
            report,
            history,
            train_size: train_set.len(),
            val_size: val_set.len(),
        });
    }
    Ok(CvResult::from_folds(folds))
}

/// A fresh model per fold, seeded with `train_cfg.seed + fold`.
pub fn cross_validate(
    data: &Dataset,
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
    k: usize,
) -> Result<CvResult, TrainError> {
    cross_validate_with(data, k, train_cfg.seed, |f, tr, va| {
        let seed = train_cfg.seed.wrapping_add(f as u64);
        let model = build_model(model_cfg, seed)?;
        let cfg = TrainConfig {
            seed,
            ..train_cfg.clone()
        };
        let (m, h) = train(model, tr, va, &cfg)?;
        Ok((m, Some(h)))
    })
}
