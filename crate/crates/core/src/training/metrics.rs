//! Confusion matrices and one-vs-rest metrics.

use crate::layers::Mode;
use crate::model::{forward, Model};
use crate::signal::Dataset;

use super::TrainError;

#[derive(Debug, Clone, PartialEq)]
pub struct ClassMetrics {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
    /// `TP + FP = 0`; precision reported as 0.
    pub precision_undefined: bool,
    /// `TP + FN = 0`; recall reported as 0.
    pub recall_undefined: bool,
}

impl ClassMetrics {
    pub fn from_counts(tp: usize, fp: usize, tn: usize, fn_: usize) -> Self {
        let ratio = |n: usize, d: usize| if d == 0 { 0.0 } else { n as f64 / d as f64 };
        ClassMetrics {
            tp,
            fp,
            tn,
            fn_,
            precision: ratio(tp, tp + fp),
            recall: ratio(tp, tp + fn_),
            f1: ratio(2 * tp, 2 * tp + fp + fn_),
            accuracy: ratio(tp + tn, tp + fp + tn + fn_),
            precision_undefined: tp + fp == 0,
            recall_undefined: tp + fn_ == 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub class_names: Vec<String>,
    /// `confusion[truth][prediction]`
    pub confusion: Vec<Vec<usize>>,
    pub per_class: Vec<ClassMetrics>,
    /// Correct predictions over all samples.
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub macro_accuracy: f64,
}

impl MetricsReport {
    pub fn from_confusion(confusion: Vec<Vec<usize>>, class_names: Vec<String>) -> Result<Self, TrainError> {
        let k = confusion.len();
        if confusion.iter().any(|r| r.len() != k) || class_names.len() != k {
            return Err(TrainError::Config("confusion matrix must be K × K with K names".into()));
        }
        let total: usize = confusion.iter().flatten().sum();
        if total == 0 {
            return Err(TrainError::Empty("evaluation set"));
        }
        let per_class: Vec<ClassMetrics> = (0..k)
            .map(|c| {
                let tp = confusion[c][c];
                let fn_ = confusion[c].iter().sum::<usize>() - tp;
                let fp = (0..k).map(|r| confusion[r][c]).sum::<usize>() - tp;
                ClassMetrics::from_counts(tp, fp, total - tp - fp - fn_, fn_)
            })
            .collect();
        let mean = |f: fn(&ClassMetrics) -> f64| per_class.iter().map(f).sum::<f64>() / k as f64;
        let correct: usize = (0..k).map(|c| confusion[c][c]).sum();
        Ok(MetricsReport {
            accuracy: correct as f64 / total as f64,
            macro_precision: mean(|m| m.precision),
            macro_recall: mean(|m| m.recall),
            macro_f1: mean(|m| m.f1),
            macro_accuracy: mean(|m| m.accuracy),
            per_class,
            confusion,
            class_names,
        })
    }

    pub fn from_predictions(truth: &[usize], predicted: &[usize], class_names: Vec<String>) -> Result<Self, TrainError> {
        let k = class_names.len();
        if truth.len() != predicted.len() {
            return Err(TrainError::Config(format!(
                "{} labels vs {} predictions",
                truth.len(),
                predicted.len()
            )));
        }
        let mut confusion = vec![vec![0; k]; k];
        for (i, (&t, &p)) in truth.iter().zip(predicted).enumerate() {
            if t >= k || p >= k {
                return Err(TrainError::Label {
                    index: i,
                    label: t.max(p),
                    classes: k,
                });
            }
            confusion[t][p] += 1;
        }
        Self::from_confusion(confusion, class_names)
    }

    pub fn total(&self) -> usize {
        self.confusion.iter().flatten().sum()
    }

    /// `ΣTP / Σ(TP + FP)`
    pub fn micro_precision(&self) -> f64 {
        let tp: usize = self.per_class.iter().map(|m| m.tp).sum();
        let fp: usize = self.per_class.iter().map(|m| m.fp).sum();
        tp as f64 / (tp + fp) as f64
    }

    /// `ΣTP / Σ(TP + FN)`
    pub fn micro_recall(&self) -> f64 {
        let tp: usize = self.per_class.iter().map(|m| m.tp).sum();
        let fn_: usize = self.per_class.iter().map(|m| m.fn_).sum();
        tp as f64 / (tp + fn_) as f64
    }
}

const EVAL_BATCH: usize = 32;

/// Inference-mode class probabilities `[N × K]`, row-major.
pub fn predict(model: &Model, data: &Dataset) -> Result<Vec<Vec<f64>>, TrainError> {
    let idx: Vec<usize> = (0..data.len()).collect();
    let mut out = Vec::with_capacity(data.len());
    for chunk in idx.chunks(EVAL_BATCH) {
        let p = forward(model, &data.batch(chunk)?, Mode::Infer, 0)?;
        for i in 0..chunk.len() {
            out.push(p.row(i).to_vec());
        }
    }
    Ok(out)
}

pub(crate) fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

pub fn evaluate(model: &Model, data: &Dataset) -> Result<MetricsReport, TrainError> {
    if data.is_empty() {
        return Err(TrainError::Empty("evaluation set"));
    }
    let k = model.config().class_count;
    if data.class_count() != k {
        return Err(TrainError::ClassMismatch {
            model: k,
            data: data.class_count(),
        });
    }
    let predicted: Vec<usize> = predict(model, data)?.iter().map(|r| argmax(r)).collect();
    MetricsReport::from_predictions(&data.labels, &predicted, data.class_names.clone())
}
