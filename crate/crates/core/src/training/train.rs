//! Mini-batch training with best-epoch retention and early stopping.

use log::info;
use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::layers::Mode;
use crate::model::{backward, forward_traced, Model, RunMode};
use crate::signal::Dataset;

use super::adam::{adam_step, AdamState};
use super::loss::{sparse_ce_grad, sparse_ce_loss};
use super::metrics::{argmax, predict};
use super::{TrainConfig, TrainError};

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_loss: Option<f64>,
    pub val_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct History {
    pub records: Vec<EpochRecord>,
    /// Epoch whose weights were retained.
    pub best_epoch: usize,
    pub stopped_early: bool,
}

fn check_data(model: &Model, data: &Dataset) -> Result<(), TrainError> {
    let cfg = model.config();
    if data.class_count() != cfg.class_count {
        return Err(TrainError::ClassMismatch {
            model: cfg.class_count,
            data: data.class_count(),
        });
    }
    if let Some(c) = data.clips.iter().find(|c| c.samples.len() != cfg.input_len) {
        return Err(TrainError::Model(crate::model::ModelError::InputLength {
            expected: cfg.input_len,
            got: c.samples.len(),
        }));
    }
    if let Some((index, &label)) = data.labels.iter().enumerate().find(|(_, &l)| l >= cfg.class_count) {
        return Err(TrainError::Label {
            index,
            label,
            classes: cfg.class_count,
        });
    }
    Ok(())
}

/// Inference-mode mean loss and accuracy.
fn measure(model: &Model, data: &Dataset) -> Result<(f64, f64), TrainError> {
    let probs = predict(model, data)?;
    let mut loss = 0.0;
    let mut correct = 0;
    for (row, &y) in probs.iter().zip(&data.labels) {
        loss -= row[y].max(1e-12).ln();
        if argmax(row) == y {
            correct += 1;
        }
    }
    let n = data.len() as f64;
    Ok((loss / n, correct as f64 / n))
}

/// Shuffled mini-batches; a trailing batch of one joins its predecessor so
/// batch statistics stay defined.
fn batches(n: usize, size: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut out: Vec<Vec<usize>> = order.chunks(size).map(|c| c.to_vec()).collect();
    if out.len() > 1 && out.last().is_some_and(|b| b.len() == 1) {
        let last = out.pop().unwrap();
        out.last_mut().unwrap().extend(last);
    }
    out
}

/// Trains for up to `cfg.epochs` epochs and returns the weights of the best
/// epoch: highest validation accuracy, ties broken by lower validation loss
/// (training metrics when `val` is empty).
pub fn train(mut model: Model, train: &Dataset, val: &Dataset, cfg: &TrainConfig) -> Result<(Model, History), TrainError> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(TrainError::Empty("training set"));
    }
    check_data(&model, train)?;
    if !val.is_empty() {
        check_data(&model, val)?;
    }
    let names: Vec<String> = model.params().into_iter().map(|(n, _)| n).collect();
    let mut adam = AdamState::new(model.params().into_iter().map(|(_, t)| t));
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mode = RunMode {
        dropout: Mode::Train,
        batchnorm: if cfg.freeze_batchnorm { Mode::Infer } else { Mode::Train },
    };

    let mut history = History::default();
    let mut best: Option<(f64, f64, Model)> = None;
    let mut stale = 0;
    for epoch in 1..=cfg.epochs {
        for (bi, idx) in batches(train.len(), cfg.batch_size, &mut rng).into_iter().enumerate() {
            let x = train.batch(&idx)?;
            let y: Vec<usize> = idx.iter().map(|&i| train.labels[i]).collect();
            let trace = forward_traced(&model, &x, mode, rng.next_u64())?;
            let loss = sparse_ce_loss(&trace.probs, &y)?;
            if !loss.is_finite() {
                return Err(TrainError::NonFiniteLoss { epoch, batch: bi });
            }
            let grads = backward(&model, &trace, &sparse_ce_grad(&trace.probs, &y)?)?;
            adam_step(model.params_mut(), &names, &grads.tensors, &mut adam, cfg)?;
            if !cfg.freeze_batchnorm {
                model.apply_running_updates(&trace.running_updates);
            }
        }

        let (train_loss, train_accuracy) = measure(&model, train)?;
        let (val_loss, val_accuracy) = if val.is_empty() {
            (None, None)
        } else {
            let (l, a) = measure(&model, val)?;
            (Some(l), Some(a))
        };
        info!(
            "epoch {epoch}: train loss {train_loss:.4} acc {train_accuracy:.3}{}",
            match (val_loss, val_accuracy) {
                (Some(l), Some(a)) => format!(", val loss {l:.4} acc {a:.3}"),
                _ => String::new(),
            }
        );
        history.records.push(EpochRecord {
            epoch,
            train_loss,
            train_accuracy,
            val_loss,
            val_accuracy,
        });

        let (acc, loss) = (val_accuracy.unwrap_or(train_accuracy), val_loss.unwrap_or(train_loss));
        let improved = match &best {
            None => true,
            Some((ba, bl, _)) => acc > *ba || (acc == *ba && loss < *bl),
        };
        if improved {
            best = Some((acc, loss, model.clone()));
            history.best_epoch = epoch;
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                history.stopped_early = true;
                break;
            }
        }
    }
    let model = best.map(|(_, _, m)| m).unwrap_or(model);
    Ok((model, history))
}
