use crate::tensor::Tensor;

use super::TrainError;

const LOG_FLOOR: f64 = 1e-12;

fn check(probs: &Tensor, labels: &[usize]) -> Result<(usize, usize), TrainError> {
    if probs.rank() != 2 || probs.shape()[0] != labels.len() {
        return Err(TrainError::Tensor(crate::tensor::TensorError::Shape {
            op: "sparse_ce",
            detail: format!("probabilities {:?} for {} labels", probs.shape(), labels.len()),
        }));
    }
    let (b, k) = (probs.shape()[0], probs.shape()[1]);
    if b == 0 {
        return Err(TrainError::Empty("batch"));
    }
    if let Some((index, &label)) = labels.iter().enumerate().find(|(_, &l)| l >= k) {
        return Err(TrainError::Label {
            index,
            label,
            classes: k,
        });
    }
    Ok((b, k))
}

/// `−(1/B)·Σ log max(p[b, y_b], 1e-12)`
pub fn sparse_ce_loss(probs: &Tensor, labels: &[usize]) -> Result<f64, TrainError> {
    let (b, _) = check(probs, labels)?;
    let total: f64 = labels
        .iter()
        .enumerate()
        .map(|(i, &y)| -probs.row(i)[y].max(LOG_FLOOR).ln())
        .sum();
    Ok(total / b as f64)
}

/// Gradient of the mean loss with respect to the logits: `(p − onehot)/B`.
pub fn sparse_ce_grad(probs: &Tensor, labels: &[usize]) -> Result<Tensor, TrainError> {
    let (b, k) = check(probs, labels)?;
    let mut g = probs.scale(1.0 / b as f64);
    for (i, &y) in labels.iter().enumerate() {
        g.data_mut()[i * k + y] -= 1.0 / b as f64;
    }
    Ok(g)
}
