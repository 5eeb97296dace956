use crate::tensor::{invalid, shape_err, Result, Tensor};

pub fn relu(x: &Tensor) -> Tensor {
    x.map(|v| v.max(0.0))
}

/// Passes `grad` where `x > 0`; the subgradient at 0 is 0.
pub fn relu_backward(x: &Tensor, grad: &Tensor) -> Result<Tensor> {
    x.zip_map(grad, |v, g| if v > 0.0 { g } else { 0.0 })
}

pub fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

/// Max-shifted softmax over a rank-1 tensor with at least two entries.
pub fn softmax(logits: &Tensor) -> Result<Tensor> {
    if logits.rank() != 1 || logits.len() < 2 {
        return Err(invalid(
            "softmax",
            format!("needs a vector of >= 2 logits, got {:?}", logits.shape()),
        ));
    }
    let m = logits.data().iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.data().iter().map(|z| (z - m).exp()).collect();
    let s: f64 = e.iter().sum();
    Ok(Tensor::from_parts(
        vec![e.len()],
        e.into_iter().map(|v| v / s).collect(),
    ))
}

/// `dz = p ⊙ (g − ⟨p, g⟩)`
pub fn softmax_backward(probs: &Tensor, grad: &Tensor) -> Result<Tensor> {
    if probs.shape() != grad.shape() {
        return Err(shape_err("softmax_backward", "probability and gradient shapes differ"));
    }
    let dot: f64 = probs.data().iter().zip(grad.data()).map(|(p, g)| p * g).sum();
    probs.zip_map(grad, |p, g| p * (g - dot))
}
