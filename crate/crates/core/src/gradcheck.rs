//! Central finite-difference gradient checking.
//!
//! The scalar objective is `Σ r ⊙ op(inputs)` for a fixed pseudo-random
//! projection `r`, so the analytic side only needs `backward(inputs, r)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::tensor::{Tensor, TensorError};

/// An operation with a hand-written vector-Jacobian product.
pub trait Differentiable {
    fn forward(&self, inputs: &[Tensor]) -> Result<Tensor, TensorError>;

    /// Gradient of `Σ grad_output ⊙ forward(inputs)` with respect to every input.
    fn backward(&self, inputs: &[Tensor], grad_output: &Tensor) -> Result<Vec<Tensor>, TensorError>;
}

#[derive(Debug, Error)]
pub enum GradCheckError {
    #[error(transparent)]
    Op(#[from] TensorError),
    #[error("non-finite analytic gradient for input {input} at flat index {index}")]
    NonFiniteGradient { input: usize, index: usize },
    #[error("backward returned {got} gradients for {expected} inputs")]
    Arity { expected: usize, got: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    /// One entry per input tensor.
    pub per_input: Vec<f64>,
    pub tolerance: f64,
    pub passed: bool,
}

const PROJECTION_SEED: u64 = 0x6772_6164;

/// Step `h = 1e-5·max(1, |x|)`; error `‖g_a − g_fd‖∞ / max(1, ‖g_fd‖∞)` per input.
pub fn grad_check(
    op: &dyn Differentiable,
    inputs: &[Tensor],
    tolerance: f64,
) -> Result<GradCheckReport, GradCheckError> {
    let out = op.forward(inputs)?;
    let mut rng = ChaCha8Rng::seed_from_u64(PROJECTION_SEED);
    let proj: Vec<f64> = (0..out.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let proj = Tensor::new(out.shape().to_vec(), proj)?;

    let analytic = op.backward(inputs, &proj)?;
    if analytic.len() != inputs.len() {
        return Err(GradCheckError::Arity {
            expected: inputs.len(),
            got: analytic.len(),
        });
    }
    for (i, g) in analytic.iter().enumerate() {
        if let Some(index) = g.data().iter().position(|v| !v.is_finite()) {
            return Err(GradCheckError::NonFiniteGradient { input: i, index });
        }
    }

    let objective = |xs: &[Tensor]| -> Result<f64, TensorError> {
        let y = op.forward(xs)?;
        Ok(y.data().iter().zip(proj.data()).map(|(a, b)| a * b).sum())
    };

    let mut per_input = Vec::with_capacity(inputs.len());
    let mut work = inputs.to_vec();
    for (i, g) in analytic.iter().enumerate() {
        if g.shape() != inputs[i].shape() {
            return Err(TensorError::Shape {
                op: "grad_check",
                detail: format!(
                    "gradient {:?} vs input {:?} for input {i}",
                    g.shape(),
                    inputs[i].shape()
                ),
            }
            .into());
        }
        let mut max_diff = 0.0f64;
        let mut max_fd = 0.0f64;
        for j in 0..inputs[i].len() {
            let x0 = inputs[i].data()[j];
            let h = 1e-5 * x0.abs().max(1.0);
            work[i].data_mut()[j] = x0 + h;
            let up = objective(&work)?;
            work[i].data_mut()[j] = x0 - h;
            let down = objective(&work)?;
            work[i].data_mut()[j] = x0;
            let fd = (up - down) / (2.0 * h);
            max_diff = max_diff.max((g.data()[j] - fd).abs());
            max_fd = max_fd.max(fd.abs());
        }
        per_input.push(max_diff / max_fd.max(1.0));
    }
    let max_relative_error = per_input.iter().copied().fold(0.0, f64::max);
    Ok(GradCheckReport {
        max_relative_error,
        per_input,
        tolerance,
        passed: max_relative_error < tolerance,
    })
}
