//! Inverted dropout: survivors are scaled by `1/(1 − rate)` at train time.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Mode;
use crate::tensor::{invalid, Result, Tensor};

/// Per-element multipliers, each `0` or `1/(1 − rate)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMask(pub Tensor);

impl DropoutMask {
    pub fn apply(&self, x: &Tensor) -> Result<Tensor> {
        x.zip_map(&self.0, |a, m| a * m)
    }

    /// The backward pass is the same elementwise product.
    pub fn backward(&self, grad: &Tensor) -> Result<Tensor> {
        self.apply(grad)
    }
}

fn check_rate(rate: f64) -> Result<()> {
    if !(0.0..1.0).contains(&rate) {
        return Err(invalid("dropout", format!("rate {rate} must lie in [0, 1)")));
    }
    Ok(())
}

pub fn dropout_mask(shape: &[usize], rate: f64, seed: u64) -> Result<DropoutMask> {
    check_rate(rate)?;
    let keep = 1.0 / (1.0 - rate);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n: usize = shape.iter().product();
    let data = (0..n)
        .map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep })
        .collect();
    Tensor::new(shape.to_vec(), data).map(DropoutMask)
}

/// Returns the output and, in train mode with a positive rate, the mask used.
pub fn dropout(x: &Tensor, rate: f64, mode: Mode, seed: u64) -> Result<(Tensor, Option<DropoutMask>)> {
    check_rate(rate)?;
    if mode == Mode::Infer || rate == 0.0 {
        return Ok((x.clone(), None));
    }
    let mask = dropout_mask(x.shape(), rate, seed)?;
    Ok((mask.apply(x)?, Some(mask)))
}
