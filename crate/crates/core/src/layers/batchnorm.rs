//! Per-channel batch normalization over `[B × C × …]`.

use super::Mode;
use crate::tensor::{invalid, shape_err, Result, Tensor};

#[derive(Debug, Clone, PartialEq)]
pub struct BatchNormParams {
    pub gamma: Tensor,
    pub beta: Tensor,
    pub running_mean: Tensor,
    pub running_var: Tensor,
    /// Weight kept by the running statistics on each update.
    pub momentum: f64,
    pub epsilon: f64,
}

impl BatchNormParams {
    pub fn new(channels: usize, momentum: f64, epsilon: f64) -> Self {
        BatchNormParams {
            gamma: Tensor::full(&[channels], 1.0),
            beta: Tensor::zeros(&[channels]),
            running_mean: Tensor::zeros(&[channels]),
            running_var: Tensor::full(&[channels], 1.0),
            momentum,
            epsilon,
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.len()
    }
}

#[derive(Debug, Clone)]
pub struct BatchNormCache {
    x_hat: Tensor,
    inv_std: Vec<f64>,
    mode: Mode,
}

#[derive(Debug, Clone)]
pub struct BatchNormOutput {
    pub output: Tensor,
    pub cache: BatchNormCache,
    /// Updated `(running_mean, running_var)`; only produced in train mode.
    pub running: Option<(Tensor, Tensor)>,
}

fn layout(x: &Tensor, params: &BatchNormParams) -> Result<(usize, usize, usize)> {
    if x.rank() < 2 {
        return Err(shape_err("batchnorm", format!("input {:?} must be [B × C × …]", x.shape())));
    }
    let (b, c) = (x.shape()[0], x.shape()[1]);
    if c != params.channels() {
        return Err(shape_err(
            "batchnorm",
            format!("input has {c} channels, parameters have {}", params.channels()),
        ));
    }
    if params.epsilon <= 0.0 {
        return Err(invalid("batchnorm", "epsilon must be positive"));
    }
    Ok((b, c, x.len() / (b * c)))
}

pub fn batchnorm_forward(x: &Tensor, params: &BatchNormParams, mode: Mode) -> Result<BatchNormOutput> {
    let (b, c, s) = layout(x, params)?;
    let data = x.data();
    let (mean, var, running) = match mode {
        Mode::Train => {
            if b < 2 {
                return Err(invalid("batchnorm", "train mode needs a batch of at least 2"));
            }
            let n = (b * s) as f64;
            let mut mean = vec![0.0; c];
            let mut var = vec![0.0; c];
            for ch in 0..c {
                let mut acc = 0.0;
                for bi in 0..b {
                    acc += data[(bi * c + ch) * s..(bi * c + ch + 1) * s].iter().sum::<f64>();
                }
                mean[ch] = acc / n;
                let mut sq = 0.0;
                for bi in 0..b {
                    for v in &data[(bi * c + ch) * s..(bi * c + ch + 1) * s] {
                        sq += (v - mean[ch]).powi(2);
                    }
                }
                var[ch] = sq / n;
            }
            let m = params.momentum;
            let rm = params
                .running_mean
                .data()
                .iter()
                .zip(&mean)
                .map(|(r, v)| m * r + (1.0 - m) * v)
                .collect();
            let rv = params
                .running_var
                .data()
                .iter()
                .zip(&var)
                .map(|(r, v)| m * r + (1.0 - m) * v)
                .collect();
            let running = Some((
                Tensor::from_parts(vec![c], rm),
                Tensor::from_parts(vec![c], rv),
            ));
            (mean, var, running)
        }
        Mode::Infer => (
            params.running_mean.data().to_vec(),
            params.running_var.data().to_vec(),
            None,
        ),
    };
    let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + params.epsilon).sqrt()).collect();
    let mut x_hat = vec![0.0; data.len()];
    let mut out = vec![0.0; data.len()];
    for bi in 0..b {
        for ch in 0..c {
            let (g, be) = (params.gamma.data()[ch], params.beta.data()[ch]);
            for i in (bi * c + ch) * s..(bi * c + ch + 1) * s {
                let h = (data[i] - mean[ch]) * inv_std[ch];
                x_hat[i] = h;
                out[i] = h * g + be;
            }
        }
    }
    let output = Tensor::from_parts(x.shape().to_vec(), out);
    output.ensure_finite("batchnorm")?;
    Ok(BatchNormOutput {
        output,
        cache: BatchNormCache {
            x_hat: Tensor::from_parts(x.shape().to_vec(), x_hat),
            inv_std,
            mode,
        },
        running,
    })
}

/// Returns `(d_input, d_gamma, d_beta)`.
pub fn batchnorm_backward(
    cache: &BatchNormCache,
    params: &BatchNormParams,
    grad: &Tensor,
) -> Result<(Tensor, Tensor, Tensor)> {
    if grad.shape() != cache.x_hat.shape() {
        return Err(shape_err("batchnorm_backward", "gradient shape differs from the input"));
    }
    let (b, c, s) = layout(grad, params)?;
    let g = grad.data();
    let xh = cache.x_hat.data();
    let mut dgamma = vec![0.0; c];
    let mut dbeta = vec![0.0; c];
    for bi in 0..b {
        for ch in 0..c {
            for i in (bi * c + ch) * s..(bi * c + ch + 1) * s {
                dgamma[ch] += g[i] * xh[i];
                dbeta[ch] += g[i];
            }
        }
    }
    let n = (b * s) as f64;
    let mut dx = vec![0.0; g.len()];
    for bi in 0..b {
        for ch in 0..c {
            let k = params.gamma.data()[ch] * cache.inv_std[ch];
            for i in (bi * c + ch) * s..(bi * c + ch + 1) * s {
                dx[i] = match cache.mode {
                    Mode::Train => k * (g[i] - dbeta[ch] / n - xh[i] * dgamma[ch] / n),
                    Mode::Infer => k * g[i],
                };
            }
        }
    }
    Ok((
        Tensor::from_parts(grad.shape().to_vec(), dx),
        Tensor::from_parts(vec![c], dgamma),
        Tensor::from_parts(vec![c], dbeta),
    ))
}
