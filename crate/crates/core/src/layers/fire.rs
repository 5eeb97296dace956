//! Squeeze/expand fire module over `[C × H × W]` feature maps.

use super::activation::{relu, relu_backward};
use crate::ops::conv::{conv, conv_backward, ConvSpec, Padding};
use crate::tensor::{shape_err, Result, Tensor};

#[derive(Debug, Clone, PartialEq)]
pub struct FireParams {
    /// `[s × C × 1 × 1]`
    pub squeeze_weights: Tensor,
    pub squeeze_bias: Tensor,
    /// `[e1 × s × 1 × 1]`
    pub expand1_weights: Tensor,
    pub expand1_bias: Tensor,
    /// `[e3 × s × 3 × 3]`
    pub expand3_weights: Tensor,
    pub expand3_bias: Tensor,
}

impl FireParams {
    pub fn zeros(in_channels: usize, squeeze: usize, expand1: usize, expand3: usize) -> Self {
        FireParams {
            squeeze_weights: Tensor::zeros(&[squeeze, in_channels, 1, 1]),
            squeeze_bias: Tensor::zeros(&[squeeze]),
            expand1_weights: Tensor::zeros(&[expand1, squeeze, 1, 1]),
            expand1_bias: Tensor::zeros(&[expand1]),
            expand3_weights: Tensor::zeros(&[expand3, squeeze, 3, 3]),
            expand3_bias: Tensor::zeros(&[expand3]),
        }
    }

    pub fn in_channels(&self) -> usize {
        self.squeeze_weights.shape()[1]
    }

    pub fn squeeze_channels(&self) -> usize {
        self.squeeze_weights.shape()[0]
    }

    pub fn expand1_channels(&self) -> usize {
        self.expand1_weights.shape()[0]
    }

    pub fn expand3_channels(&self) -> usize {
        self.expand3_weights.shape()[0]
    }

    pub fn out_channels(&self) -> usize {
        self.expand1_channels() + self.expand3_channels()
    }

    /// `s / (e1 + e3)`
    pub fn squeeze_ratio(&self) -> f64 {
        self.squeeze_channels() as f64 / self.out_channels() as f64
    }

    pub fn param_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn tensors(&self) -> Vec<&Tensor> {
        vec![
            &self.squeeze_weights,
            &self.squeeze_bias,
            &self.expand1_weights,
            &self.expand1_bias,
            &self.expand3_weights,
            &self.expand3_bias,
        ]
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        vec![
            &mut self.squeeze_weights,
            &mut self.squeeze_bias,
            &mut self.expand1_weights,
            &mut self.expand1_bias,
            &mut self.expand3_weights,
            &mut self.expand3_bias,
        ]
    }

    fn specs(&self) -> Result<[ConvSpec; 3]> {
        let (c, s) = (self.in_channels(), self.squeeze_channels());
        let ok = self.squeeze_weights.shape() == [s, c, 1, 1]
            && self.squeeze_bias.shape() == [s]
            && self.expand1_weights.shape() == [self.expand1_channels(), s, 1, 1]
            && self.expand1_bias.shape() == [self.expand1_channels()]
            && self.expand3_weights.shape() == [self.expand3_channels(), s, 3, 3]
            && self.expand3_bias.shape() == [self.expand3_channels()];
        if !ok {
            return Err(shape_err("fire", "inconsistent squeeze/expand parameter shapes"));
        }
        Ok([
            ConvSpec::new_2d(c, s, (1, 1), (1, 1), Padding::Same)?,
            ConvSpec::new_2d(s, self.expand1_channels(), (1, 1), (1, 1), Padding::Same)?,
            ConvSpec::new_2d(s, self.expand3_channels(), (3, 3), (1, 1), Padding::Same)?,
        ])
    }
}

#[derive(Debug, Clone)]
pub struct FireCache {
    input: Tensor,
    squeezed: Tensor,
    pre_squeeze: Tensor,
    pre_expand1: Tensor,
    pre_expand3: Tensor,
}

pub fn fire_forward_cached(x: &Tensor, p: &FireParams) -> Result<(Tensor, FireCache)> {
    let [sq, e1, e3] = p.specs()?;
    let pre_squeeze = conv(x, &sq, &p.squeeze_weights, &p.squeeze_bias)?;
    let squeezed = relu(&pre_squeeze);
    let pre_expand1 = conv(&squeezed, &e1, &p.expand1_weights, &p.expand1_bias)?;
    let pre_expand3 = conv(&squeezed, &e3, &p.expand3_weights, &p.expand3_bias)?;
    let (h, w) = (x.shape()[1], x.shape()[2]);
    let mut data = relu(&pre_expand1).into_data();
    data.extend(relu(&pre_expand3).into_data());
    let out = Tensor::from_parts(vec![p.out_channels(), h, w], data);
    Ok((
        out,
        FireCache {
            input: x.clone(),
            squeezed,
            pre_squeeze,
            pre_expand1,
            pre_expand3,
        },
    ))
}

/// `[C × H × W] → [(e1 + e3) × H × W]`
pub fn fire_forward(x: &Tensor, p: &FireParams) -> Result<Tensor> {
    fire_forward_cached(x, p).map(|(y, _)| y)
}

/// Returns the input gradient and parameter gradients (same layout as `FireParams`).
pub fn fire_backward(cache: &FireCache, p: &FireParams, grad: &Tensor) -> Result<(Tensor, FireParams)> {
    let [sq, e1, e3] = p.specs()?;
    let (h, w) = (cache.input.shape()[1], cache.input.shape()[2]);
    if grad.shape() != [p.out_channels(), h, w] {
        return Err(shape_err("fire_backward", format!("gradient {:?}", grad.shape())));
    }
    let split = p.expand1_channels() * h * w;
    let g1 = Tensor::from_parts(vec![p.expand1_channels(), h, w], grad.data()[..split].to_vec());
    let g3 = Tensor::from_parts(vec![p.expand3_channels(), h, w], grad.data()[split..].to_vec());
    let g1 = relu_backward(&cache.pre_expand1, &g1)?;
    let g3 = relu_backward(&cache.pre_expand3, &g3)?;
    let b1 = conv_backward(&cache.squeezed, &e1, &p.expand1_weights, &g1)?;
    let b3 = conv_backward(&cache.squeezed, &e3, &p.expand3_weights, &g3)?;
    let gs = relu_backward(&cache.pre_squeeze, &b1.input.add(&b3.input)?)?;
    let bs = conv_backward(&cache.input, &sq, &p.squeeze_weights, &gs)?;
    Ok((
        bs.input,
        FireParams {
            squeeze_weights: bs.weights,
            squeeze_bias: bs.bias,
            expand1_weights: b1.weights,
            expand1_bias: b1.bias,
            expand3_weights: b3.weights,
            expand3_bias: b3.bias,
        },
    ))
}
