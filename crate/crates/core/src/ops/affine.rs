use crate::tensor::{shape_err, Result, Tensor};

fn check(input: &Tensor, weights: &Tensor, bias: &Tensor) -> Result<(usize, usize)> {
    if weights.rank() != 2 {
        return Err(shape_err("affine", format!("weights {:?} must be [K × D]", weights.shape())));
    }
    let (k, d) = (weights.shape()[0], weights.shape()[1]);
    if input.len() != d || input.rank() != 1 {
        return Err(shape_err(
            "affine",
            format!("input {:?} does not match weights {:?}", input.shape(), weights.shape()),
        ));
    }
    if bias.shape() != [k] {
        return Err(shape_err("affine", format!("bias {:?} must be [{k}]", bias.shape())));
    }
    Ok((k, d))
}

/// `y_k = Σ_d w_kd·x_d + b_k`
pub fn affine(input: &Tensor, weights: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let (k, d) = check(input, weights, bias)?;
    let x = input.data();
    let out: Vec<f64> = (0..k)
        .map(|r| {
            let row = &weights.data()[r * d..(r + 1) * d];
            row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + bias.data()[r]
        })
        .collect();
    let t = Tensor::from_parts(vec![k], out);
    t.ensure_finite("affine")?;
    Ok(t)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AffineGrads {
    pub input: Tensor,
    pub weights: Tensor,
    pub bias: Tensor,
}

pub fn affine_backward(input: &Tensor, weights: &Tensor, grad_output: &Tensor) -> Result<AffineGrads> {
    let (k, d) = check(input, weights, grad_output)?;
    let x = input.data();
    let g = grad_output.data();
    let mut gx = vec![0.0; d];
    let mut gw = vec![0.0; k * d];
    for r in 0..k {
        let row = &weights.data()[r * d..(r + 1) * d];
        for c in 0..d {
            gx[c] += g[r] * row[c];
            gw[r * d + c] = g[r] * x[c];
        }
    }
    Ok(AffineGrads {
        input: Tensor::from_parts(vec![d], gx),
        weights: Tensor::from_parts(vec![k, d], gw),
        bias: grad_output.clone(),
    })
}
