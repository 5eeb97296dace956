//! Max pooling over `[C × L]` or `[C × H × W]`. Padded positions never win.

use super::conv::{output_geometry, Padding};
use crate::tensor::{invalid, shape_err, Result, Tensor};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PoolSpec {
    pub window: Vec<usize>,
    pub stride: Vec<usize>,
    pub padding: Padding,
}

impl PoolSpec {
    pub fn new(window: Vec<usize>, stride: Vec<usize>, padding: Padding) -> Result<Self> {
        let s = PoolSpec {
            window,
            stride,
            padding,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let r = self.window.len();
        if !(r == 1 || r == 2) || self.stride.len() != r {
            return Err(invalid("maxpool", "window and stride must both have 1 or 2 extents"));
        }
        if self.window.contains(&0) || self.stride.contains(&0) {
            return Err(invalid("maxpool", "window and stride extents must be >= 1"));
        }
        Ok(())
    }

    pub fn output_extents(&self, spatial: &[usize]) -> Result<Vec<usize>> {
        Ok(self.geometry(spatial)?.iter().map(|a| a.out).collect())
    }

    fn geometry(&self, spatial: &[usize]) -> Result<Vec<Axis>> {
        self.validate()?;
        if spatial.len() != self.window.len() {
            return Err(shape_err(
                "maxpool",
                format!("window {:?} vs spatial extents {:?}", self.window, spatial),
            ));
        }
        spatial
            .iter()
            .zip(self.window.iter().zip(&self.stride))
            .map(|(&len, (&k, &s))| {
                let (out, pad) = output_geometry(len, k, s, self.padding).ok_or_else(|| {
                    invalid(
                        "maxpool",
                        format!("window {k} larger than input extent {len} under valid padding"),
                    )
                })?;
                Ok(Axis {
                    len,
                    k,
                    s,
                    out,
                    pad,
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy)]
struct Axis {
    len: usize,
    k: usize,
    s: usize,
    out: usize,
    pad: usize,
}

impl Axis {
    fn span(&self, o: usize) -> (usize, usize) {
        let start = (o * self.s) as isize - self.pad as isize;
        let lo = start.max(0) as usize;
        let hi = ((start + self.k as isize).max(0) as usize).min(self.len);
        (lo, hi)
    }
}

fn as_plane(input: &Tensor, spec: &PoolSpec) -> Result<(usize, Axis, Axis)> {
    let rank = spec.window.len();
    if input.rank() != rank + 1 {
        return Err(shape_err(
            "maxpool",
            format!("input {:?} must have rank {}", input.shape(), rank + 1),
        ));
    }
    let axes = spec.geometry(&input.shape()[1..])?;
    let unit = Axis {
        len: 1,
        k: 1,
        s: 1,
        out: 1,
        pad: 0,
    };
    let (ay, ax) = if rank == 1 {
        (unit, axes[0])
    } else {
        (axes[0], axes[1])
    };
    Ok((input.shape()[0], ay, ax))
}

/// Returns pooled values and the flat input index each one came from
/// (first maximum in scan order).
pub fn maxpool_with_indices(input: &Tensor, spec: &PoolSpec) -> Result<(Tensor, Vec<usize>)> {
    let (c, ay, ax) = as_plane(input, spec)?;
    let x = input.data();
    let plane = ay.len * ax.len;
    let mut out = Vec::with_capacity(c * ay.out * ax.out);
    let mut idx = Vec::with_capacity(out.capacity());
    for ch in 0..c {
        for oy in 0..ay.out {
            let (y0, y1) = ay.span(oy);
            for ox in 0..ax.out {
                let (x0, x1) = ax.span(ox);
                let mut best = f64::NEG_INFINITY;
                let mut at = usize::MAX;
                for iy in y0..y1 {
                    for ix in x0..x1 {
                        let i = ch * plane + iy * ax.len + ix;
                        if x[i] > best {
                            best = x[i];
                            at = i;
                        }
                    }
                }
                out.push(best);
                idx.push(at);
            }
        }
    }
    let mut shape = vec![c];
    if spec.window.len() == 2 {
        shape.push(ay.out);
    }
    shape.push(ax.out);
    let t = Tensor::from_parts(shape, out);
    t.ensure_finite("maxpool")?;
    Ok((t, idx))
}

pub fn maxpool(input: &Tensor, spec: &PoolSpec) -> Result<Tensor> {
    maxpool_with_indices(input, spec).map(|(t, _)| t)
}

/// Routes each output gradient to its winning input position.
pub fn maxpool_backward(input: &Tensor, spec: &PoolSpec, grad_output: &Tensor) -> Result<Tensor> {
    let (out, idx) = maxpool_with_indices(input, spec)?;
    if grad_output.shape() != out.shape() {
        return Err(shape_err(
            "maxpool_backward",
            format!("grad_output {:?} vs output {:?}", grad_output.shape(), out.shape()),
        ));
    }
    Ok(scatter(input.shape(), &idx, grad_output))
}

pub(crate) fn scatter(shape: &[usize], idx: &[usize], grad_output: &Tensor) -> Tensor {
    let mut g = vec![0.0; shape.iter().product()];
    for (&i, &v) in idx.iter().zip(grad_output.data()) {
        g[i] += v;
    }
    Tensor::from_parts(shape.to_vec(), g)
}

/// Maximum over all spatial positions of each channel: `[C × …] → [C]`.
pub fn global_maxpool_with_indices(input: &Tensor) -> (Tensor, Vec<usize>) {
    let c = input.shape()[0];
    let plane = input.len() / c;
    let mut out = Vec::with_capacity(c);
    let mut idx = Vec::with_capacity(c);
    for (ch, chunk) in input.data().chunks(plane).enumerate() {
        let (mut at, mut best) = (0, chunk[0]);
        for (i, &v) in chunk.iter().enumerate().skip(1) {
            if v > best {
                best = v;
                at = i;
            }
        }
        out.push(best);
        idx.push(ch * plane + at);
    }
    (Tensor::from_parts(vec![c], out), idx)
}
