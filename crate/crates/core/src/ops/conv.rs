//! 1D and 2D cross-correlation.
//!
//! Both ranks share one kernel over `[C × H × W]` planes; a 1D signal is a
//! plane with `H = 1`. Every output element is accumulated from `0.0` over
//! `(c_in, k_h, k_w)` in lexicographic order, skipping padded taps, and the
//! bias is added last.

use crate::tensor::{invalid, shape_err, Result, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Padding {
    Valid,
    /// Output extent `ceil(len / stride)`; the left side gets `floor(pad / 2)`.
    Same,
}

impl Padding {
    pub fn as_str(self) -> &'static str {
        match self {
            Padding::Valid => "valid",
            Padding::Same => "same",
        }
    }
}

/// Output extent and left padding along one axis.
pub fn output_geometry(
    len: usize,
    kernel: usize,
    stride: usize,
    padding: Padding,
) -> Option<(usize, usize)> {
    if kernel == 0 || stride == 0 || len == 0 {
        return None;
    }
    match padding {
        Padding::Valid => {
            if kernel > len {
                None
            } else {
                Some(((len - kernel) / stride + 1, 0))
            }
        }
        Padding::Same => {
            let out = len.div_ceil(stride);
            let total = ((out - 1) * stride + kernel).saturating_sub(len);
            Some((out, total / 2))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConvSpec {
    /// `[m]` for 1D or `[k_h, k_w]` for 2D.
    pub kernel: Vec<usize>,
    pub stride: Vec<usize>,
    pub padding: Padding,
    pub in_channels: usize,
    pub out_channels: usize,
}

impl ConvSpec {
    pub fn new_1d(
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: Padding,
    ) -> Result<Self> {
        let s = ConvSpec {
            kernel: vec![kernel],
            stride: vec![stride],
            padding,
            in_channels,
            out_channels,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn new_2d(
        in_channels: usize,
        out_channels: usize,
        kernel: (usize, usize),
        stride: (usize, usize),
        padding: Padding,
    ) -> Result<Self> {
        let s = ConvSpec {
            kernel: vec![kernel.0, kernel.1],
            stride: vec![stride.0, stride.1],
            padding,
            in_channels,
            out_channels,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let rank = self.kernel.len();
        if !(rank == 1 || rank == 2) || self.stride.len() != rank {
            return Err(invalid("ConvSpec", "kernel and stride must both have 1 or 2 extents"));
        }
        if self.kernel.contains(&0) || self.stride.contains(&0) {
            return Err(invalid("ConvSpec", "kernel and stride extents must be >= 1"));
        }
        if self.in_channels == 0 || self.out_channels == 0 {
            return Err(invalid("ConvSpec", "channel counts must be >= 1"));
        }
        Ok(())
    }

    pub fn spatial_rank(&self) -> usize {
        self.kernel.len()
    }

    pub fn weight_shape(&self) -> Vec<usize> {
        let mut s = vec![self.out_channels, self.in_channels];
        s.extend_from_slice(&self.kernel);
        s
    }

    pub fn kernel_volume(&self) -> usize {
        self.kernel.iter().product()
    }

    /// Spatial output extents for the given spatial input extents.
    pub fn output_extents(&self, input: &[usize]) -> Result<Vec<usize>> {
        self.plane(input).map(|p| {
            if self.spatial_rank() == 1 {
                vec![p.ow]
            } else {
                vec![p.oh, p.ow]
            }
        })
    }

    fn plane(&self, spatial: &[usize]) -> Result<Plane> {
        self.validate()?;
        if spatial.len() != self.spatial_rank() {
            return Err(shape_err(
                "conv",
                format!("expected {} spatial axes, got {:?}", self.spatial_rank(), spatial),
            ));
        }
        let (h, w, kh, kw, sh, sw) = if self.spatial_rank() == 1 {
            (1, spatial[0], 1, self.kernel[0], 1, self.stride[0])
        } else {
            (
                spatial[0],
                spatial[1],
                self.kernel[0],
                self.kernel[1],
                self.stride[0],
                self.stride[1],
            )
        };
        let (oh, ph) = output_geometry(h, kh, sh, self.padding).ok_or_else(|| {
            invalid("conv", format!("kernel {kh} exceeds input extent {h} under valid padding"))
        })?;
        let (ow, pw) = output_geometry(w, kw, sw, self.padding).ok_or_else(|| {
            invalid("conv", format!("kernel {kw} exceeds input extent {w} under valid padding"))
        })?;
        Ok(Plane {
            c_in: self.in_channels,
            c_out: self.out_channels,
            h,
            w,
            kh,
            kw,
            sh,
            sw,
            oh,
            ow,
            ph,
            pw,
        })
    }
}

#[derive(Debug, Clone, Copy)]
struct Plane {
    c_in: usize,
    c_out: usize,
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    sh: usize,
    sw: usize,
    oh: usize,
    ow: usize,
    ph: usize,
    pw: usize,
}

impl Plane {
    /// Output positions along one axis whose tap `k` lands inside the input.
    fn valid_range(k: usize, pad: usize, stride: usize, len: usize, out: usize) -> (usize, usize) {
        // need 0 <= o*stride + k - pad < len
        let lo = if pad > k { (pad - k).div_ceil(stride) } else { 0 };
        let hi = if len + pad > k {
            ((len + pad - k - 1) / stride + 1).min(out)
        } else {
            0
        };
        (lo.min(hi), hi)
    }
}

fn check_operands(
    op: &'static str,
    input: &Tensor,
    spec: &ConvSpec,
    weights: &Tensor,
    bias: &Tensor,
) -> Result<Plane> {
    let rank = spec.spatial_rank();
    if input.rank() != rank + 1 {
        return Err(shape_err(
            op,
            format!("input {:?} must have rank {}", input.shape(), rank + 1),
        ));
    }
    if input.shape()[0] != spec.in_channels {
        return Err(shape_err(
            op,
            format!(
                "input has {} channels, spec expects {}",
                input.shape()[0],
                spec.in_channels
            ),
        ));
    }
    if weights.shape() != spec.weight_shape().as_slice() {
        return Err(shape_err(
            op,
            format!(
                "weights {:?} do not match spec {:?}",
                weights.shape(),
                spec.weight_shape()
            ),
        ));
    }
    if bias.shape() != [spec.out_channels] {
        return Err(shape_err(
            op,
            format!("bias {:?} must be [{}]", bias.shape(), spec.out_channels),
        ));
    }
    spec.plane(&input.shape()[1..])
}

fn forward_plane(p: &Plane, x: &[f64], w: &[f64], b: &[f64]) -> Vec<f64> {
    let out_plane = p.oh * p.ow;
    let mut out = vec![0.0; p.c_out * out_plane];
    for co in 0..p.c_out {
        let o = &mut out[co * out_plane..(co + 1) * out_plane];
        for ci in 0..p.c_in {
            let xin = &x[ci * p.h * p.w..(ci + 1) * p.h * p.w];
            for ki in 0..p.kh {
                let (y0, y1) = Plane::valid_range(ki, p.ph, p.sh, p.h, p.oh);
                for kj in 0..p.kw {
                    let wv = w[((co * p.c_in + ci) * p.kh + ki) * p.kw + kj];
                    let (x0, x1) = Plane::valid_range(kj, p.pw, p.sw, p.w, p.ow);
                    for oy in y0..y1 {
                        let iy = oy * p.sh + ki - p.ph;
                        let row = &xin[iy * p.w..(iy + 1) * p.w];
                        let orow = &mut o[oy * p.ow..(oy + 1) * p.ow];
                        if p.sw == 1 {
                            let start = x0 + kj - p.pw;
                            for (ov, xv) in orow[x0..x1].iter_mut().zip(&row[start..start + (x1 - x0)]) {
                                *ov += wv * xv;
                            }
                        } else {
                            for ox in x0..x1 {
                                orow[ox] += wv * row[ox * p.sw + kj - p.pw];
                            }
                        }
                    }
                }
            }
        }
        for v in o.iter_mut() {
            *v += b[co];
        }
    }
    out
}

fn output_tensor(spec: &ConvSpec, p: &Plane, data: Vec<f64>) -> Result<Tensor> {
    let shape = if spec.spatial_rank() == 1 {
        vec![p.c_out, p.ow]
    } else {
        vec![p.c_out, p.oh, p.ow]
    };
    let t = Tensor::from_parts(shape, data);
    t.ensure_finite("conv")?;
    Ok(t)
}

/// `input [C_in × L]`, `weights [C_out × C_in × m]`, `bias [C_out]` → `[C_out × L_out]`.
pub fn conv1d(input: &Tensor, spec: &ConvSpec, weights: &Tensor, bias: &Tensor) -> Result<Tensor> {
    if spec.spatial_rank() != 1 {
        return Err(invalid("conv1d", "spec is not one-dimensional"));
    }
    let p = check_operands("conv1d", input, spec, weights, bias)?;
    output_tensor(spec, &p, forward_plane(&p, input.data(), weights.data(), bias.data()))
}

/// `input [C_in × H × W]`, `weights [C_out × C_in × k_h × k_w]` → `[C_out × H_out × W_out]`.
pub fn conv2d(input: &Tensor, spec: &ConvSpec, weights: &Tensor, bias: &Tensor) -> Result<Tensor> {
    if spec.spatial_rank() != 2 {
        return Err(invalid("conv2d", "spec is not two-dimensional"));
    }
    let p = check_operands("conv2d", input, spec, weights, bias)?;
    output_tensor(spec, &p, forward_plane(&p, input.data(), weights.data(), bias.data()))
}

/// Rank-dispatching convolution.
pub fn conv(input: &Tensor, spec: &ConvSpec, weights: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let p = check_operands("conv", input, spec, weights, bias)?;
    output_tensor(spec, &p, forward_plane(&p, input.data(), weights.data(), bias.data()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvGrads {
    pub input: Tensor,
    pub weights: Tensor,
    pub bias: Tensor,
}

/// Gradients of any rank convolution given the output gradient.
pub fn conv_backward(
    input: &Tensor,
    spec: &ConvSpec,
    weights: &Tensor,
    grad_output: &Tensor,
) -> Result<ConvGrads> {
    let zero_bias = Tensor::zeros(&[spec.out_channels]);
    let p = check_operands("conv_backward", input, spec, weights, &zero_bias)?;
    if grad_output.len() != p.c_out * p.oh * p.ow {
        return Err(shape_err(
            "conv_backward",
            format!("grad_output {:?} does not match output geometry", grad_output.shape()),
        ));
    }
    let x = input.data();
    let w = weights.data();
    let g = grad_output.data();
    let mut gx = vec![0.0; x.len()];
    let mut gw = vec![0.0; w.len()];
    let mut gb = vec![0.0; p.c_out];
    let out_plane = p.oh * p.ow;
    for co in 0..p.c_out {
        let go = &g[co * out_plane..(co + 1) * out_plane];
        gb[co] = go.iter().sum();
        for ci in 0..p.c_in {
            let base = ci * p.h * p.w;
            for ki in 0..p.kh {
                let (y0, y1) = Plane::valid_range(ki, p.ph, p.sh, p.h, p.oh);
                for kj in 0..p.kw {
                    let widx = ((co * p.c_in + ci) * p.kh + ki) * p.kw + kj;
                    let wv = w[widx];
                    let (x0, x1) = Plane::valid_range(kj, p.pw, p.sw, p.w, p.ow);
                    let mut acc = 0.0;
                    for oy in y0..y1 {
                        let iy = oy * p.sh + ki - p.ph;
                        let row = base + iy * p.w;
                        for ox in x0..x1 {
                            let xi = row + ox * p.sw + kj - p.pw;
                            let gv = go[oy * p.ow + ox];
                            acc += gv * x[xi];
                            gx[xi] += gv * wv;
                        }
                    }
                    gw[widx] = acc;
                }
            }
        }
    }
    Ok(ConvGrads {
        input: Tensor::from_parts(input.shape().to_vec(), gx),
        weights: Tensor::from_parts(weights.shape().to_vec(), gw),
        bias: Tensor::from_parts(vec![p.c_out], gb),
    })
}
