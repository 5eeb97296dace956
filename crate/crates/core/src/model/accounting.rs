//! Parameter and FLOP accounting for a single-sample forward pass.
//!
//! One multiply-accumulate counts as two FLOPs. Per layer:
//!
//! | layer | FLOPs |
//! |---|---|
//! | conv | `Cout·|out|·(2·Cin·|kernel| + 1)` (the `+1` is the bias add) |
//! | batch-norm | 2 per element (scale and shift) |
//! | ReLU | 1 per element |
//! | max-pool | `|window| − 1` comparisons per output |
//! | global max | `|spatial| − 1` comparisons per channel |
//! | fire | its three convolutions and three ReLUs |
//! | LSTM step | `2·4H·(D+H)` + `13H` pointwise (+`6H` with peepholes) |
//! | dense | `2·K·D + K` |
//! | skip add | `2H` |
//! | softmax | `3K` (exp, sum, divide) |
//!
//! Dropout is the identity at inference and costs nothing.

use super::config::{LayerSpec, PlannedLayer};
use super::Model;

/// One row of the FLOP audit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerFlops {
    pub name: String,
    pub params: u64,
    pub flops: u64,
}

fn conv_flops(c_out: usize, out_volume: usize, c_in: usize, kernel_volume: usize) -> u64 {
    (c_out * out_volume * (2 * c_in * kernel_volume + 1)) as u64
}

fn branch_rows(branch: &str, planned: &[PlannedLayer], out: &mut Vec<LayerFlops>) {
    for (i, p) in planned.iter().enumerate() {
        let out_elems: usize = p.output.iter().product();
        let (params, flops) = match &p.layer {
            LayerSpec::Conv(spec) => {
                let k = spec.kernel_volume();
                (
                    spec.out_channels * spec.in_channels * k + spec.out_channels,
                    conv_flops(spec.out_channels, out_elems / spec.out_channels, spec.in_channels, k),
                )
            }
            LayerSpec::BatchNorm { channels } => (2 * channels, 2 * out_elems as u64),
            LayerSpec::Relu => (0, out_elems as u64),
            LayerSpec::MaxPool(spec) => (0, (out_elems * (spec.window.iter().product::<usize>() - 1)) as u64),
            LayerSpec::Fire {
                in_channels: c,
                squeeze: s,
                expand1: e1,
                expand3: e3,
            } => {
                let hw = p.output[1] * p.output[2];
                let params = s * c + s + e1 * s + e1 + 9 * e3 * s + e3;
                let flops = conv_flops(*s, hw, *c, 1)
                    + conv_flops(*e1, hw, *s, 1)
                    + conv_flops(*e3, hw, *s, 9)
                    + ((s + e1 + e3) * hw) as u64;
                (params, flops)
            }
            LayerSpec::GlobalMaxPool => {
                let spatial: usize = p.input[1..].iter().product();
                (0, (p.input[0] * (spatial - 1)) as u64)
            }
        };
        out.push(LayerFlops {
            name: format!("{branch}.{i}.{}", p.layer.kind()),
            params: params as u64,
            flops,
        });
    }
}

/// Per-layer audit in forward order.
pub fn flop_breakdown(model: &Model) -> Vec<LayerFlops> {
    let cfg = model.config();
    let plan = model.plan();
    let mut rows = Vec::new();
    branch_rows("ffe", &plan.ffe, &mut rows);
    branch_rows("pe", &plan.pe, &mut rows);
    branch_rows("afe", &plan.afe, &mut rows);

    let h = cfg.lstm_hidden;
    let t = cfg.seq_steps;
    let pointwise = if cfg.lstm_peephole { 19 * h } else { 13 * h };
    for layer in 0..cfg.lstm_layers {
        let d = if layer == 0 { cfg.seq_features } else { 2 * h };
        let per_dir_params = 4 * h * d + 4 * h * h + 4 * h + if cfg.lstm_peephole { 3 * h } else { 0 };
        let step = 2 * 4 * h * (d + h) + pointwise;
        rows.push(LayerFlops {
            name: format!("lstm.{layer}"),
            params: 2 * per_dir_params as u64,
            flops: (2 * t * step) as u64,
        });
    }
    let w = cfg.skip_width;
    let c = plan.concat_len;
    let k = cfg.class_count;
    rows.push(LayerFlops {
        name: "skip".into(),
        params: (w * c + w) as u64,
        flops: (2 * w * c + w) as u64,
    });
    rows.push(LayerFlops {
        name: "skip.add".into(),
        params: 0,
        flops: w as u64,
    });
    rows.push(LayerFlops {
        name: "head".into(),
        params: (k * w + k) as u64,
        flops: (2 * k * w + k) as u64,
    });
    rows.push(LayerFlops {
        name: "softmax".into(),
        params: 0,
        flops: 3 * k as u64,
    });
    rows
}

/// Trainable element count; batch-norm running statistics are excluded.
pub fn count_params(model: &Model) -> u64 {
    model.params().iter().map(|(_, t)| t.len() as u64).sum()
}

pub fn count_flops(model: &Model) -> u64 {
    flop_breakdown(model).iter().map(|r| r.flops).sum()
}
