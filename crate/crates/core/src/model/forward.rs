//! Batched forward pass with caches, and the matching backward pass.

use super::{Layer, Model, ModelError};
use crate::layers::{
    batchnorm_backward, batchnorm_forward, bilstm_backward, bilstm_forward_cached, dropout_mask, fire_backward,
    fire_forward_cached, relu, relu_backward, softmax, BatchNormCache, BiLstmCache, BiLstmParams, FireCache,
    Mode,
};
use crate::ops::affine::{affine, affine_backward};
use crate::ops::conv::{conv, conv_backward};
use crate::ops::pool::{global_maxpool_with_indices, maxpool, maxpool_backward, scatter};
use crate::tensor::Tensor;

/// Per-layer behaviour switches. Training with frozen batch-norm uses
/// `dropout: Train, batchnorm: Infer`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunMode {
    pub dropout: Mode,
    pub batchnorm: Mode,
}

impl From<Mode> for RunMode {
    fn from(mode: Mode) -> Self {
        RunMode {
            dropout: mode,
            batchnorm: mode,
        }
    }
}

/// Flattened branch features of one sample and their concatenation.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchOutputs {
    pub x_afe: Tensor,
    pub x_ffe: Tensor,
    pub x_pe: Tensor,
    pub x_concat: Tensor,
}

#[derive(Debug, Clone)]
enum LayerCache {
    Inputs(Vec<Tensor>),
    BatchNorm(BatchNormCache),
    Fire(Vec<FireCache>),
    GlobalMax(Vec<(Vec<usize>, Vec<usize>)>),
}

/// Updated running statistics of one batch-norm layer.
#[derive(Debug, Clone, PartialEq)]
pub struct RunningUpdate {
    pub branch: usize,
    pub layer: usize,
    pub mean: Tensor,
    pub var: Tensor,
}

#[derive(Debug, Clone)]
pub struct ForwardTrace {
    /// `[B × K]`
    pub probs: Tensor,
    pub logits: Tensor,
    pub features: Vec<BranchOutputs>,
    pub running_updates: Vec<RunningUpdate>,
    branch_caches: [Vec<LayerCache>; 3],
    branch_shapes: [Vec<usize>; 3],
    lstm_caches: Vec<Vec<BiLstmCache>>,
    dropped: Vec<Tensor>,
    mask: Option<Tensor>,
}

/// Parameter gradients aligned with [`Model::params`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub tensors: Vec<Tensor>,
}

fn run_layers(
    layers: &[Layer],
    mut xs: Vec<Tensor>,
    mode: Mode,
    branch: usize,
    updates: &mut Vec<RunningUpdate>,
) -> Result<(Vec<Tensor>, Vec<LayerCache>), ModelError> {
    let mut caches = Vec::with_capacity(layers.len());
    for (li, layer) in layers.iter().enumerate() {
        let (next, cache) = match layer {
            Layer::Conv { spec, weights, bias } => {
                let ys = xs.iter().map(|x| conv(x, spec, weights, bias)).collect::<Result<Vec<_>, _>>()?;
                (ys, LayerCache::Inputs(xs))
            }
            Layer::BatchNorm(p) => {
                let out = batchnorm_forward(&Tensor::stack(&xs)?, p, mode)?;
                if let Some((mean, var)) = out.running {
                    updates.push(RunningUpdate {
                        branch,
                        layer: li,
                        mean,
                        var,
                    });
                }
                (out.output.unstack(), LayerCache::BatchNorm(out.cache))
            }
            Layer::Relu => {
                let ys = xs.iter().map(relu).collect();
                (ys, LayerCache::Inputs(xs))
            }
            Layer::MaxPool(spec) => {
                let ys = xs.iter().map(|x| maxpool(x, spec)).collect::<Result<Vec<_>, _>>()?;
                (ys, LayerCache::Inputs(xs))
            }
            Layer::Fire(p) => {
                let mut ys = Vec::with_capacity(xs.len());
                let mut cs = Vec::with_capacity(xs.len());
                for x in &xs {
                    let (y, c) = fire_forward_cached(x, p)?;
                    ys.push(y);
                    cs.push(c);
                }
                (ys, LayerCache::Fire(cs))
            }
            Layer::GlobalMaxPool => {
                let mut ys = Vec::with_capacity(xs.len());
                let mut idx = Vec::with_capacity(xs.len());
                for x in &xs {
                    let (y, i) = global_maxpool_with_indices(x);
                    ys.push(y);
                    idx.push((x.shape().to_vec(), i));
                }
                (ys, LayerCache::GlobalMax(idx))
            }
        };
        caches.push(cache);
        xs = next;
    }
    Ok((xs, caches))
}

fn accumulate(acc: &mut Option<Vec<Tensor>>, grads: Vec<Tensor>) -> Result<(), ModelError> {
    match acc {
        None => *acc = Some(grads),
        Some(a) => {
            for (x, g) in a.iter_mut().zip(&grads) {
                x.add_assign(g)?;
            }
        }
    }
    Ok(())
}

/// Returns per-layer parameter gradients (empty for parameter-free layers).
fn back_layers(
    layers: &[Layer],
    caches: &[LayerCache],
    mut grads: Vec<Tensor>,
) -> Result<Vec<Vec<Tensor>>, ModelError> {
    let mut per_layer = vec![Vec::new(); layers.len()];
    for (li, (layer, cache)) in layers.iter().zip(caches).enumerate().rev() {
        let mut acc: Option<Vec<Tensor>> = None;
        let next = match (layer, cache) {
            (Layer::Conv { spec, weights, .. }, LayerCache::Inputs(xs)) => {
                let mut gx = Vec::with_capacity(xs.len());
                for (x, g) in xs.iter().zip(&grads) {
                    let cg = conv_backward(x, spec, weights, g)?;
                    gx.push(cg.input);
                    accumulate(&mut acc, vec![cg.weights, cg.bias])?;
                }
                gx
            }
            (Layer::BatchNorm(p), LayerCache::BatchNorm(c)) => {
                let (dx, dg, db) = batchnorm_backward(c, p, &Tensor::stack(&grads)?)?;
                acc = Some(vec![dg, db]);
                dx.unstack()
            }
            (Layer::Relu, LayerCache::Inputs(xs)) => xs
                .iter()
                .zip(&grads)
                .map(|(x, g)| relu_backward(x, g))
                .collect::<Result<Vec<_>, _>>()?,
            (Layer::MaxPool(spec), LayerCache::Inputs(xs)) => xs
                .iter()
                .zip(&grads)
                .map(|(x, g)| maxpool_backward(x, spec, g))
                .collect::<Result<Vec<_>, _>>()?,
            (Layer::Fire(p), LayerCache::Fire(cs)) => {
                let mut gx = Vec::with_capacity(cs.len());
                for (c, g) in cs.iter().zip(&grads) {
                    let (dx, dp) = fire_backward(c, p, g)?;
                    gx.push(dx);
                    accumulate(&mut acc, dp.tensors().into_iter().cloned().collect())?;
                }
                gx
            }
            (Layer::GlobalMaxPool, LayerCache::GlobalMax(idx)) => idx
                .iter()
                .zip(&grads)
                .map(|((shape, i), g)| scatter(shape, i, g))
                .collect(),
            _ => unreachable!("layer/cache mismatch"),
        };
        per_layer[li] = acc.unwrap_or_default();
        grads = next;
    }
    Ok(per_layer)
}

fn check_batch(model: &Model, batch: &Tensor) -> Result<usize, ModelError> {
    let expected = model.config().input_len;
    if batch.rank() != 2 || batch.shape()[1] != expected {
        return Err(ModelError::InputLength {
            expected,
            got: batch.shape().get(1).copied().unwrap_or(batch.len()),
        });
    }
    Ok(batch.shape()[0])
}

/// Full forward pass keeping every cache needed by [`backward`].
pub fn forward_traced(model: &Model, batch: &Tensor, mode: RunMode, seed: u64) -> Result<ForwardTrace, ModelError> {
    let b = check_batch(model, batch)?;
    let cfg = model.config();
    let signals: Vec<Tensor> = batch
        .unstack()
        .into_iter()
        .map(|s| s.reshape(vec![1, cfg.input_len]))
        .collect::<Result<_, _>>()?;
    let planes: Vec<Tensor> = signals
        .iter()
        .map(|s| s.clone().reshape(vec![1, cfg.afe_rows, cfg.afe_cols]))
        .collect::<Result<_, _>>()?;

    let mut updates = Vec::new();
    let (ffe_out, ffe_c) = run_layers(&model.ffe, signals.clone(), mode.batchnorm, 0, &mut updates)?;
    let (pe_out, pe_c) = run_layers(&model.pe, signals, mode.batchnorm, 1, &mut updates)?;
    let (afe_out, afe_c) = run_layers(&model.afe, planes, mode.batchnorm, 2, &mut updates)?;
    let branch_shapes = [
        ffe_out[0].shape().to_vec(),
        pe_out[0].shape().to_vec(),
        afe_out[0].shape().to_vec(),
    ];

    let (t, d) = (cfg.seq_steps, cfg.seq_features);
    let width = cfg.skip_width;
    let mut features = Vec::with_capacity(b);
    let mut lstm_caches = Vec::with_capacity(b);
    let mut z_all = Vec::with_capacity(b * width);
    for ((fo, po), ao) in ffe_out.into_iter().zip(pe_out).zip(afe_out) {
        let (x_afe, x_ffe, x_pe) = (ao.flatten(), fo.flatten(), po.flatten());
        let x_concat = Tensor::concat(&[&x_afe, &x_ffe, &x_pe]);
        let mut seq = x_concat.data().to_vec();
        seq.resize(t * d, 0.0);
        let mut seq = Tensor::new(vec![t, d], seq)?;
        let mut caches = Vec::with_capacity(model.recurrent.len());
        for p in &model.recurrent {
            let (y, c) = bilstm_forward_cached(&seq, p)?;
            caches.push(c);
            seq = y;
        }
        let skip = affine(&x_concat, &model.skip.weights, &model.skip.bias)?;
        z_all.extend(seq.row(t - 1).iter().zip(skip.data()).map(|(a, s)| a + s));
        lstm_caches.push(caches);
        features.push(BranchOutputs {
            x_afe,
            x_ffe,
            x_pe,
            x_concat,
        });
    }

    let mask = if mode.dropout == Mode::Train && cfg.dropout > 0.0 {
        Some(dropout_mask(&[b, width], cfg.dropout, seed)?.0)
    } else {
        None
    };
    if let Some(m) = &mask {
        for (z, k) in z_all.iter_mut().zip(m.data()) {
            *z *= k;
        }
    }
    let dropped = Tensor::new(vec![b, width], z_all)?.unstack();

    let k = cfg.class_count;
    let mut logits = Vec::with_capacity(b * k);
    let mut probs = Vec::with_capacity(b * k);
    for z in &dropped {
        let l = affine(z, &model.head.weights, &model.head.bias)?;
        probs.extend_from_slice(softmax(&l)?.data());
        logits.extend_from_slice(l.data());
    }
    Ok(ForwardTrace {
        probs: Tensor::new(vec![b, k], probs)?,
        logits: Tensor::new(vec![b, k], logits)?,
        features,
        running_updates: updates,
        branch_caches: [ffe_c, pe_c, afe_c],
        branch_shapes,
        lstm_caches,
        dropped,
        mask,
    })
}

/// Class probabilities `[B × K]` for a batch `[B × L]`.
pub fn forward(model: &Model, batch: &Tensor, mode: Mode, seed: u64) -> Result<Tensor, ModelError> {
    forward_traced(model, batch, mode.into(), seed).map(|t| t.probs)
}

/// Backpropagates a gradient on the logits `[B × K]` to every parameter.
pub fn backward(model: &Model, trace: &ForwardTrace, grad_logits: &Tensor) -> Result<Gradients, ModelError> {
    let cfg = model.config();
    let b = trace.dropped.len();
    let k = cfg.class_count;
    if grad_logits.shape() != [b, k] {
        return Err(ModelError::Tensor(crate::tensor::TensorError::Shape {
            op: "backward",
            detail: format!("logit gradient {:?} vs [{b} × {k}]", grad_logits.shape()),
        }));
    }
    let (t, width) = (cfg.seq_steps, cfg.skip_width);
    let plan = model.plan();
    let mut head_acc: Option<Vec<Tensor>> = None;
    let mut skip_acc: Option<Vec<Tensor>> = None;
    let mut lstm_acc: Vec<Option<BiLstmParams>> = vec![None; model.recurrent.len()];
    let mut branch_grads: [Vec<Tensor>; 3] = Default::default();

    for s in 0..b {
        let g = Tensor::from_vec(grad_logits.row(s).to_vec());
        let hg = affine_backward(&trace.dropped[s], &model.head.weights, &g)?;
        accumulate(&mut head_acc, vec![hg.weights, hg.bias])?;
        let mut dz = hg.input;
        if let Some(m) = &trace.mask {
            for (v, k) in dz.data_mut().iter_mut().zip(m.row(s)) {
                *v *= k;
            }
        }
        let feats = &trace.features[s];
        let sg = affine_backward(&feats.x_concat, &model.skip.weights, &dz)?;
        accumulate(&mut skip_acc, vec![sg.weights, sg.bias])?;

        let mut dseq = vec![0.0; t * width];
        dseq[(t - 1) * width..].copy_from_slice(dz.data());
        let mut dseq = Tensor::new(vec![t, width], dseq)?;
        for (l, p) in model.recurrent.iter().enumerate().rev() {
            let (dx, dp) = bilstm_backward(&trace.lstm_caches[s][l], p, &dseq)?;
            match &mut lstm_acc[l] {
                None => lstm_acc[l] = Some(dp),
                Some(acc) => {
                    for (a, g) in acc.tensors_mut().into_iter().zip(dp.tensors()) {
                        a.add_assign(g)?;
                    }
                }
            }
            dseq = dx;
        }
        let mut dconcat = sg.input.into_data();
        for (a, v) in dconcat.iter_mut().zip(dseq.data()) {
            *a += v;
        }
        let (afe_part, rest) = dconcat.split_at(plan.afe_len);
        let (ffe_part, pe_part) = rest.split_at(plan.ffe_len);
        for (slot, part) in [(0, ffe_part), (1, pe_part), (2, afe_part)] {
            branch_grads[slot].push(Tensor::new(trace.branch_shapes[slot].clone(), part.to_vec())?);
        }
    }

    let mut out = Vec::new();
    let branches = [&model.ffe, &model.pe, &model.afe];
    for (slot, grads) in branch_grads.into_iter().enumerate() {
        let per_layer = back_layers(branches[slot], &trace.branch_caches[slot], grads)?;
        out.extend(per_layer.into_iter().flatten());
    }
    for acc in lstm_acc {
        out.extend(acc.expect("at least one sample").tensors().into_iter().cloned());
    }
    out.extend(skip_acc.expect("at least one sample"));
    out.extend(head_acc.expect("at least one sample"));
    for (t, (name, p)) in out.iter().zip(model.params()) {
        debug_assert_eq!(t.shape(), p.shape(), "{name}");
    }
    Ok(Gradients { tensors: out })
}

impl Model {
    /// Writes batch-norm running statistics produced by a train-mode pass.
    pub fn apply_running_updates(&mut self, updates: &[RunningUpdate]) {
        for u in updates {
            let layers = match u.branch {
                0 => &mut self.ffe,
                1 => &mut self.pe,
                _ => &mut self.afe,
            };
            if let Layer::BatchNorm(p) = &mut layers[u.layer] {
                p.running_mean = u.mean.clone();
                p.running_var = u.var.clone();
            }
        }
    }
}
