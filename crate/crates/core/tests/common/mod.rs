//! Layer checks shared by the layer tests and the acceptance report.

#![allow(dead_code)]

use cardioxnet::gradcheck::{grad_check, Differentiable};
use cardioxnet::layers::{
    batchnorm_backward, batchnorm_forward, bilstm_backward, bilstm_forward_cached, fire_backward,
    fire_forward_cached, lstm_step, lstm_step_backward, lstm_step_cached, softmax, BatchNormParams, BiLstmParams,
    FireParams, LstmParams, LstmState, Mode,
};
use cardioxnet::ops::affine::{affine, affine_backward};
use cardioxnet::ops::conv::{conv, conv_backward, ConvSpec, Padding};
use cardioxnet::ops::pool::{maxpool, maxpool_backward, PoolSpec};
use cardioxnet::training::{sparse_ce_grad, sparse_ce_loss};
use cardioxnet::{Tensor, TensorError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const GRAD_TOLERANCE: f64 = 1e-4;
pub const SHAPES_PER_LAYER: usize = 20;
pub const ORACLE_INSTANCES: usize = 100;
pub const LSTM_ORACLE_TOLERANCE: f64 = 1e-12;

pub const LAYERS: [&str; 9] = [
    "conv1d",
    "conv2d",
    "maxpool",
    "affine",
    "batchnorm",
    "lstm_cell",
    "bilstm",
    "fire",
    "softmax_ce",
];

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn padding(r: &mut ChaCha8Rng) -> Padding {
    if r.random_bool(0.5) {
        Padding::Same
    } else {
        Padding::Valid
    }
}

struct Conv(ConvSpec);

impl Differentiable for Conv {
    fn forward(&self, x: &[Tensor]) -> Result<Tensor, TensorError> {
        conv(&x[0], &self.0, &x[1], &x[2])
    }
    fn backward(&self, x: &[Tensor], g: &Tensor) -> Result<Vec<Tensor>, TensorError> {
        let r = conv_backward(&x[0], &self.0, &x[1], g)?;
        Ok(vec![r.input, r.weights, r.bias])
    }
}

struct Pool(PoolSpec);

impl Differentiable for Pool {
    fn forward(&self, x: &[Tensor]) -> Result<Tensor, TensorError> {
        maxpool(&x[0], &self.0)
    }
    fn backward(&self, x: &[Tensor], g: &Tensor) -> Result<Vec<Tensor>, TensorError> {
        Ok(vec![maxpool_backward(&x[0], &self.0, g)?])
    }
}

struct Affine;

impl Differentiable for Affine {
    fn forward(&self, x: &[Tensor]) -> Result<Tensor, TensorError> {
        affine(&x[0], &x[1], &x[2])
    }
    fn backward(&self, x: &[Tensor], g: &Tensor) -> Result<Vec<Tensor>, TensorError> {
        let r = affine_backward(&x[0], &x[1], g)?;
        Ok(vec![r.input, r.weights, r.bias])
    }
}

struct BatchNorm {
    template: BatchNormParams,
    mode: Mode,
}

impl BatchNorm {
    fn params(&self, x: &[Tensor]) -> BatchNormParams {
        BatchNormParams {
            gamma: x[1].clone(),
            beta: x[2].clone(),
            ..self.template.clone()
        }
    }
}

impl Differentiable for BatchNorm {
    fn forward(&self, x: &[Tensor]) -> Result<Tensor, TensorError> {
        Ok(batchnorm_forward(&x[0], &self.params(x), self.mode)?.output)
    }
    fn backward(&self, x: &[Tensor], g: &Tensor) -> Result<Vec<Tensor>, TensorError> {
        let p = self.params(x);
        let out = batchnorm_forward(&x[0], &p, self.mode)?;
        let (dx, dg, db) = batchnorm_backward(&out.cache, &p, g)?;
        Ok(vec![dx, dg, db])
    }
}

fn lstm_from(ts: &[Tensor], peephole: bool) -> LstmParams {
    LstmParams {
        input_weights: ts[0].clone(),
        recurrent_weights: ts[1].clone(),
        bias: ts[2].clone(),
        peephole: peephole.then(|| ts[3].clone()),
    }
}

/// Inputs `[x, h_prev, c_prev, params…]`; output `[h ‖ c]`.
struct Cell {
    peephole: bool,
}

impl Differentiable for Cell {
    fn forward(&self, x: &[Tensor]) -> Result<Tensor, TensorError> {
        let p = lstm_from(&x[3..], self.peephole);
        let s = lstm_step(&x[0], &LstmState { h: x[1].clone(), c: x[2].clone() }, &p)?;
        Ok(Tensor::concat(&[&s.h, &s.c]))
    }
    fn backward(&self, x: &[Tensor], g: &Tensor) -> Result<Vec<Tensor>, TensorError> {
        let p = lstm_from(&x[3..], self.peephole);
        let (_, cache) = lstm_step_cached(&x[0], &LstmState { h: x[1].clone(), c: x[2].clone() }, &p)?;
        let h = p.hidden_size();
        let mut acc = LstmParams::zeros(p.input_size(), h, self.peephole);
        let s = lstm_step_backward(&cache, &p, &g.data()[..h], &g.data()[h..], &mut acc);
        let mut out = vec![
            Tensor::from_vec(s.x),
            Tensor::from_vec(s.h_prev),
            Tensor::from_vec(s.c_prev),
        ];
        out.extend(acc.tensors().into_iter().cloned());
        Ok(out)
    }
}

/// Inputs `[seq, forward params…, backward params…]`.
struct BiLstm {
    peephole: bool,
}

impl BiLstm {
    fn params(&self, x: &[Tensor]) -> BiLstmParams {
        let n = if self.peephole { 4 } else { 3 };
        BiLstmParams {
            forward: lstm_from(&x[1..1 + n], self.peephole),
            backward: lstm_from(&x[1 + n..], self.peephole),
        }
    }
}

impl Differentiable for BiLstm {
    fn forward(&self, x: &[Tensor]) -> Result<Tensor, TensorError> {
        Ok(bilstm_forward_cached(&x[0], &self.params(x))?.0)
    }
    fn backward(&self, x: &[Tensor], g: &Tensor) -> Result<Vec<Tensor>, TensorError> {
        let p = self.params(x);
        let (_, cache) = bilstm_forward_cached(&x[0], &p)?;
        let (dseq, grads) = bilstm_backward(&cache, &p, g)?;
        let mut out = vec![dseq];
        out.extend(grads.tensors().into_iter().cloned());
        Ok(out)
    }
}

struct Fire;

fn fire_from(ts: &[Tensor]) -> FireParams {
    FireParams {
        squeeze_weights: ts[0].clone(),
        squeeze_bias: ts[1].clone(),
        expand1_weights: ts[2].clone(),
        expand1_bias: ts[3].clone(),
        expand3_weights: ts[4].clone(),
        expand3_bias: ts[5].clone(),
    }
}

impl Differentiable for Fire {
    fn forward(&self, x: &[Tensor]) -> Result<Tensor, TensorError> {
        Ok(fire_forward_cached(&x[0], &fire_from(&x[1..]))?.0)
    }
    fn backward(&self, x: &[Tensor], g: &Tensor) -> Result<Vec<Tensor>, TensorError> {
        let p = fire_from(&x[1..]);
        let (_, cache) = fire_forward_cached(&x[0], &p)?;
        let (dx, grads) = fire_backward(&cache, &p, g)?;
        let mut out = vec![dx];
        out.extend(grads.tensors().into_iter().cloned());
        Ok(out)
    }
}

/// Mean sparse cross-entropy of row-wise softmax, as a one-element output.
struct SoftmaxCe {
    labels: Vec<usize>,
}

pub fn softmax_rows(z: &Tensor) -> Result<Tensor, TensorError> {
    let rows = z.unstack().iter().map(softmax).collect::<Result<Vec<_>, _>>()?;
    Tensor::stack(&rows)
}

impl Differentiable for SoftmaxCe {
    fn forward(&self, x: &[Tensor]) -> Result<Tensor, TensorError> {
        let loss = sparse_ce_loss(&softmax_rows(&x[0])?, &self.labels).expect("valid labels");
        Ok(Tensor::from_vec(vec![loss]))
    }
    fn backward(&self, x: &[Tensor], g: &Tensor) -> Result<Vec<Tensor>, TensorError> {
        let grad = sparse_ce_grad(&softmax_rows(&x[0])?, &self.labels).expect("valid labels");
        Ok(vec![grad.scale(g.data()[0])])
    }
}

fn u(r: &mut ChaCha8Rng, shape: &[usize], bound: f64) -> Tensor {
    Tensor::uniform(shape, bound, r)
}

/// One random instance of `layer`; returns the op and its inputs.
fn instance(layer: &str, r: &mut ChaCha8Rng) -> (Box<dyn Differentiable>, Vec<Tensor>) {
    match layer {
        "conv1d" => {
            let (ci, co) = (r.random_range(1..4), r.random_range(1..4));
            let (k, s) = (r.random_range(1..6), r.random_range(1..4));
            let len = r.random_range(k..k + 12);
            let spec = ConvSpec::new_1d(ci, co, k, s, padding(r)).unwrap();
            let inputs = vec![u(r, &[ci, len], 1.0), u(r, &spec.weight_shape(), 1.0), u(r, &[co], 0.5)];
            (Box::new(Conv(spec)), inputs)
        }
        "conv2d" => {
            let (ci, co) = (r.random_range(1..3), r.random_range(1..3));
            let k = (r.random_range(1..4), r.random_range(1..4));
            let s = (r.random_range(1..3), r.random_range(1..3));
            let (h, w) = (r.random_range(k.0..k.0 + 5), r.random_range(k.1..k.1 + 5));
            let spec = ConvSpec::new_2d(ci, co, k, s, padding(r)).unwrap();
            let inputs = vec![u(r, &[ci, h, w], 1.0), u(r, &spec.weight_shape(), 1.0), u(r, &[co], 0.5)];
            (Box::new(Conv(spec)), inputs)
        }
        "maxpool" => {
            let c = r.random_range(1..4);
            let spec = if r.random_bool(0.5) {
                let k = r.random_range(1..5);
                PoolSpec::new(vec![k], vec![r.random_range(1..4)], padding(r)).unwrap()
            } else {
                let k = vec![r.random_range(1..4), r.random_range(1..4)];
                PoolSpec::new(k, vec![r.random_range(1..3), r.random_range(1..3)], padding(r)).unwrap()
            };
            let spatial: Vec<usize> = spec.window.iter().map(|&k| r.random_range(k..k + 8)).collect();
            let mut shape = vec![c];
            shape.extend(spatial);
            (Box::new(Pool(spec)), vec![u(r, &shape, 1.0)])
        }
        "affine" => {
            let (k, d) = (r.random_range(1..8), r.random_range(1..10));
            (Box::new(Affine), vec![u(r, &[d], 1.0), u(r, &[k, d], 1.0), u(r, &[k], 1.0)])
        }
        "batchnorm" => {
            let (b, c) = (r.random_range(2..5), r.random_range(1..4));
            let mut shape = vec![b, c];
            for _ in 0..r.random_range(0..3) {
                shape.push(r.random_range(1..4));
            }
            let mut template = BatchNormParams::new(c, 0.9, 1e-5);
            template.running_mean = u(r, &[c], 0.5);
            template.running_var = Tensor::new(vec![c], (0..c).map(|_| r.random_range(0.5..2.0)).collect()).unwrap();
            let mode = if r.random_bool(0.75) { Mode::Train } else { Mode::Infer };
            let inputs = vec![u(r, &shape, 2.0), u(r, &[c], 1.5), u(r, &[c], 1.0)];
            (Box::new(BatchNorm { template, mode }), inputs)
        }
        "lstm_cell" => {
            let (d, h) = (r.random_range(1..6), r.random_range(1..6));
            let peephole = r.random_bool(0.5);
            let mut inputs = vec![
                u(r, &[d], 1.0),
                u(r, &[h], 1.0),
                u(r, &[h], 1.0),
                u(r, &[4 * h, d], 0.8),
                u(r, &[4 * h, h], 0.8),
                u(r, &[4 * h], 0.5),
            ];
            if peephole {
                inputs.push(u(r, &[3, h], 0.5));
            }
            (Box::new(Cell { peephole }), inputs)
        }
        "bilstm" => {
            let (t, d, h) = (r.random_range(1..5), r.random_range(1..4), r.random_range(1..4));
            let peephole = r.random_bool(0.5);
            let mut inputs = vec![u(r, &[t, d], 1.0)];
            for _ in 0..2 {
                inputs.extend([u(r, &[4 * h, d], 0.8), u(r, &[4 * h, h], 0.8), u(r, &[4 * h], 0.5)]);
                if peephole {
                    inputs.push(u(r, &[3, h], 0.5));
                }
            }
            (Box::new(BiLstm { peephole }), inputs)
        }
        "fire" => {
            let (c, s) = (r.random_range(1..4), r.random_range(1..3));
            let (e1, e3) = (r.random_range(1..4), r.random_range(1..4));
            let (h, w) = (r.random_range(1..5), r.random_range(1..5));
            let inputs = vec![
                u(r, &[c, h, w], 1.0),
                u(r, &[s, c, 1, 1], 1.0),
                u(r, &[s], 0.5),
                u(r, &[e1, s, 1, 1], 1.0),
                u(r, &[e1], 0.5),
                u(r, &[e3, s, 3, 3], 1.0),
                u(r, &[e3], 0.5),
            ];
            (Box::new(Fire), inputs)
        }
        "softmax_ce" => {
            let (b, k) = (r.random_range(1..6), r.random_range(2..8));
            let labels = (0..b).map(|_| r.random_range(0..k)).collect();
            (Box::new(SoftmaxCe { labels }), vec![u(r, &[b, k], 3.0)])
        }
        other => panic!("unknown layer {other}"),
    }
}

/// Worst finite-difference error of `layer` over `shapes` random instances.
pub fn worst_gradient_error(layer: &str, shapes: usize, seed: u64) -> f64 {
    let mut r = rng(seed);
    (0..shapes)
        .map(|_| {
            let (op, inputs) = instance(layer, &mut r);
            grad_check(op.as_ref(), &inputs, GRAD_TOLERANCE)
                .unwrap_or_else(|e| panic!("{layer}: {e}"))
                .max_relative_error
        })
        .fold(0.0, f64::max)
}

/// Largest deviation of the softmax+CE logit gradient from `(p − onehot)/B`,
/// both sides computed independently of the library gradient.
pub fn softmax_ce_closed_form_error(cases: usize, seed: u64) -> f64 {
    let mut r = rng(seed);
    let mut worst = 0.0f64;
    for _ in 0..cases {
        let (b, k) = (r.random_range(1..6), r.random_range(2..8));
        let z = u(&mut r, &[b, k], 3.0);
        let y: Vec<usize> = (0..b).map(|_| r.random_range(0..k)).collect();
        let loss = |z: &Tensor| -> f64 {
            (0..b)
                .map(|i| {
                    let row = z.row(i);
                    let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    let lse = m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
                    lse - row[y[i]]
                })
                .sum::<f64>()
                / b as f64
        };
        for j in 0..z.len() {
            let (i, c) = (j / k, j % k);
            let row = z.row(i);
            let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let s: f64 = row.iter().map(|v| (v - m).exp()).sum();
            let p = (row[c] - m).exp() / s;
            let closed = (p - if c == y[i] { 1.0 } else { 0.0 }) / b as f64;
            let h = 1e-5;
            let (mut up, mut down) = (z.clone(), z.clone());
            up.data_mut()[j] += h;
            down.data_mut()[j] -= h;
            let fd = (loss(&up) - loss(&down)) / (2.0 * h);
            worst = worst.max((fd - closed).abs());
        }
    }
    worst
}

// ---- brute-force oracles ----

/// Left padding and output extent written out from the definitions.
fn axis(len: usize, k: usize, s: usize, pad: Padding) -> (usize, usize) {
    match pad {
        Padding::Valid => ((len - k) / s + 1, 0),
        Padding::Same => {
            let out = (len + s - 1) / s;
            let need = ((out - 1) * s + k) as i64 - len as i64;
            (out, need.max(0) as usize / 2)
        }
    }
}

/// Direct loops over `[C × H × W]`; taps in `(c, i, j)` order from 0.0, bias last.
fn conv_oracle(x: &Tensor, spec: &ConvSpec, w: &Tensor, b: &Tensor) -> Vec<f64> {
    let (ci, co) = (spec.in_channels, spec.out_channels);
    let (h, wd, kh, kw, sh, sw) = if spec.kernel.len() == 1 {
        (1, x.shape()[1], 1, spec.kernel[0], 1, spec.stride[0])
    } else {
        (x.shape()[1], x.shape()[2], spec.kernel[0], spec.kernel[1], spec.stride[0], spec.stride[1])
    };
    let (oh, ph) = axis(h, kh, sh, spec.padding);
    let (ow, pw) = axis(wd, kw, sw, spec.padding);
    let mut out = Vec::with_capacity(co * oh * ow);
    for o in 0..co {
        for y in 0..oh {
            for xo in 0..ow {
                let mut acc = 0.0;
                for c in 0..ci {
                    for i in 0..kh {
                        for j in 0..kw {
                            let iy = (y * sh + i) as i64 - ph as i64;
                            let ix = (xo * sw + j) as i64 - pw as i64;
                            if iy < 0 || ix < 0 || iy >= h as i64 || ix >= wd as i64 {
                                continue;
                            }
                            let xv = x.data()[(c * h + iy as usize) * wd + ix as usize];
                            let wv = w.data()[((o * ci + c) * kh + i) * kw + j];
                            acc += xv * wv;
                        }
                    }
                }
                out.push(acc + b.data()[o]);
            }
        }
    }
    out
}

fn pool_oracle(x: &Tensor, spec: &PoolSpec) -> Vec<f64> {
    let c = x.shape()[0];
    let (h, wd, kh, kw, sh, sw) = if spec.window.len() == 1 {
        (1, x.shape()[1], 1, spec.window[0], 1, spec.stride[0])
    } else {
        (x.shape()[1], x.shape()[2], spec.window[0], spec.window[1], spec.stride[0], spec.stride[1])
    };
    let (oh, ph) = axis(h, kh, sh, spec.padding);
    let (ow, pw) = axis(wd, kw, sw, spec.padding);
    let mut out = Vec::new();
    for ch in 0..c {
        for y in 0..oh {
            for xo in 0..ow {
                // strict comparison: the first maximum in scan order wins ties
                let mut best: Option<f64> = None;
                for i in 0..kh {
                    for j in 0..kw {
                        let iy = (y * sh + i) as i64 - ph as i64;
                        let ix = (xo * sw + j) as i64 - pw as i64;
                        if iy >= 0 && ix >= 0 && iy < h as i64 && ix < wd as i64 {
                            let v = x.data()[(ch * h + iy as usize) * wd + ix as usize];
                            if best.is_none_or(|b| v > b) {
                                best = Some(v);
                            }
                        }
                    }
                }
                out.push(best.expect("window overlaps the input"));
            }
        }
    }
    out
}

/// Instances where the library output differs bitwise from the loop oracle.
pub fn conv1d_oracle_mismatches(instances: usize, seed: u64) -> usize {
    let mut r = rng(seed);
    (0..instances)
        .filter(|_| {
            let (ci, co) = (r.random_range(1..5), r.random_range(1..5));
            let (k, s) = (r.random_range(1..9), r.random_range(1..5));
            let len = r.random_range(k..k + 40);
            let spec = ConvSpec::new_1d(ci, co, k, s, padding(&mut r)).unwrap();
            let (x, w, b) = (u(&mut r, &[ci, len], 1.0), u(&mut r, &spec.weight_shape(), 1.0), u(&mut r, &[co], 1.0));
            let got = conv(&x, &spec, &w, &b).unwrap();
            got.data().iter().map(|v| v.to_bits()).ne(conv_oracle(&x, &spec, &w, &b).iter().map(|v| v.to_bits()))
        })
        .count()
}

pub fn conv2d_oracle_mismatches(instances: usize, seed: u64) -> usize {
    let mut r = rng(seed);
    (0..instances)
        .filter(|_| {
            let (ci, co) = (r.random_range(1..4), r.random_range(1..4));
            let k = (r.random_range(1..5), r.random_range(1..5));
            let s = (r.random_range(1..3), r.random_range(1..3));
            let (h, w) = (r.random_range(k.0..k.0 + 10), r.random_range(k.1..k.1 + 10));
            let spec = ConvSpec::new_2d(ci, co, k, s, padding(&mut r)).unwrap();
            let (x, wt, b) = (u(&mut r, &[ci, h, w], 1.0), u(&mut r, &spec.weight_shape(), 1.0), u(&mut r, &[co], 1.0));
            let got = conv(&x, &spec, &wt, &b).unwrap();
            got.data().iter().map(|v| v.to_bits()).ne(conv_oracle(&x, &spec, &wt, &b).iter().map(|v| v.to_bits()))
        })
        .count()
}

pub fn maxpool_oracle_mismatches(instances: usize, seed: u64) -> usize {
    let mut r = rng(seed);
    (0..instances)
        .filter(|_| {
            let c = r.random_range(1..4);
            let two_d = r.random_bool(0.5);
            let rank = if two_d { 2 } else { 1 };
            let window: Vec<usize> = (0..rank).map(|_| r.random_range(1..5)).collect();
            let stride: Vec<usize> = (0..rank).map(|_| r.random_range(1..4)).collect();
            let spec = PoolSpec::new(window.clone(), stride, padding(&mut r)).unwrap();
            let mut shape = vec![c];
            shape.extend(window.iter().map(|&k| r.random_range(k..k + 12)));
            // coarse values so ties, including 0.0 against -0.0, occur
            let x = u(&mut r, &shape, 1.0).map(|v| (v * 4.0).round());
            let got = maxpool(&x, &spec).unwrap();
            got.data().iter().map(|v| v.to_bits()).ne(pool_oracle(&x, &spec).iter().map(|v| v.to_bits()))
        })
        .count()
}

fn sig(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

/// Largest deviation of `lstm_step` from per-unit scalar gate equations.
pub fn lstm_oracle_error(instances: usize, seed: u64) -> f64 {
    let mut r = rng(seed);
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let (d, h) = (r.random_range(1..8), r.random_range(1..8));
        let peephole = r.random_bool(0.5);
        let p = LstmParams {
            input_weights: u(&mut r, &[4 * h, d], 1.0),
            recurrent_weights: u(&mut r, &[4 * h, h], 1.0),
            bias: u(&mut r, &[4 * h], 1.0),
            peephole: peephole.then(|| u(&mut r, &[3, h], 1.0)),
        };
        let x = u(&mut r, &[d], 1.0);
        let prev = LstmState {
            h: u(&mut r, &[h], 1.0),
            c: u(&mut r, &[h], 2.0),
        };
        let got = lstm_step(&x, &prev, &p).unwrap();
        let wx = |g: usize, k: usize, j: usize| p.input_weights.data()[(g * h + k) * d + j];
        let wh = |g: usize, k: usize, j: usize| p.recurrent_weights.data()[(g * h + k) * h + j];
        for k in 0..h {
            let pre = |g: usize| {
                let mut a = p.bias.data()[g * h + k];
                for j in 0..d {
                    a += wx(g, k, j) * x.data()[j];
                }
                for j in 0..h {
                    a += wh(g, k, j) * prev.h.data()[j];
                }
                if let (Some(pp), true) = (&p.peephole, g < 3) {
                    a += pp.data()[g * h + k] * prev.c.data()[k];
                }
                a
            };
            let (i, f, o, g) = (sig(pre(0)), sig(pre(1)), sig(pre(2)), pre(3).tanh());
            let c = f * prev.c.data()[k] + i * g;
            let hn = o * c.tanh();
            worst = worst.max((c - got.c.data()[k]).abs()).max((hn - got.h.data()[k]).abs());
        }
    }
    worst
}

/// Valid-convolution output length against `floor((d − m)/s) + 1`.
pub fn valid_length_holds(d: usize, m: usize, s: usize) -> bool {
    let spec = ConvSpec::new_1d(1, 1, m, s, Padding::Valid).unwrap();
    let x = Tensor::full(&[1, d], 0.5);
    let y = conv(&x, &spec, &Tensor::full(&[1, 1, m], 1.0), &Tensor::zeros(&[1])).unwrap();
    y.shape() == [1, (d - m) / s + 1] && spec.output_extents(&[d]).unwrap() == vec![(d - m) / s + 1]
}


/// Parameter and FLOP totals of the default configuration, derived by hand
/// from its layer geometry.
pub fn default_config_audit() -> (u64, u64) {
    let conv_p = |cin: u64, cout: u64, k: u64| cin * cout * k + cout;
    let conv_f = |cout: u64, out: u64, cin: u64, k: u64| cout * out * (2 * cin * k + 1);
    let fire_p = |c: u64, s: u64, e1: u64, e3: u64| conv_p(c, s, 1) + conv_p(s, e1, 1) + conv_p(s, e3, 9);
    // squeeze, expand1, expand3 convs plus one ReLU per produced element
    let fire_f = |c: u64, s: u64, e1: u64, e3: u64, px: u64| {
        conv_f(s, px, c, 1) + conv_f(e1, px, s, 1) + conv_f(e3, px, s, 9) + (s + e1 + e3) * px
    };
    let lstm_p = |d: u64, h: u64| 2 * (4 * h * d + 4 * h * h + 4 * h);
    let lstm_f = |d: u64, h: u64, t: u64| 2 * t * (2 * 4 * h * (d + h) + 13 * h);

    // frequency branch: 2250 → conv(2250, stride 1000) 3 → pool 2 → 3 convs at 2 → pool 1
    let ffe_p = conv_p(1, 16, 2250) + conv_p(16, 32, 3) + 2 * conv_p(32, 32, 3);
    let ffe_f = conv_f(16, 3, 1, 2250) + 16 * 3 + 16 * 2
        + conv_f(32, 2, 16, 3) + 2 * conv_f(32, 2, 32, 3) + 3 * 32 * 2 + 32;
    // pattern branch: 2250 → conv(1000, stride 125) 18 → pool 9 → 3 convs at 9 → pool 5
    let pe_p = conv_p(1, 16, 1000) + conv_p(16, 32, 5) + 2 * conv_p(32, 32, 5);
    let pe_f = conv_f(16, 18, 1, 1000) + 16 * 18 + 16 * 9
        + conv_f(32, 9, 16, 5) + 2 * conv_f(32, 9, 32, 5) + 3 * 32 * 9 + 32 * 5;
    // enhancer branch on a 45 × 50 image: conv 3×3 + bn + relu, pool to 23 × 25,
    // fire(8, 32, 32), pool to 12 × 13, fire(16, 64, 64), global max over 156
    let afe_p = conv_p(1, 8, 9) + 2 * 8 + fire_p(8, 8, 32, 32) + fire_p(64, 16, 64, 64);
    let afe_f = conv_f(8, 2250, 1, 9) + 2 * 8 * 2250 + 8 * 2250 + 8 * 575 * 3
        + fire_f(8, 8, 32, 32, 575) + 64 * 156 * 3 + fire_f(64, 16, 64, 64, 156) + 128 * 155;
    // 32 + 160 + 128 = 320 features as 8 steps of 40
    let rec_p = lstm_p(40, 64) + lstm_p(128, 64);
    let rec_f = lstm_f(40, 64, 8) + lstm_f(128, 64, 8);
    let skip_p = 320 * 128 + 128;
    let skip_f = 2 * 320 * 128 + 128 + 128;
    let head_p = 128 * 5 + 5;
    let head_f = 2 * 128 * 5 + 5 + 3 * 5;
    (
        ffe_p + pe_p + afe_p + rec_p + skip_p + head_p,
        ffe_f + pe_f + afe_f + rec_f + skip_f + head_f,
    )
}
