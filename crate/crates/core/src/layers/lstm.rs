//! LSTM cell and bidirectional LSTM with backpropagation through time.
//!
//! Gate weights are stacked row-blockwise in the order input, forget,
//! output, cell candidate:
//!
//! ```text
//! i = σ(W_xi x + W_hi h + b_i [+ p_i ⊙ c])
//! f = σ(W_xf x + W_hf h + b_f [+ p_f ⊙ c])
//! o = σ(W_xo x + W_ho h + b_o [+ p_o ⊙ c])
//! g = tanh(W_xg x + W_hg h + b_g)
//! c' = f ⊙ c + i ⊙ g
//! h' = o ⊙ tanh(c')
//! ```
//!
//! The bracketed diagonal peephole terms read the previous cell state and are
//! only present when [`LstmParams::peephole`] is set.

use super::activation::sigmoid;
use crate::tensor::{invalid, shape_err, Result, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    Input = 0,
    Forget = 1,
    Output = 2,
    Cell = 3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    /// `[4H × D]`
    pub input_weights: Tensor,
    /// `[4H × H]`
    pub recurrent_weights: Tensor,
    /// `[4H]`
    pub bias: Tensor,
    /// `[3 × H]` diagonal peephole weights for the input, forget and output gates.
    pub peephole: Option<Tensor>,
}

impl LstmParams {
    pub fn zeros(input_size: usize, hidden_size: usize, peephole: bool) -> Self {
        LstmParams {
            input_weights: Tensor::zeros(&[4 * hidden_size, input_size]),
            recurrent_weights: Tensor::zeros(&[4 * hidden_size, hidden_size]),
            bias: Tensor::zeros(&[4 * hidden_size]),
            peephole: peephole.then(|| Tensor::zeros(&[3, hidden_size])),
        }
    }

    pub fn hidden_size(&self) -> usize {
        self.recurrent_weights.shape()[1]
    }

    pub fn input_size(&self) -> usize {
        self.input_weights.shape()[1]
    }

    pub fn validate(&self) -> Result<()> {
        let h = self.recurrent_weights.shape().get(1).copied().unwrap_or(0);
        let ok = self.recurrent_weights.shape() == [4 * h, h]
            && self.input_weights.rank() == 2
            && self.input_weights.shape()[0] == 4 * h
            && self.bias.shape() == [4 * h]
            && self.peephole.as_ref().is_none_or(|p| p.shape() == [3, h]);
        if ok {
            Ok(())
        } else {
            Err(shape_err("lstm", "inconsistent gate parameter shapes"))
        }
    }

    /// Input weights of one gate, `[H × D]` row-major.
    pub fn gate_input_weights(&self, gate: Gate) -> &[f64] {
        let block = self.hidden_size() * self.input_size();
        &self.input_weights.data()[gate as usize * block..(gate as usize + 1) * block]
    }

    pub fn gate_recurrent_weights(&self, gate: Gate) -> &[f64] {
        let h = self.hidden_size();
        &self.recurrent_weights.data()[gate as usize * h * h..(gate as usize + 1) * h * h]
    }

    pub fn gate_bias(&self, gate: Gate) -> &[f64] {
        let h = self.hidden_size();
        &self.bias.data()[gate as usize * h..(gate as usize + 1) * h]
    }

    /// Tensors in canonical order: input weights, recurrent weights, bias, peephole.
    pub fn tensors(&self) -> Vec<&Tensor> {
        let mut v = vec![&self.input_weights, &self.recurrent_weights, &self.bias];
        v.extend(self.peephole.as_ref());
        v
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut v = vec![
            &mut self.input_weights,
            &mut self.recurrent_weights,
            &mut self.bias,
        ];
        v.extend(self.peephole.as_mut());
        v
    }

    fn zeros_like(&self) -> Self {
        LstmParams::zeros(self.input_size(), self.hidden_size(), self.peephole.is_some())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub c: Tensor,
    pub h: Tensor,
}

impl LstmState {
    pub fn zeros(hidden_size: usize) -> Self {
        LstmState {
            c: Tensor::zeros(&[hidden_size]),
            h: Tensor::zeros(&[hidden_size]),
        }
    }
}

#[derive(Debug, Clone)]
pub struct LstmStepCache {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    /// Post-activation `[i, f, o, g]`, each of length H.
    gates: Vec<f64>,
    tanh_c: Vec<f64>,
}

fn matvec_acc(out: &mut [f64], w: &[f64], x: &[f64]) {
    let cols = x.len();
    for (o, row) in out.iter_mut().zip(w.chunks(cols)) {
        *o += row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    }
}

fn step_raw(x: &[f64], h_prev: &[f64], c_prev: &[f64], p: &LstmParams) -> (Vec<f64>, Vec<f64>, LstmStepCache) {
    let h = p.hidden_size();
    let mut a = p.bias.data().to_vec();
    matvec_acc(&mut a, p.input_weights.data(), x);
    matvec_acc(&mut a, p.recurrent_weights.data(), h_prev);
    if let Some(peep) = &p.peephole {
        for gate in 0..3 {
            for k in 0..h {
                a[gate * h + k] += peep.data()[gate * h + k] * c_prev[k];
            }
        }
    }
    for (idx, v) in a.iter_mut().enumerate() {
        *v = if idx < 3 * h { sigmoid(*v) } else { v.tanh() };
    }
    let mut c = vec![0.0; h];
    let mut out = vec![0.0; h];
    let mut tanh_c = vec![0.0; h];
    for k in 0..h {
        c[k] = a[h + k] * c_prev[k] + a[k] * a[3 * h + k];
        tanh_c[k] = c[k].tanh();
        out[k] = a[2 * h + k] * tanh_c[k];
    }
    let cache = LstmStepCache {
        x: x.to_vec(),
        h_prev: h_prev.to_vec(),
        c_prev: c_prev.to_vec(),
        gates: a,
        tanh_c,
    };
    (c, out, cache)
}

fn check_step(x: &Tensor, prev: &LstmState, p: &LstmParams) -> Result<()> {
    p.validate()?;
    let h = p.hidden_size();
    if x.shape() != [p.input_size()] {
        return Err(shape_err(
            "lstm_step",
            format!("input {:?} vs input size {}", x.shape(), p.input_size()),
        ));
    }
    if prev.c.shape() != [h] || prev.h.shape() != [h] {
        return Err(shape_err("lstm_step", format!("state does not have hidden size {h}")));
    }
    Ok(())
}

pub fn lstm_step_cached(x: &Tensor, prev: &LstmState, params: &LstmParams) -> Result<(LstmState, LstmStepCache)> {
    check_step(x, prev, params)?;
    let (c, h, cache) = step_raw(x.data(), prev.h.data(), prev.c.data(), params);
    let n = h.len();
    let state = LstmState {
        c: Tensor::from_parts(vec![n], c),
        h: Tensor::from_parts(vec![n], h),
    };
    state.c.ensure_finite("lstm_step")?;
    Ok((state, cache))
}

pub fn lstm_step(x: &Tensor, prev: &LstmState, params: &LstmParams) -> Result<LstmState> {
    lstm_step_cached(x, prev, params).map(|(s, _)| s)
}

/// Gradients flowing out of one step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepGrads {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub c_prev: Vec<f64>,
}

/// Backward through one step. `dh`/`dc` are the total gradients reaching
/// `h_t` and `c_t`; parameter gradients are accumulated into `acc`.
pub fn lstm_step_backward(
    cache: &LstmStepCache,
    params: &LstmParams,
    dh: &[f64],
    dc: &[f64],
    acc: &mut LstmParams,
) -> StepGrads {
    let h = params.hidden_size();
    let d = params.input_size();
    let g = &cache.gates;
    let mut da = vec![0.0; 4 * h];
    let mut dc_prev = vec![0.0; h];
    for k in 0..h {
        let (i, f, o, gg) = (g[k], g[h + k], g[2 * h + k], g[3 * h + k]);
        let t = cache.tanh_c[k];
        let d_o = dh[k] * t;
        let dct = dc[k] + dh[k] * o * (1.0 - t * t);
        da[k] = dct * gg * i * (1.0 - i);
        da[h + k] = dct * cache.c_prev[k] * f * (1.0 - f);
        da[2 * h + k] = d_o * o * (1.0 - o);
        da[3 * h + k] = dct * i * (1.0 - gg * gg);
        dc_prev[k] = dct * f;
    }
    if let Some(peep) = &params.peephole {
        let acc_peep = acc.peephole.as_mut().expect("gradient buffer lacks peephole");
        for gate in 0..3 {
            for k in 0..h {
                dc_prev[k] += da[gate * h + k] * peep.data()[gate * h + k];
                acc_peep.data_mut()[gate * h + k] += da[gate * h + k] * cache.c_prev[k];
            }
        }
    }
    let mut dx = vec![0.0; d];
    let mut dh_prev = vec![0.0; h];
    let wx = params.input_weights.data();
    let wh = params.recurrent_weights.data();
    {
        let gwx = acc.input_weights.data_mut();
        for r in 0..4 * h {
            let a = da[r];
            if a == 0.0 {
                continue;
            }
            for c in 0..d {
                gwx[r * d + c] += a * cache.x[c];
                dx[c] += a * wx[r * d + c];
            }
        }
    }
    {
        let gwh = acc.recurrent_weights.data_mut();
        for r in 0..4 * h {
            let a = da[r];
            if a == 0.0 {
                continue;
            }
            for c in 0..h {
                gwh[r * h + c] += a * cache.h_prev[c];
                dh_prev[c] += a * wh[r * h + c];
            }
        }
    }
    for (b, a) in acc.bias.data_mut().iter_mut().zip(&da) {
        *b += a;
    }
    StepGrads {
        x: dx,
        h_prev: dh_prev,
        c_prev: dc_prev,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiLstmParams {
    pub forward: LstmParams,
    pub backward: LstmParams,
}

impl BiLstmParams {
    pub fn zeros(input_size: usize, hidden_size: usize, peephole: bool) -> Self {
        BiLstmParams {
            forward: LstmParams::zeros(input_size, hidden_size, peephole),
            backward: LstmParams::zeros(input_size, hidden_size, peephole),
        }
    }

    pub fn tensors(&self) -> Vec<&Tensor> {
        let mut v = self.forward.tensors();
        v.extend(self.backward.tensors());
        v
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut v = self.forward.tensors_mut();
        v.extend(self.backward.tensors_mut());
        v
    }
}

#[derive(Debug, Clone)]
pub struct BiLstmCache {
    forward: Vec<LstmStepCache>,
    /// In processing order, i.e. starting from the last time step.
    backward: Vec<LstmStepCache>,
    steps: usize,
    input_size: usize,
    hidden: usize,
}

pub fn bilstm_forward_cached(seq: &Tensor, params: &BiLstmParams) -> Result<(Tensor, BiLstmCache)> {
    let (fw, bw) = (&params.forward, &params.backward);
    fw.validate()?;
    bw.validate()?;
    if seq.rank() != 2 {
        return Err(shape_err("bilstm", format!("sequence {:?} must be [T × D]", seq.shape())));
    }
    let (t, d) = (seq.shape()[0], seq.shape()[1]);
    if t == 0 {
        return Err(invalid("bilstm", "empty sequence"));
    }
    if fw.input_size() != d || bw.input_size() != d || fw.hidden_size() != bw.hidden_size() {
        return Err(shape_err(
            "bilstm",
            format!("sequence width {d} does not match the direction parameters"),
        ));
    }
    let h = fw.hidden_size();
    let mut out = vec![0.0; t * 2 * h];
    let mut fcache = Vec::with_capacity(t);
    let (mut hs, mut cs) = (vec![0.0; h], vec![0.0; h]);
    for step in 0..t {
        let (c, hn, cache) = step_raw(seq.row(step), &hs, &cs, fw);
        out[step * 2 * h..step * 2 * h + h].copy_from_slice(&hn);
        hs = hn;
        cs = c;
        fcache.push(cache);
    }
    let mut bcache = Vec::with_capacity(t);
    let (mut hs, mut cs) = (vec![0.0; h], vec![0.0; h]);
    for step in (0..t).rev() {
        let (c, hn, cache) = step_raw(seq.row(step), &hs, &cs, bw);
        out[step * 2 * h + h..(step + 1) * 2 * h].copy_from_slice(&hn);
        hs = hn;
        cs = c;
        bcache.push(cache);
    }
    let y = Tensor::from_parts(vec![t, 2 * h], out);
    y.ensure_finite("bilstm")?;
    Ok((
        y,
        BiLstmCache {
            forward: fcache,
            backward: bcache,
            steps: t,
            input_size: d,
            hidden: h,
        },
    ))
}

/// `[T × D] → [T × 2H]`, each row `[h→_t ‖ h←_t]`, zero initial states.
pub fn bilstm_forward(seq: &Tensor, fwd: &LstmParams, bwd: &LstmParams) -> Result<Tensor> {
    let params = BiLstmParams {
        forward: fwd.clone(),
        backward: bwd.clone(),
    };
    bilstm_forward_cached(seq, &params).map(|(y, _)| y)
}

/// Returns the sequence gradient and the parameter gradients.
pub fn bilstm_backward(
    cache: &BiLstmCache,
    params: &BiLstmParams,
    grad: &Tensor,
) -> Result<(Tensor, BiLstmParams)> {
    let (t, d, h) = (cache.steps, cache.input_size, cache.hidden);
    if grad.shape() != [t, 2 * h] {
        return Err(shape_err("bilstm_backward", format!("gradient {:?} vs [{t} × {}]", grad.shape(), 2 * h)));
    }
    let mut grads = BiLstmParams {
        forward: params.forward.zeros_like(),
        backward: params.backward.zeros_like(),
    };
    let mut dseq = vec![0.0; t * d];
    let g = grad.data();

    let (mut dh_next, mut dc_next) = (vec![0.0; h], vec![0.0; h]);
    for step in (0..t).rev() {
        let dh: Vec<f64> = (0..h).map(|k| g[step * 2 * h + k] + dh_next[k]).collect();
        let sg = lstm_step_backward(&cache.forward[step], &params.forward, &dh, &dc_next, &mut grads.forward);
        for (a, b) in dseq[step * d..(step + 1) * d].iter_mut().zip(&sg.x) {
            *a += b;
        }
        dh_next = sg.h_prev;
        dc_next = sg.c_prev;
    }

    let (mut dh_next, mut dc_next) = (vec![0.0; h], vec![0.0; h]);
    // the backward direction ran t = T-1 … 0, so unwind it from t = 0
    for k in (0..t).rev() {
        let time = t - 1 - k;
        let dh: Vec<f64> = (0..h).map(|j| g[time * 2 * h + h + j] + dh_next[j]).collect();
        let sg = lstm_step_backward(&cache.backward[k], &params.backward, &dh, &dc_next, &mut grads.backward);
        for (a, b) in dseq[time * d..(time + 1) * d].iter_mut().zip(&sg.x) {
            *a += b;
        }
        dh_next = sg.h_prev;
        dc_next = sg.c_prev;
    }
    Ok((Tensor::from_parts(vec![t, d], dseq), grads))
}
