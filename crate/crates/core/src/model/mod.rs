//! The three-branch convolutional front end, the bidirectional recurrent
//! head with its skip projection, and everything needed to build, count,
//! run and persist it.

pub mod accounting;
pub mod config;
pub mod forward;
pub mod io;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::layers::{BatchNormParams, BiLstmParams, FireParams};
use crate::ops::conv::ConvSpec;
use crate::ops::pool::PoolSpec;
use crate::tensor::{Tensor, TensorError};

pub use accounting::{count_flops, count_params, flop_breakdown, LayerFlops};
pub use config::{LayerSpec, ModelConfig, Plan, PlannedLayer, Stage1d, Stage2d};
pub use forward::{backward, forward, forward_traced, BranchOutputs, ForwardTrace, Gradients, RunMode, RunningUpdate};
pub use io::{load_model, model_from_bytes, model_to_bytes, read_model, save_model, write_model, Precision};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("batch rows have {got} samples, model expects {expected}")]
    InputLength { expected: usize, got: usize },
    #[error("bad magic: not a model file")]
    BadMagic,
    #[error("unsupported model format version {0}")]
    UnsupportedVersion(u32),
    #[error("truncated model file while reading {0}")]
    Truncated(String),
    #[error("checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    Checksum { stored: u32, computed: u32 },
    #[error("malformed model file: {0}")]
    Malformed(String),
    #[error("model file lacks tensor `{0}`")]
    MissingTensor(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    /// `[K × D]`
    pub weights: Tensor,
    pub bias: Tensor,
}

/// A branch layer together with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Conv {
        spec: ConvSpec,
        weights: Tensor,
        bias: Tensor,
    },
    BatchNorm(BatchNormParams),
    Relu,
    MaxPool(PoolSpec),
    Fire(FireParams),
    GlobalMaxPool,
}

impl Layer {
    fn params(&self) -> Vec<(&'static str, &Tensor)> {
        match self {
            Layer::Conv { weights, bias, .. } => vec![("weight", weights), ("bias", bias)],
            Layer::BatchNorm(p) => vec![("gamma", &p.gamma), ("beta", &p.beta)],
            Layer::Fire(p) => FIRE_NAMES.iter().copied().zip(p.tensors()).collect(),
            _ => Vec::new(),
        }
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        match self {
            Layer::Conv { weights, bias, .. } => vec![weights, bias],
            Layer::BatchNorm(p) => vec![&mut p.gamma, &mut p.beta],
            Layer::Fire(p) => p.tensors_mut(),
            _ => Vec::new(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Layer::Conv { .. } => "conv",
            Layer::BatchNorm(_) => "bn",
            Layer::Relu => "relu",
            Layer::MaxPool(_) => "pool",
            Layer::Fire(_) => "fire",
            Layer::GlobalMaxPool => "gmax",
        }
    }
}

const FIRE_NAMES: [&str; 6] = [
    "squeeze_weight",
    "squeeze_bias",
    "expand1_weight",
    "expand1_bias",
    "expand3_weight",
    "expand3_bias",
];

const LSTM_NAMES: [&str; 4] = ["input_weight", "recurrent_weight", "bias", "peephole"];

/// An instantiated network. Parameter order is fixed: FFE, PE, AFE layers,
/// recurrent layers (forward then backward direction), skip, head.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    config: ModelConfig,
    plan: Plan,
    pub(crate) ffe: Vec<Layer>,
    pub(crate) pe: Vec<Layer>,
    pub(crate) afe: Vec<Layer>,
    pub(crate) recurrent: Vec<BiLstmParams>,
    pub(crate) skip: Dense,
    pub(crate) head: Dense,
}

fn glorot(shape: &[usize], fan_in: usize, fan_out: usize, rng: &mut ChaCha8Rng) -> Tensor {
    Tensor::uniform(shape, (6.0 / (fan_in + fan_out) as f64).sqrt(), rng)
}

fn build_layers(planned: &[PlannedLayer], cfg: &ModelConfig, rng: &mut ChaCha8Rng) -> Vec<Layer> {
    planned
        .iter()
        .map(|p| match &p.layer {
            LayerSpec::Conv(spec) => {
                let k = spec.kernel_volume();
                Layer::Conv {
                    weights: glorot(
                        &spec.weight_shape(),
                        spec.in_channels * k,
                        spec.out_channels * k,
                        rng,
                    ),
                    bias: Tensor::zeros(&[spec.out_channels]),
                    spec: spec.clone(),
                }
            }
            LayerSpec::BatchNorm { channels } => {
                Layer::BatchNorm(BatchNormParams::new(*channels, cfg.bn_momentum, cfg.bn_epsilon))
            }
            LayerSpec::Relu => Layer::Relu,
            LayerSpec::MaxPool(spec) => Layer::MaxPool(spec.clone()),
            LayerSpec::Fire {
                in_channels,
                squeeze,
                expand1,
                expand3,
            } => {
                let (c, s, e1, e3) = (*in_channels, *squeeze, *expand1, *expand3);
                Layer::Fire(FireParams {
                    squeeze_weights: glorot(&[s, c, 1, 1], c, s, rng),
                    squeeze_bias: Tensor::zeros(&[s]),
                    expand1_weights: glorot(&[e1, s, 1, 1], s, e1, rng),
                    expand1_bias: Tensor::zeros(&[e1]),
                    expand3_weights: glorot(&[e3, s, 3, 3], 9 * s, 9 * e3, rng),
                    expand3_bias: Tensor::zeros(&[e3]),
                })
            }
            LayerSpec::GlobalMaxPool => Layer::GlobalMaxPool,
        })
        .collect()
}

/// Deterministic initialization: Glorot-uniform for convolutions, dense and
/// LSTM weights, zero biases except the forget gate (1.0), unit batch-norm.
pub fn build_model(config: &ModelConfig, seed: u64) -> Result<Model, ModelError> {
    let plan = config.plan()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ffe = build_layers(&plan.ffe, config, &mut rng);
    let pe = build_layers(&plan.pe, config, &mut rng);
    let afe = build_layers(&plan.afe, config, &mut rng);
    let h = config.lstm_hidden;
    let mut recurrent = Vec::with_capacity(config.lstm_layers);
    for layer in 0..config.lstm_layers {
        let d = if layer == 0 { config.seq_features } else { 2 * h };
        let mut p = BiLstmParams::zeros(d, h, config.lstm_peephole);
        for dir in [&mut p.forward, &mut p.backward] {
            dir.input_weights = glorot(&[4 * h, d], d, 4 * h, &mut rng);
            dir.recurrent_weights = glorot(&[4 * h, h], h, 4 * h, &mut rng);
            for k in h..2 * h {
                dir.bias.data_mut()[k] = 1.0;
            }
        }
        recurrent.push(p);
    }
    let skip = Dense {
        weights: glorot(&[config.skip_width, plan.concat_len], plan.concat_len, config.skip_width, &mut rng),
        bias: Tensor::zeros(&[config.skip_width]),
    };
    let head = Dense {
        weights: glorot(&[config.class_count, config.skip_width], config.skip_width, config.class_count, &mut rng),
        bias: Tensor::zeros(&[config.class_count]),
    };
    Ok(Model {
        config: config.clone(),
        plan,
        ffe,
        pe,
        afe,
        recurrent,
        skip,
        head,
    })
}

impl Model {
    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn plan(&self) -> &Plan {
        &self.plan
    }

    pub fn branches(&self) -> [(&'static str, &[Layer]); 3] {
        [("ffe", &self.ffe), ("pe", &self.pe), ("afe", &self.afe)]
    }

    pub fn recurrent_layers(&self) -> &[BiLstmParams] {
        &self.recurrent
    }

    pub fn skip(&self) -> &Dense {
        &self.skip
    }

    pub fn head(&self) -> &Dense {
        &self.head
    }

    pub fn head_mut(&mut self) -> &mut Dense {
        &mut self.head
    }

    /// Trainable tensors with unique names, in canonical order.
    pub fn params(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        for (branch, layers) in self.branches() {
            for (i, layer) in layers.iter().enumerate() {
                for (n, t) in layer.params() {
                    out.push((format!("{branch}.{i}.{}.{n}", layer.kind()), t));
                }
            }
        }
        for (i, bi) in self.recurrent.iter().enumerate() {
            for (dir, p) in [("fwd", &bi.forward), ("bwd", &bi.backward)] {
                for (n, t) in LSTM_NAMES.iter().zip(p.tensors()) {
                    out.push((format!("lstm.{i}.{dir}.{n}"), t));
                }
            }
        }
        out.push(("skip.weight".into(), &self.skip.weights));
        out.push(("skip.bias".into(), &self.skip.bias));
        out.push(("head.weight".into(), &self.head.weights));
        out.push(("head.bias".into(), &self.head.bias));
        out
    }

    /// Same order as [`Model::params`].
    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = Vec::new();
        for layers in [&mut self.ffe, &mut self.pe, &mut self.afe] {
            for layer in layers.iter_mut() {
                out.extend(layer.params_mut());
            }
        }
        for bi in self.recurrent.iter_mut() {
            out.extend(bi.tensors_mut());
        }
        out.extend([
            &mut self.skip.weights,
            &mut self.skip.bias,
            &mut self.head.weights,
            &mut self.head.bias,
        ]);
        out
    }

    /// Non-trainable batch-norm running statistics.
    pub fn buffers(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        for (branch, layers) in self.branches() {
            for (i, layer) in layers.iter().enumerate() {
                if let Layer::BatchNorm(p) = layer {
                    out.push((format!("{branch}.{i}.bn.running_mean"), &p.running_mean));
                    out.push((format!("{branch}.{i}.bn.running_var"), &p.running_var));
                }
            }
        }
        out
    }

    pub fn buffers_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = Vec::new();
        for layers in [&mut self.ffe, &mut self.pe, &mut self.afe] {
            for layer in layers.iter_mut() {
                if let Layer::BatchNorm(p) = layer {
                    out.push(&mut p.running_mean);
                    out.push(&mut p.running_var);
                }
            }
        }
        out
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|(_, t)| t.len()).sum()
    }
}
