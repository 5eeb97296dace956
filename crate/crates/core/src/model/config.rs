//! Declarative architecture description and its shape plan.

use std::fmt;

use crate::kv::{parse_kv, parse_value, write_kv, KvError};
use crate::ops::conv::{ConvSpec, Padding};
use crate::ops::pool::PoolSpec;

use super::ModelError;

/// Squeeze ratio the default fire modules are built to.
pub const TARGET_SQUEEZE_RATIO: f64 = 0.125;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage1d {
    Conv {
        kernel: usize,
        stride: usize,
        channels: usize,
        padding: Padding,
    },
    Pool {
        window: usize,
        stride: usize,
        padding: Padding,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage2d {
    /// Square kernel; optionally followed by batch normalization.
    Conv {
        kernel: usize,
        stride: usize,
        channels: usize,
        padding: Padding,
        batchnorm: bool,
    },
    Pool {
        window: usize,
        stride: usize,
        padding: Padding,
    },
    Fire {
        squeeze: usize,
        expand1: usize,
        expand3: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub sample_rate: u32,
    pub input_len: usize,
    pub class_count: usize,
    /// Either empty or exactly `class_count` names.
    pub class_names: Vec<String>,
    /// Frequency feature extractor over the raw signal.
    pub ffe: Vec<Stage1d>,
    /// Pattern extractor over the raw signal.
    pub pe: Vec<Stage1d>,
    pub afe_rows: usize,
    pub afe_cols: usize,
    /// Adaptive feature enhancer over the `rows × cols` reshaped signal;
    /// always closed by a global spatial max.
    pub afe: Vec<Stage2d>,
    pub seq_steps: usize,
    pub seq_features: usize,
    pub lstm_hidden: usize,
    pub lstm_layers: usize,
    pub lstm_peephole: bool,
    /// Width of the dense skip projection; must equal `2 · lstm_hidden`.
    pub skip_width: usize,
    pub dropout: f64,
    pub bn_momentum: f64,
    pub bn_epsilon: f64,
    /// Reject fire modules whose squeeze ratio is not 0.125 instead of warning.
    pub strict_squeeze_ratio: bool,
}

pub const DEFAULT_CLASSES: [&str; 5] = ["AS", "MR", "MS", "MVP", "N"];

fn conv1(kernel: usize, stride: usize, channels: usize) -> Stage1d {
    Stage1d::Conv {
        kernel,
        stride,
        channels,
        padding: Padding::Same,
    }
}

fn pool1(window: usize) -> Stage1d {
    Stage1d::Pool {
        window,
        stride: window,
        padding: Padding::Same,
    }
}

fn pool2(window: usize) -> Stage2d {
    Stage2d::Pool {
        window,
        stride: window,
        padding: Padding::Same,
    }
}

fn conv2(kernel: usize, channels: usize, batchnorm: bool) -> Stage2d {
    Stage2d::Conv {
        kernel,
        stride: 1,
        channels,
        padding: Padding::Same,
        batchnorm,
    }
}

fn fire(squeeze: usize, expand1: usize, expand3: usize) -> Stage2d {
    Stage2d::Fire {
        squeeze,
        expand1,
        expand3,
    }
}

impl Default for ModelConfig {
    fn default() -> Self {
        let fs = 2000usize;
        let len = 2250usize;
        ModelConfig {
            sample_rate: fs as u32,
            input_len: len,
            class_count: 5,
            class_names: DEFAULT_CLASSES.iter().map(|s| s.to_string()).collect(),
            // a 4·Fs kernel exceeds the 1.125 s window; clip it to the whole window
            ffe: vec![
                conv1((4 * fs).min(len), fs / 2, 16),
                pool1(2),
                conv1(3, 1, 32),
                conv1(3, 1, 32),
                conv1(3, 1, 32),
                pool1(2),
            ],
            pe: vec![
                conv1(fs / 2, fs / 16, 16),
                pool1(2),
                conv1(5, 1, 32),
                conv1(5, 1, 32),
                conv1(5, 1, 32),
                pool1(2),
            ],
            afe_rows: 45,
            afe_cols: 50,
            afe: vec![
                conv2(3, 8, true),
                pool2(2),
                fire(8, 32, 32),
                pool2(2),
                fire(16, 64, 64),
            ],
            seq_steps: 8,
            seq_features: 40,
            lstm_hidden: 64,
            lstm_layers: 2,
            lstm_peephole: false,
            skip_width: 128,
            dropout: 0.3,
            bn_momentum: 0.9,
            bn_epsilon: 1e-5,
            strict_squeeze_ratio: false,
        }
    }
}

impl ModelConfig {
    /// Desk-scale variant of the default topology: same input geometry and
    /// layer sequence, full-width AFE, two-channel FFE/PE and a narrow
    /// recurrent head. The wide-kernel branches memorize small training sets
    /// quickly, so they are kept thin.
    pub fn small() -> Self {
        let d = ModelConfig::default();
        ModelConfig {
            ffe: vec![
                conv1(2250, 1000, 2),
                pool1(2),
                conv1(3, 1, 2),
                conv1(3, 1, 2),
                conv1(3, 1, 2),
                pool1(2),
            ],
            pe: vec![
                conv1(1000, 125, 2),
                pool1(2),
                conv1(5, 1, 2),
                conv1(5, 1, 2),
                conv1(5, 1, 2),
                pool1(2),
            ],
            seq_steps: 8,
            seq_features: 20,
            lstm_hidden: 16,
            skip_width: 32,
            dropout: 0.1,
            ..d
        }
    }

    /// A 64-sample, 3-class network with a single fire module, sized for
    /// end-to-end finite-difference checks.
    pub fn tiny() -> Self {
        ModelConfig {
            sample_rate: 64,
            input_len: 64,
            class_count: 3,
            class_names: vec!["a".into(), "b".into(), "c".into()],
            ffe: vec![
                conv1(16, 8, 2),
                pool1(2),
                conv1(3, 1, 2),
                conv1(3, 1, 2),
                conv1(3, 1, 2),
                pool1(2),
            ],
            pe: vec![
                conv1(8, 4, 2),
                pool1(2),
                conv1(3, 1, 2),
                conv1(3, 1, 2),
                conv1(3, 1, 2),
                pool1(2),
            ],
            afe_rows: 8,
            afe_cols: 8,
            afe: vec![conv2(3, 2, true), pool2(2), fire(1, 4, 4)],
            seq_steps: 4,
            seq_features: 5,
            lstm_hidden: 4,
            lstm_layers: 2,
            lstm_peephole: false,
            skip_width: 8,
            dropout: 0.3,
            bn_momentum: 0.9,
            bn_epsilon: 1e-5,
            strict_squeeze_ratio: false,
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "default" => Some(Self::default()),
            "small" => Some(Self::small()),
            "tiny" => Some(Self::tiny()),
            _ => None,
        }
    }

    pub fn class_name(&self, index: usize) -> String {
        self.class_names
            .get(index)
            .cloned()
            .unwrap_or_else(|| index.to_string())
    }

    /// Checks every constraint and derives the per-layer shape plan.
    pub fn plan(&self) -> Result<Plan, ModelError> {
        let fail = |m: String| Err(ModelError::Config(m));
        if self.sample_rate == 0 {
            return fail("sample_rate must be > 0".into());
        }
        if self.input_len == 0 {
            return fail("input_len must be > 0".into());
        }
        if self.class_count < 2 {
            return fail(format!("class_count must be >= 2, got {}", self.class_count));
        }
        if !self.class_names.is_empty() && self.class_names.len() != self.class_count {
            return fail(format!(
                "class_names lists {} names but class_count is {}",
                self.class_names.len(),
                self.class_count
            ));
        }
        if self.afe_rows * self.afe_cols != self.input_len {
            return fail(format!(
                "afe.rows·afe.cols = {}·{} must equal input_len {}",
                self.afe_rows, self.afe_cols, self.input_len
            ));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return fail(format!("dropout {} must lie in [0, 1)", self.dropout));
        }
        if !(self.bn_momentum >= 0.0 && self.bn_momentum < 1.0) || self.bn_epsilon <= 0.0 {
            return fail("batchnorm momentum must lie in [0, 1) and epsilon be > 0".into());
        }
        if self.lstm_layers == 0 || self.lstm_hidden == 0 {
            return fail("lstm.layers and lstm.hidden must be >= 1".into());
        }
        if self.skip_width != 2 * self.lstm_hidden {
            return fail(format!(
                "skip.width {} must equal 2·lstm.hidden = {}",
                self.skip_width,
                2 * self.lstm_hidden
            ));
        }
        let ffe = plan_1d("ffe", &self.ffe, self.input_len)?;
        let pe = plan_1d("pe", &self.pe, self.input_len)?;
        let afe = self.plan_2d()?;
        let flat = |p: &[PlannedLayer]| -> usize {
            p.last()
                .map(|l| l.output.iter().product())
                .unwrap_or(self.input_len)
        };
        let (afe_len, ffe_len, pe_len) = (flat(&afe), flat(&ffe), flat(&pe));
        let concat_len = afe_len + ffe_len + pe_len;
        if self.seq_steps == 0 || self.seq_features == 0 {
            return fail("seq.steps and seq.features must be >= 1".into());
        }
        if self.seq_steps * self.seq_features < concat_len {
            return fail(format!(
                "seq.steps·seq.features = {}·{} is smaller than the concatenated feature length {}",
                self.seq_steps, self.seq_features, concat_len
            ));
        }
        Ok(Plan {
            ffe,
            pe,
            afe,
            afe_len,
            ffe_len,
            pe_len,
            concat_len,
        })
    }

    fn plan_2d(&self) -> Result<Vec<PlannedLayer>, ModelError> {
        let mut shape = vec![1, self.afe_rows, self.afe_cols];
        let mut out = Vec::new();
        let mut push = |layer: LayerSpec, shape: &mut Vec<usize>| -> Result<(), ModelError> {
            let next = layer
                .output_shape(shape)
                .map_err(|e| ModelError::Config(format!("afe layer {}: {e}", out.len())))?;
            out.push(PlannedLayer {
                layer,
                input: shape.clone(),
                output: next.clone(),
            });
            *shape = next;
            Ok(())
        };
        for stage in &self.afe {
            match *stage {
                Stage2d::Conv {
                    kernel,
                    stride,
                    channels,
                    padding,
                    batchnorm,
                } => {
                    let spec = ConvSpec::new_2d(shape[0], channels, (kernel, kernel), (stride, stride), padding)
                        .map_err(|e| ModelError::Config(format!("afe conv: {e}")))?;
                    push(LayerSpec::Conv(spec), &mut shape)?;
                    if batchnorm {
                        push(LayerSpec::BatchNorm { channels }, &mut shape)?;
                    }
                    push(LayerSpec::Relu, &mut shape)?;
                }
                Stage2d::Pool {
                    window,
                    stride,
                    padding,
                } => {
                    let spec = PoolSpec::new(vec![window, window], vec![stride, stride], padding)
                        .map_err(|e| ModelError::Config(format!("afe pool: {e}")))?;
                    push(LayerSpec::MaxPool(spec), &mut shape)?;
                }
                Stage2d::Fire {
                    squeeze,
                    expand1,
                    expand3,
                } => {
                    if squeeze == 0 || expand1 + expand3 == 0 || expand1 == 0 || expand3 == 0 {
                        return Err(ModelError::Config("fire channel counts must be >= 1".into()));
                    }
                    let ratio = squeeze as f64 / (expand1 + expand3) as f64;
                    if ratio != TARGET_SQUEEZE_RATIO {
                        let msg = format!(
                            "fire({squeeze}, {expand1}, {expand3}) has squeeze ratio {ratio}, expected {TARGET_SQUEEZE_RATIO}"
                        );
                        if self.strict_squeeze_ratio {
                            return Err(ModelError::Config(msg));
                        }
                        log::warn!("{msg}");
                    }
                    push(
                        LayerSpec::Fire {
                            in_channels: shape[0],
                            squeeze,
                            expand1,
                            expand3,
                        },
                        &mut shape,
                    )?;
                }
            }
        }
        push(LayerSpec::GlobalMaxPool, &mut shape)?;
        Ok(out)
    }

    /// Serializes every field as `key=value` text.
    pub fn to_kv(&self) -> String {
        let e: Vec<(&str, String)> = vec![
            ("sample_rate", self.sample_rate.to_string()),
            ("input_len", self.input_len.to_string()),
            ("class_count", self.class_count.to_string()),
            ("class_names", self.class_names.join(",")),
            ("ffe", join(&self.ffe)),
            ("pe", join(&self.pe)),
            ("afe.rows", self.afe_rows.to_string()),
            ("afe.cols", self.afe_cols.to_string()),
            ("afe", join(&self.afe)),
            ("seq.steps", self.seq_steps.to_string()),
            ("seq.features", self.seq_features.to_string()),
            ("lstm.hidden", self.lstm_hidden.to_string()),
            ("lstm.layers", self.lstm_layers.to_string()),
            ("lstm.peephole", self.lstm_peephole.to_string()),
            ("skip.width", self.skip_width.to_string()),
            ("dropout", self.dropout.to_string()),
            ("batchnorm.momentum", self.bn_momentum.to_string()),
            ("batchnorm.epsilon", self.bn_epsilon.to_string()),
            ("fire.strict_ratio", self.strict_squeeze_ratio.to_string()),
        ];
        write_kv(&e)
    }

    pub fn from_kv(text: &str) -> Result<Self, KvError> {
        let entries = parse_kv(text)?;
        let mut cfg = match entries.iter().find(|(k, _)| k == "preset") {
            Some((_, v)) => ModelConfig::preset(v).ok_or_else(|| KvError::Value {
                key: "preset".into(),
                value: v.clone(),
                reason: "expected default, small or tiny".into(),
            })?,
            None => ModelConfig::default(),
        };
        for (k, v) in &entries {
            if k != "preset" && !cfg.set(k, v)? {
                return Err(KvError::UnknownKey(k.clone()));
            }
        }
        Ok(cfg)
    }

    /// Applies one `key=value` entry; returns `false` if the key is not a model key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<bool, KvError> {
        match key {
            "sample_rate" => self.sample_rate = parse_value(key, value)?,
            "input_len" => self.input_len = parse_value(key, value)?,
            "class_count" => self.class_count = parse_value(key, value)?,
            "class_names" => {
                self.class_names = value
                    .split(',')
                    .map(|s| s.trim().to_string())
                    .filter(|s| !s.is_empty())
                    .collect()
            }
            "ffe" => self.ffe = parse_list(key, value)?,
            "pe" => self.pe = parse_list(key, value)?,
            "afe.rows" => self.afe_rows = parse_value(key, value)?,
            "afe.cols" => self.afe_cols = parse_value(key, value)?,
            "afe" => self.afe = parse_list(key, value)?,
            "seq.steps" => self.seq_steps = parse_value(key, value)?,
            "seq.features" => self.seq_features = parse_value(key, value)?,
            "lstm.hidden" => self.lstm_hidden = parse_value(key, value)?,
            "lstm.layers" => self.lstm_layers = parse_value(key, value)?,
            "lstm.peephole" => self.lstm_peephole = parse_value(key, value)?,
            "skip.width" => self.skip_width = parse_value(key, value)?,
            "dropout" => self.dropout = parse_value(key, value)?,
            "batchnorm.momentum" => self.bn_momentum = parse_value(key, value)?,
            "batchnorm.epsilon" => self.bn_epsilon = parse_value(key, value)?,
            "fire.strict_ratio" => self.strict_squeeze_ratio = parse_value(key, value)?,
            _ => return Ok(false),
        }
        Ok(true)
    }
}

fn join<T: fmt::Display>(items: &[T]) -> String {
    items.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(",")
}

fn parse_list<T: std::str::FromStr<Err = String>>(key: &str, value: &str) -> Result<Vec<T>, KvError> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<T>().map_err(|reason| KvError::Value {
                key: key.to_string(),
                value: s.to_string(),
                reason,
            })
        })
        .collect()
}

fn parse_padding(s: &str) -> Result<Padding, String> {
    match s {
        "same" => Ok(Padding::Same),
        "valid" => Ok(Padding::Valid),
        other => Err(format!("unknown padding `{other}`")),
    }
}

fn nums(parts: &[&str], n: usize, what: &str) -> Result<Vec<usize>, String> {
    if parts.len() < n {
        return Err(format!("{what} needs {n} numeric fields"));
    }
    parts[..n]
        .iter()
        .map(|p| p.parse::<usize>().map_err(|e| format!("{p:?}: {e}")))
        .collect()
}

impl fmt::Display for Stage1d {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Stage1d::Conv {
                kernel,
                stride,
                channels,
                padding,
            } => write!(f, "conv:{kernel}:{stride}:{channels}:{}", padding.as_str()),
            Stage1d::Pool {
                window,
                stride,
                padding,
            } => write!(f, "pool:{window}:{stride}:{}", padding.as_str()),
        }
    }
}

/// `conv:K:S:C[:same|valid]` or `pool:W[:S][:same|valid]`.
impl std::str::FromStr for Stage1d {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let mut padding = Padding::Same;
        let mut numeric: Vec<&str> = Vec::new();
        for p in &parts[1..] {
            if p.chars().all(|c| c.is_ascii_digit()) {
                numeric.push(p);
            } else {
                padding = parse_padding(p)?;
            }
        }
        match parts[0] {
            "conv" => {
                let n = nums(&numeric, 3, "conv")?;
                if numeric.len() != 3 {
                    return Err("conv takes kernel:stride:channels".into());
                }
                Ok(Stage1d::Conv {
                    kernel: n[0],
                    stride: n[1],
                    channels: n[2],
                    padding,
                })
            }
            "pool" => {
                let w = nums(&numeric, 1, "pool")?[0];
                let stride = match numeric.len() {
                    1 => w,
                    2 => nums(&numeric, 2, "pool")?[1],
                    _ => return Err("pool takes window[:stride]".into()),
                };
                Ok(Stage1d::Pool {
                    window: w,
                    stride,
                    padding,
                })
            }
            other => Err(format!("unknown 1D stage `{other}`")),
        }
    }
}

impl fmt::Display for Stage2d {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Stage2d::Conv {
                kernel,
                stride,
                channels,
                padding,
                batchnorm,
            } => {
                write!(f, "conv:{kernel}:{stride}:{channels}:{}", padding.as_str())?;
                if *batchnorm {
                    write!(f, ":bn")?;
                }
                Ok(())
            }
            Stage2d::Pool {
                window,
                stride,
                padding,
            } => write!(f, "pool:{window}:{stride}:{}", padding.as_str()),
            Stage2d::Fire {
                squeeze,
                expand1,
                expand3,
            } => write!(f, "fire:{squeeze}:{expand1}:{expand3}"),
        }
    }
}

/// `conv:K:S:C[:same|valid][:bn]`, `pool:W[:S][:same|valid]` or `fire:S:E1:E3`.
impl std::str::FromStr for Stage2d {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts[0] == "fire" {
            if parts.len() != 4 {
                return Err("fire takes squeeze:expand1:expand3".into());
            }
            let n = nums(&parts[1..], 3, "fire")?;
            return Ok(Stage2d::Fire {
                squeeze: n[0],
                expand1: n[1],
                expand3: n[2],
            });
        }
        let batchnorm = parts.contains(&"bn");
        if batchnorm && parts[0] != "conv" {
            return Err("only conv stages take :bn".into());
        }
        let rest: Vec<&str> = parts.iter().copied().filter(|p| *p != "bn").collect();
        match rest.join(":").parse::<Stage1d>()? {
            Stage1d::Conv {
                kernel,
                stride,
                channels,
                padding,
            } => Ok(Stage2d::Conv {
                kernel,
                stride,
                channels,
                padding,
                batchnorm,
            }),
            Stage1d::Pool {
                window,
                stride,
                padding,
            } => Ok(Stage2d::Pool {
                window,
                stride,
                padding,
            }),
        }
    }
}

/// Parameter-free description of one layer.
#[derive(Debug, Clone, PartialEq)]
pub enum LayerSpec {
    Conv(ConvSpec),
    BatchNorm {
        channels: usize,
    },
    Relu,
    MaxPool(PoolSpec),
    Fire {
        in_channels: usize,
        squeeze: usize,
        expand1: usize,
        expand3: usize,
    },
    GlobalMaxPool,
}

impl LayerSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            LayerSpec::Conv(_) => "conv",
            LayerSpec::BatchNorm { .. } => "bn",
            LayerSpec::Relu => "relu",
            LayerSpec::MaxPool(_) => "pool",
            LayerSpec::Fire { .. } => "fire",
            LayerSpec::GlobalMaxPool => "gmax",
        }
    }

    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>, String> {
        match self {
            LayerSpec::Conv(spec) => {
                if input[0] != spec.in_channels {
                    return Err(format!("expects {} channels, got {}", spec.in_channels, input[0]));
                }
                let mut s = vec![spec.out_channels];
                s.extend(spec.output_extents(&input[1..]).map_err(|e| e.to_string())?);
                Ok(s)
            }
            LayerSpec::BatchNorm { channels } => {
                if input[0] != *channels {
                    return Err(format!("batchnorm over {channels} channels got {}", input[0]));
                }
                Ok(input.to_vec())
            }
            LayerSpec::Relu => Ok(input.to_vec()),
            LayerSpec::MaxPool(spec) => {
                let mut s = vec![input[0]];
                s.extend(spec.output_extents(&input[1..]).map_err(|e| e.to_string())?);
                Ok(s)
            }
            LayerSpec::Fire {
                in_channels,
                expand1,
                expand3,
                ..
            } => {
                if input.len() != 3 || input[0] != *in_channels {
                    return Err(format!("fire expects [{in_channels} × H × W], got {input:?}"));
                }
                Ok(vec![expand1 + expand3, input[1], input[2]])
            }
            LayerSpec::GlobalMaxPool => Ok(vec![input[0]]),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlannedLayer {
    pub layer: LayerSpec,
    pub input: Vec<usize>,
    pub output: Vec<usize>,
}

/// Shapes of every branch layer and the flattened feature lengths.
#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    pub ffe: Vec<PlannedLayer>,
    pub pe: Vec<PlannedLayer>,
    pub afe: Vec<PlannedLayer>,
    pub afe_len: usize,
    pub ffe_len: usize,
    pub pe_len: usize,
    pub concat_len: usize,
}

fn plan_1d(branch: &str, stages: &[Stage1d], len: usize) -> Result<Vec<PlannedLayer>, ModelError> {
    let mut shape = vec![1, len];
    let mut out = Vec::new();
    for stage in stages {
        let layers = match *stage {
            Stage1d::Conv {
                kernel,
                stride,
                channels,
                padding,
            } => {
                let spec = ConvSpec::new_1d(shape[0], channels, kernel, stride, padding)
                    .map_err(|e| ModelError::Config(format!("{branch} conv: {e}")))?;
                vec![LayerSpec::Conv(spec), LayerSpec::Relu]
            }
            Stage1d::Pool {
                window,
                stride,
                padding,
            } => {
                let spec = PoolSpec::new(vec![window], vec![stride], padding)
                    .map_err(|e| ModelError::Config(format!("{branch} pool: {e}")))?;
                vec![LayerSpec::MaxPool(spec)]
            }
        };
        for layer in layers {
            let next = layer
                .output_shape(&shape)
                .map_err(|e| ModelError::Config(format!("{branch} layer {}: {e}", out.len())))?;
            out.push(PlannedLayer {
                layer,
                input: shape.clone(),
                output: next.clone(),
            });
            shape = next;
        }
    }
    Ok(out)
}
