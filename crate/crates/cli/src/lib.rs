//! Command-line surface: synthesize data, train, cross-validate, evaluate,
//! predict single files and benchmark a model.

pub mod config;
pub mod error;

use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use cardioxnet::layers::Mode;
use cardioxnet::model::{build_model, count_flops, count_params, forward, load_model, save_model, Model, ModelConfig, Precision};
use cardioxnet::signal::{
    clip_seed, decode_wav, encode_wav, load_dataset, read_wav, synth_pcg, write_wav, Dataset, SynthClass, WavEncoding,
};
use cardioxnet::training::report::{fold_rows, summary_rows, write_confusion, write_folds, write_history, write_metrics, write_summary};
use cardioxnet::training::{cross_validate, evaluate, split_dataset, train};
use cardioxnet::Tensor;
use clap::{Args, Parser, Subcommand, ValueEnum};

pub use config::{parse_override, preprocessor_for, RunConfig};
pub use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "cardioxnet", version, about = "Phonocardiogram classification with a from-scratch CRNN")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write synthetic heart-sound clips as `<out>/<class>/<class>_<i>.wav`.
    Synth(SynthArgs),
    /// Train a model on `<data>/<class>/*.wav`.
    Train(TrainArgs),
    /// Stratified k-fold cross-validation.
    Cv(CvArgs),
    /// Evaluate a saved model on a labelled directory.
    Eval(EvalArgs),
    /// Classify one WAV file.
    Predict(PredictArgs),
    /// Report parameters, FLOPs, file size and end-to-end latency.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub per_class: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Sample rate in Hz.
    #[arg(long, default_value_t = 4000)]
    pub rate: u32,
    /// Clip length in seconds.
    #[arg(long, default_value_t = 1.5)]
    pub duration: f64,
}

/// Model and training settings shared by `train` and `cv`.
#[derive(Debug, Args)]
pub struct RunArgs {
    /// `key=value` configuration file; flags override its entries.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Base architecture: default, small or tiny.
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    /// Any configuration key, as `key=value`; repeatable.
    #[arg(long = "set", value_parser = parse_override)]
    pub set: Vec<(String, String)>,
}

impl RunArgs {
    fn overrides(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        let mut push = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                out.push((k.to_string(), v));
            }
        };
        push("preset", self.preset.clone());
        push("data", self.data.as_ref().map(|p| p.display().to_string()));
        push("seed", self.seed.map(|v| v.to_string()));
        push("epochs", self.epochs.map(|v| v.to_string()));
        push("learning_rate", self.learning_rate.map(|v| v.to_string()));
        push("batch_size", self.batch_size.map(|v| v.to_string()));
        push("patience", self.patience.map(|v| v.to_string()));
        out.extend(self.set.iter().cloned());
        out
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Storage {
    F64,
    F32,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Model file to write.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// History CSV; defaults to the model path with a `.history.csv` extension.
    #[arg(long)]
    pub history: Option<PathBuf>,
    /// Hold out a stratified 10 % validation and 20 % test split instead of
    /// training on every clip.
    #[arg(long)]
    pub holdout: bool,
    #[arg(long, value_enum, default_value = "f64")]
    pub precision: Storage,
}

#[derive(Debug, Args)]
pub struct CvArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long, default_value_t = 10)]
    pub folds: usize,
    /// Directory for `folds.csv` and `summary.csv`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Directory for `metrics.csv` and `confusion.csv`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub wav: PathBuf,
    /// Expected class count; a model with a different head is rejected.
    #[arg(long)]
    pub classes: Option<usize>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub repeats: usize,
    /// Input clip; a synthetic normal clip is used when absent.
    #[arg(long)]
    pub wav: Option<PathBuf>,
}

pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<(), CliError> {
    match &cli.command {
        Command::Synth(a) => synth(a, out),
        Command::Train(a) => train_cmd(a, out),
        Command::Cv(a) => cv_cmd(a, out),
        Command::Eval(a) => eval_cmd(a, out),
        Command::Predict(a) => predict_cmd(a, out),
        Command::Bench(a) => bench_cmd(a, out),
    }
}

fn emit(w: &mut dyn Write, line: String) -> Result<(), CliError> {
    writeln!(w, "{line}").map_err(CliError::io("<stdout>"))
}

fn create(path: &Path) -> Result<File, CliError> {
    File::create(path).map_err(CliError::io(path))
}

fn make_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(CliError::io(path))
}

fn synth(a: &SynthArgs, w: &mut dyn Write) -> Result<(), CliError> {
    if a.rate == 0 || !(a.duration > 0.0 && a.duration.is_finite()) {
        return Err(CliError::Usage("rate and duration must be positive".into()));
    }
    for class in SynthClass::ALL {
        let dir = a.out.join(class.name());
        make_dir(&dir)?;
        for i in 0..a.per_class {
            let clip = synth_pcg(class.name(), clip_seed(a.seed, i as u64), a.rate, a.duration)?;
            write_wav(dir.join(format!("{}_{i}.wav", class.name())), &clip, WavEncoding::Pcm16)?;
        }
    }
    emit(
        w,
        format!(
            "wrote {} clips ({} per class) to {}",
            a.per_class * SynthClass::ALL.len(),
            a.per_class,
            a.out.display()
        ),
    )
}

/// Loads `<dir>/<class>/*.wav` shaped for `model`.
pub fn load_data(dir: &Path, model: &ModelConfig) -> Result<Dataset, CliError> {
    let expected = (!model.class_names.is_empty()).then_some(model.class_names.as_slice());
    let data = load_dataset(dir, expected, &preprocessor_for(model))?;
    for warning in &data.warnings {
        eprintln!("warning: {warning}");
    }
    if data.is_empty() {
        return Err(CliError::Data(format!("no usable clips under {}", dir.display())));
    }
    if data.class_count() != model.class_count {
        return Err(CliError::Mismatch(format!(
            "model predicts {} classes but {} has {}",
            model.class_count,
            dir.display(),
            data.class_count()
        )));
    }
    Ok(data)
}

fn required(p: Option<PathBuf>, flag: &str) -> Result<PathBuf, CliError> {
    p.ok_or_else(|| CliError::Usage(format!("--{flag} is required (flag or config key `{flag}`)")))
}

fn train_cmd(a: &TrainArgs, w: &mut dyn Write) -> Result<(), CliError> {
    let mut overrides = a.run.overrides();
    for (k, v) in [("out", &a.out), ("history", &a.history)] {
        if let Some(p) = v {
            overrides.push((k.to_string(), p.display().to_string()));
        }
    }
    let cfg = RunConfig::load(a.run.config.as_deref(), &overrides)?;
    let data_dir = required(cfg.data.clone(), "data")?;
    let model_path = required(cfg.out.clone(), "out")?;
    let data = load_data(&data_dir, &cfg.model)?;
    let (tr, va, te) = if a.holdout {
        let s = split_dataset(&data.labels, data.class_count(), (0.7, 0.1, 0.2), cfg.train.seed)?;
        (data.subset(&s.train), data.subset(&s.val), Some(data.subset(&s.test)))
    } else {
        (data.clone(), data.subset(&[]), None)
    };
    let model = build_model(&cfg.model, cfg.train.seed)?;
    let (model, history) = train(model, &tr, &va, &cfg.train)?;
    let precision = match a.precision {
        Storage::F64 => Precision::F64,
        Storage::F32 => Precision::F32,
    };
    save_model(&model, &model_path, precision)?;
    let history_path = cfg.history.clone().unwrap_or_else(|| model_path.with_extension("history.csv"));
    write_history(create(&history_path)?, &history.records)?;
    let best = history.records.iter().find(|r| r.epoch == history.best_epoch);
    emit(
        w,
        format!(
            "trained on {} clips for {} epochs{}; best epoch {} train accuracy {:.4}",
            tr.len(),
            history.records.len(),
            if history.stopped_early { " (stopped early)" } else { "" },
            history.best_epoch,
            best.map_or(f64::NAN, |r| r.train_accuracy),
        ),
    )?;
    if let Some(test) = te {
        let report = evaluate(&model, &test)?;
        emit(w, format!("held-out test accuracy {:.4} on {} clips", report.accuracy, test.len()))?;
    }
    emit(w, format!("model {}", model_path.display()))?;
    emit(w, format!("history {}", history_path.display()))
}

fn cv_cmd(a: &CvArgs, w: &mut dyn Write) -> Result<(), CliError> {
    let cfg = RunConfig::load(a.run.config.as_deref(), &a.run.overrides())?;
    let data = load_data(&required(cfg.data.clone(), "data")?, &cfg.model)?;
    let cv = cross_validate(&data, &cfg.model, &cfg.train, a.folds)?;
    make_dir(&a.out)?;
    let rows = fold_rows(&cv);
    write_folds(create(&a.out.join("folds.csv"))?, &rows)?;
    let summary = summary_rows(&cv);
    write_summary(create(&a.out.join("summary.csv"))?, &summary)?;
    for (fold, acc, p, r, f1) in rows {
        emit(w, format!("fold {fold}: accuracy {acc:.4} precision {p:.4} recall {r:.4} f1 {f1:.4}"))?;
    }
    for (name, s) in summary {
        emit(w, format!("{name} {:.4} ± {:.4}", s.mean, s.std))?;
    }
    Ok(())
}

fn eval_cmd(a: &EvalArgs, w: &mut dyn Write) -> Result<(), CliError> {
    let model = load_model(&a.model)?;
    let data = load_data(&a.data, model.config())?;
    let report = evaluate(&model, &data)?;
    make_dir(&a.out)?;
    write_metrics(create(&a.out.join("metrics.csv"))?, &report)?;
    write_confusion(create(&a.out.join("confusion.csv"))?, &report)?;
    emit(
        w,
        format!(
            "accuracy {:.4} precision {:.4} recall {:.4} f1 {:.4} on {} clips",
            report.accuracy,
            report.macro_precision,
            report.macro_recall,
            report.macro_f1,
            data.len()
        ),
    )
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Inference-mode probabilities for one raw clip.
pub fn classify(model: &Model, samples: Vec<f64>) -> Result<Vec<f64>, CliError> {
    let x = Tensor::new(vec![1, samples.len()], samples)?;
    Ok(forward(model, &x, Mode::Infer, 0)?.row(0).to_vec())
}

fn predict_cmd(a: &PredictArgs, w: &mut dyn Write) -> Result<(), CliError> {
    let model = load_model(&a.model)?;
    let cfg = model.config();
    if let Some(k) = a.classes {
        if k != cfg.class_count {
            return Err(CliError::Mismatch(format!(
                "model predicts {} classes but {k} were requested",
                cfg.class_count
            )));
        }
    }
    let norm = preprocessor_for(cfg).run(&read_wav(&a.wav)?)?;
    if norm.silent {
        eprintln!("warning: {} is silent", a.wav.display());
    }
    let probs = classify(&model, norm.clip.samples)?;
    let best = argmax(&probs);
    emit(w, format!("predicted {} {:.6}", cfg.class_name(best), probs[best]))?;
    for (i, p) in probs.iter().enumerate() {
        emit(w, format!("{} {p:.6}", cfg.class_name(i)))?;
    }
    Ok(())
}

fn bench_cmd(a: &BenchArgs, w: &mut dyn Write) -> Result<(), CliError> {
    if a.repeats < 2 {
        return Err(CliError::Usage("--repeats must be at least 2".into()));
    }
    let model = load_model(&a.model)?;
    let size = fs::metadata(&a.model).map_err(CliError::io(&a.model))?.len();
    let cfg = model.config();
    let bytes = match &a.wav {
        Some(p) => fs::read(p).map_err(CliError::io(p))?,
        None => {
            let secs = cfg.input_len as f64 / cfg.sample_rate as f64 + 0.25;
            encode_wav(&synth_pcg("N", 0, 4000, secs)?, WavEncoding::Pcm16)?
        }
    };
    let pre = preprocessor_for(cfg);
    let mut times = Vec::with_capacity(a.repeats);
    for _ in 0..a.repeats {
        let start = Instant::now();
        let clip = pre.run(&decode_wav(&bytes)?)?.clip;
        classify(&model, clip.samples)?;
        times.push(start.elapsed().as_secs_f64() * 1e3);
    }
    let n = times.len() as f64;
    let mean = times.iter().sum::<f64>() / n;
    let std = (times.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    emit(w, format!("params {}", count_params(&model)))?;
    emit(w, format!("flops {}", count_flops(&model)))?;
    emit(w, format!("model_bytes {size}"))?;
    emit(w, format!("latency_ms {mean:.3} ± {std:.3} over {} runs", a.repeats))
}
