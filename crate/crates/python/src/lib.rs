//! Python bindings: synthesis, preprocessing, WAV I/O, metrics and a
//! `Model` class that builds, trains, evaluates, predicts and persists.

use std::collections::BTreeMap;
use std::path::PathBuf;

use cardioxnet::layers::Mode;
use cardioxnet::model::{
    build_model, count_flops, count_params, forward, load_model, model_to_bytes, save_model, Model, ModelConfig, Precision,
};
use cardioxnet::signal::{self, load_dataset, AudioClip, Dataset, Preprocessor, WavEncoding};
use cardioxnet::training::{evaluate, train, MetricsReport, TrainConfig};
use cardioxnet::Tensor;
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::{PyBytes, PyDict};

create_exception!(pycardioxnet, CardioxError, PyException, "Error raised by the cardioxnet engine.");

fn err(e: impl std::fmt::Display) -> PyErr {
    CardioxError::new_err(e.to_string())
}

fn parse_precision(s: &str) -> PyResult<Precision> {
    match s {
        "f64" => Ok(Precision::F64),
        "f32" => Ok(Precision::F32),
        _ => Err(err(format!("precision must be `f64` or `f32`, got `{s}`"))),
    }
}

/// Synthetic heart-sound clip of class `AS`, `MR`, `MS`, `MVP` or `N`.
#[pyfunction]
#[pyo3(signature = (class_name, seed, rate=4000, duration=1.5))]
fn synth_pcg(class_name: &str, seed: u64, rate: u32, duration: f64) -> PyResult<Vec<f64>> {
    Ok(signal::synth_pcg(class_name, seed, rate, duration).map_err(err)?.samples)
}

/// Resample, truncate and peak-normalize a clip.
#[pyfunction]
#[pyo3(signature = (samples, rate, target_rate=2000, duration=1.125))]
fn preprocess(samples: Vec<f64>, rate: u32, target_rate: u32, duration: f64) -> PyResult<Vec<f64>> {
    let pre = Preprocessor { target_rate, duration };
    Ok(pre.run(&AudioClip::new(samples, rate)).map_err(err)?.clip.samples)
}

/// `(samples, sample_rate)` of a mono PCM16 or float32 WAV file.
#[pyfunction]
fn read_wav(path: PathBuf) -> PyResult<(Vec<f64>, u32)> {
    let clip = signal::read_wav(path).map_err(err)?;
    Ok((clip.samples, clip.sample_rate))
}

/// Writes a mono PCM16 WAV file.
#[pyfunction]
fn write_wav(path: PathBuf, samples: Vec<f64>, rate: u32) -> PyResult<()> {
    signal::write_wav(path, &AudioClip::new(samples, rate), WavEncoding::Pcm16).map_err(err)
}

fn report_dict<'py>(py: Python<'py>, r: &MetricsReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("accuracy", r.accuracy)?;
    d.set_item("precision", r.macro_precision)?;
    d.set_item("recall", r.macro_recall)?;
    d.set_item("f1", r.macro_f1)?;
    d.set_item("class_names", r.class_names.clone())?;
    d.set_item("confusion", r.confusion.clone())?;
    let per_class = PyDict::new(py);
    for (name, m) in r.class_names.iter().zip(&r.per_class) {
        let c = PyDict::new(py);
        c.set_item("precision", m.precision)?;
        c.set_item("recall", m.recall)?;
        c.set_item("f1", m.f1)?;
        c.set_item("accuracy", m.accuracy)?;
        per_class.set_item(name, c)?;
    }
    d.set_item("per_class", per_class)?;
    Ok(d)
}

/// Accuracy, macro precision/recall/F1 and the confusion matrix.
#[pyfunction]
fn metrics<'py>(
    py: Python<'py>,
    truth: Vec<usize>,
    predicted: Vec<usize>,
    class_names: Vec<String>,
) -> PyResult<Bound<'py, PyDict>> {
    let r = MetricsReport::from_predictions(&truth, &predicted, class_names).map_err(err)?;
    report_dict(py, &r)
}

#[pyclass(name = "Model", module = "pycardioxnet")]
struct PyModel {
    inner: Model,
}

impl PyModel {
    fn preprocessor(&self) -> Preprocessor {
        let c = self.inner.config();
        Preprocessor {
            target_rate: c.sample_rate,
            duration: c.input_len as f64 / c.sample_rate as f64,
        }
    }

    fn dataset(&self, dir: &PathBuf) -> PyResult<Dataset> {
        let c = self.inner.config();
        let expected = (!c.class_names.is_empty()).then_some(c.class_names.as_slice());
        let data = load_dataset(dir, expected, &self.preprocessor()).map_err(err)?;
        if data.is_empty() {
            return Err(err(format!("no usable clips under {}", dir.display())));
        }
        Ok(data)
    }
}

#[pymethods]
impl PyModel {
    /// A freshly initialized network from a preset (`default`, `small`,
    /// `tiny`) with optional `key=value` configuration overrides.
    #[new]
    #[pyo3(signature = (preset="default", seed=0, overrides=None))]
    fn new(preset: &str, seed: u64, overrides: Option<BTreeMap<String, String>>) -> PyResult<Self> {
        let mut cfg = ModelConfig::preset(preset).ok_or_else(|| err(format!("unknown preset `{preset}`")))?;
        for (k, v) in overrides.unwrap_or_default() {
            if !cfg.set(&k, &v).map_err(err)? {
                return Err(err(format!("unknown model key `{k}`")));
            }
        }
        Ok(PyModel {
            inner: build_model(&cfg, seed).map_err(err)?,
        })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyModel {
            inner: load_model(path).map_err(err)?,
        })
    }

    #[pyo3(signature = (path, precision="f64"))]
    fn save(&self, path: PathBuf, precision: &str) -> PyResult<()> {
        save_model(&self.inner, path, parse_precision(precision)?).map_err(err)
    }

    #[pyo3(signature = (precision="f64"))]
    fn to_bytes<'py>(&self, py: Python<'py>, precision: &str) -> PyResult<Bound<'py, PyBytes>> {
        Ok(PyBytes::new(py, &model_to_bytes(&self.inner, parse_precision(precision)?)))
    }

    #[getter]
    fn param_count(&self) -> u64 {
        count_params(&self.inner)
    }

    #[getter]
    fn flops(&self) -> u64 {
        count_flops(&self.inner)
    }

    #[getter]
    fn class_names(&self) -> Vec<String> {
        let c = self.inner.config();
        (0..c.class_count).map(|i| c.class_name(i)).collect()
    }

    #[getter]
    fn sample_rate(&self) -> u32 {
        self.inner.config().sample_rate
    }

    #[getter]
    fn input_len(&self) -> usize {
        self.inner.config().input_len
    }

    fn config_text(&self) -> String {
        self.inner.config().to_kv()
    }

    /// Class probabilities for one raw clip sampled at `rate`.
    fn predict(&self, samples: Vec<f64>, rate: u32) -> PyResult<Vec<f64>> {
        let clip = self.preprocessor().run(&AudioClip::new(samples, rate)).map_err(err)?.clip;
        let x = Tensor::new(vec![1, clip.samples.len()], clip.samples).map_err(err)?;
        Ok(forward(&self.inner, &x, Mode::Infer, 0).map_err(err)?.row(0).to_vec())
    }

    /// Trains on `<data_dir>/<class>/*.wav` and keeps the best epoch's
    /// weights; returns the per-epoch history.
    #[pyo3(signature = (data_dir, epochs=100, learning_rate=1e-5, batch_size=16, patience=20, seed=0))]
    fn fit<'py>(
        &mut self,
        py: Python<'py>,
        data_dir: PathBuf,
        epochs: usize,
        learning_rate: f64,
        batch_size: usize,
        patience: usize,
        seed: u64,
    ) -> PyResult<Vec<Bound<'py, PyDict>>> {
        let data = self.dataset(&data_dir)?;
        let cfg = TrainConfig {
            epochs,
            learning_rate,
            batch_size,
            patience,
            seed,
            ..TrainConfig::default()
        };
        let model = self.inner.clone();
        let (model, history) = py
            .detach(|| train(model, &data, &data.subset(&[]), &cfg))
            .map_err(err)?;
        self.inner = model;
        history
            .records
            .iter()
            .map(|r| {
                let d = PyDict::new(py);
                d.set_item("epoch", r.epoch)?;
                d.set_item("train_loss", r.train_loss)?;
                d.set_item("train_accuracy", r.train_accuracy)?;
                Ok(d)
            })
            .collect()
    }

    /// Metrics on `<data_dir>/<class>/*.wav`.
    fn evaluate<'py>(&self, py: Python<'py>, data_dir: PathBuf) -> PyResult<Bound<'py, PyDict>> {
        let data = self.dataset(&data_dir)?;
        let r = evaluate(&self.inner, &data).map_err(err)?;
        report_dict(py, &r)
    }

    fn __repr__(&self) -> String {
        let c = self.inner.config();
        format!(
            "Model(classes={}, input_len={}, sample_rate={}, params={})",
            c.class_count,
            c.input_len,
            c.sample_rate,
            count_params(&self.inner)
        )
    }
}

#[pymodule]
fn pycardioxnet(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(synth_pcg, m)?)?;
    m.add_function(wrap_pyfunction!(preprocess, m)?)?;
    m.add_function(wrap_pyfunction!(read_wav, m)?)?;
    m.add_function(wrap_pyfunction!(write_wav, m)?)?;
    m.add_function(wrap_pyfunction!(metrics, m)?)?;
    m.add_class::<PyModel>()?;
    m.add("CardioxError", m.py().get_type::<CardioxError>())?;
    m.add("CLASSES", cardioxnet::model::config::DEFAULT_CLASSES.to_vec())?;
    Ok(())
}
