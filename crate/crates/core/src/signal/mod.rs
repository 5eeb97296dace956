//! Audio ingestion, preprocessing, labelled datasets and a synthetic
//! heart-sound generator.

pub mod dataset;
pub mod preprocess;
pub mod resample;
pub mod synth;
pub mod wav;

use std::path::PathBuf;

use thiserror::Error;

pub use dataset::{load_dataset, Dataset};
pub use preprocess::{normalize_amplitude, truncate, Normalized, Preprocessor};
pub use resample::resample;
pub use synth::{clip_seed, synth_dataset, synth_pcg, synth_pcg_annotated, Beat, SynthClass};
pub use wav::{decode_wav, encode_wav, read_wav, write_wav, WavEncoding};

#[derive(Debug, Error)]
pub enum SignalError {
    #[error("unsupported WAV encoding: {0}")]
    UnsupportedCodec(String),
    #[error("malformed WAV header: {0}")]
    MalformedHeader(String),
    #[error("WAV file has no audio frames")]
    EmptyData,
    #[error("clip is empty")]
    EmptyClip,
    #[error("sample rate must be positive")]
    InvalidRate,
    #[error("clip shorter than target duration: need {needed} samples, have {got}")]
    TooShort { needed: usize, got: usize },
    #[error("unknown class `{0}`")]
    UnknownClass(String),
    #[error("class directory `{0}` is not among the expected classes")]
    UnexpectedClassDir(String),
    #[error("no class directories under {0}")]
    NoClasses(PathBuf),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Mono audio with provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
    pub label: Option<String>,
    pub source_id: String,
}

impl AudioClip {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Self {
        AudioClip {
            samples,
            sample_rate,
            label: None,
            source_id: String::new(),
        }
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    fn with_samples(&self, samples: Vec<f64>, sample_rate: u32) -> Self {
        AudioClip {
            samples,
            sample_rate,
            label: self.label.clone(),
            source_id: self.source_id.clone(),
        }
    }
}
