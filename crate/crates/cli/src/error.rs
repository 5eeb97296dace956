use std::path::PathBuf;

use cardioxnet::kv::KvError;
use cardioxnet::model::ModelError;
use cardioxnet::signal::SignalError;
use cardioxnet::training::TrainError;
use cardioxnet::TensorError;
use thiserror::Error;

pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 1;
pub const EXIT_IO: u8 = 2;
pub const EXIT_DATA: u8 = 3;
pub const EXIT_MISMATCH: u8 = 4;
pub const EXIT_NUMERIC: u8 = 5;
pub const EXIT_INTERNAL: u8 = 6;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Mismatch(String),
    #[error("config: {0}")]
    Kv(#[from] KvError),
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }

    /// Process exit status: 1 usage, 2 I/O, 3 data, 4 model/data mismatch,
    /// 5 numeric failure, 6 internal.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Kv(_) => EXIT_USAGE,
            CliError::Io { .. } => EXIT_IO,
            CliError::Data(_) => EXIT_DATA,
            CliError::Mismatch(_) => EXIT_MISMATCH,
            CliError::Signal(e) => signal_code(e),
            CliError::Model(e) => model_code(e),
            CliError::Train(e) => train_code(e),
            CliError::Tensor(e) => tensor_code(e),
        }
    }
}

fn signal_code(e: &SignalError) -> u8 {
    match e {
        SignalError::Io { .. } => EXIT_IO,
        SignalError::UnexpectedClassDir(_) => EXIT_MISMATCH,
        _ => EXIT_DATA,
    }
}

fn model_code(e: &ModelError) -> u8 {
    match e {
        ModelError::Io(_) => EXIT_IO,
        ModelError::Config(_) => EXIT_USAGE,
        ModelError::InputLength { .. } => EXIT_MISMATCH,
        ModelError::Tensor(t) => tensor_code(t),
        ModelError::BadMagic
        | ModelError::UnsupportedVersion(_)
        | ModelError::Truncated(_)
        | ModelError::Checksum { .. }
        | ModelError::Malformed(_)
        | ModelError::MissingTensor(_) => EXIT_DATA,
    }
}

fn train_code(e: &TrainError) -> u8 {
    match e {
        TrainError::Empty(_) | TrainError::Label { .. } | TrainError::Stratify { .. } | TrainError::CsvFormat(_) => {
            EXIT_DATA
        }
        TrainError::ClassMismatch { .. } => EXIT_MISMATCH,
        TrainError::NonFiniteLoss { .. } | TrainError::NonFiniteGradient(_) => EXIT_NUMERIC,
        TrainError::Config(_) | TrainError::Kv(_) => EXIT_USAGE,
        TrainError::Model(m) => model_code(m),
        TrainError::Tensor(t) => tensor_code(t),
        TrainError::Csv(c) if c.is_io_error() => EXIT_IO,
        TrainError::Csv(_) => EXIT_DATA,
    }
}

fn tensor_code(e: &TensorError) -> u8 {
    match e {
        TensorError::NonFinite { .. } => EXIT_NUMERIC,
        _ => EXIT_INTERNAL,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn codes_are_distinct_per_category() {
        assert_eq!(CliError::Usage("x".into()).exit_code(), 1);
        assert_eq!(CliError::io("f")(std::io::Error::other("x")).exit_code(), 2);
        assert_eq!(CliError::from(ModelError::BadMagic).exit_code(), 3);
        assert_eq!(CliError::from(TrainError::ClassMismatch { model: 2, data: 5 }).exit_code(), 4);
        assert_eq!(CliError::from(TrainError::NonFiniteLoss { epoch: 1, batch: 0 }).exit_code(), 5);
        let shape = TensorError::BadShape(vec![0]);
        assert_eq!(CliError::from(shape).exit_code(), 6);
        assert_eq!(CliError::from(SignalError::UnexpectedClassDir("x".into())).exit_code(), 4);
        assert_eq!(CliError::from(KvError::UnknownKey("x".into())).exit_code(), 1);
    }
}
