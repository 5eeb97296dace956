//! Run configuration: model and training keys plus paths, read from a
//! `key=value` file and overridden by flags.

use std::path::{Path, PathBuf};

use cardioxnet::kv::{parse_kv, KvError};
use cardioxnet::model::ModelConfig;
use cardioxnet::signal::Preprocessor;
use cardioxnet::training::TrainConfig;

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub history: Option<PathBuf>,
}

impl RunConfig {
    /// `preset` selects the base model; later entries win, so `overrides`
    /// (from flags) take precedence over `file` entries.
    pub fn resolve(file: &[(String, String)], overrides: &[(String, String)]) -> Result<Self, CliError> {
        let preset = overrides
            .iter()
            .chain(file)
            .find(|(k, _)| k == "preset")
            .map(|(_, v)| v.as_str())
            .unwrap_or("default");
        let model = ModelConfig::preset(preset).ok_or_else(|| {
            CliError::Usage(format!("unknown preset `{preset}` (expected default, small or tiny)"))
        })?;
        let mut cfg = RunConfig {
            model,
            train: TrainConfig::default(),
            data: None,
            out: None,
            history: None,
        };
        for (k, v) in file.iter().chain(overrides) {
            cfg.set(k, v)?;
        }
        cfg.train.validate()?;
        cfg.model.plan()?;
        Ok(cfg)
    }

    pub fn load(path: Option<&Path>, overrides: &[(String, String)]) -> Result<Self, CliError> {
        let file = match path {
            Some(p) => parse_kv(&std::fs::read_to_string(p).map_err(CliError::io(p))?)?,
            None => Vec::new(),
        };
        Self::resolve(&file, overrides)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        match key {
            "preset" => {}
            "data" => self.data = Some(value.into()),
            "out" => self.out = Some(value.into()),
            "history" => self.history = Some(value.into()),
            _ => {
                if !self.model.set(key, value)? && !self.train.set(key, value)? {
                    return Err(KvError::UnknownKey(key.to_string()).into());
                }
            }
        }
        Ok(())
    }
}

/// Resample and truncate to the model's input geometry.
pub fn preprocessor_for(model: &ModelConfig) -> Preprocessor {
    Preprocessor {
        target_rate: model.sample_rate,
        duration: model.input_len as f64 / model.sample_rate as f64,
    }
}

/// Splits `key=value` flag arguments.
pub fn parse_override(s: &str) -> Result<(String, String), String> {
    s.split_once('=')
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .filter(|(k, _)| !k.is_empty())
        .ok_or_else(|| format!("expected key=value, got `{s}`"))
}
