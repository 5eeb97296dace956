use crate::kv::{parse_kv, parse_value, write_kv, KvError};

use super::TrainError;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
    /// Epochs without improvement before stopping.
    pub patience: usize,
    /// Keep batch-norm in inference mode (running statistics) while training.
    pub freeze_batchnorm: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-5,
            batch_size: 16,
            epochs: 100,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-7,
            seed: 0,
            patience: 20,
            freeze_batchnorm: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::Config(m.to_string()));
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be finite and non-negative");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if !(self.beta1 > 0.0 && self.beta1 < 1.0 && self.beta2 > 0.0 && self.beta2 < 1.0) {
            return bad("adam betas must lie in (0, 1)");
        }
        if !(self.epsilon > 0.0) {
            return bad("adam epsilon must be positive");
        }
        Ok(())
    }

    pub const KEYS: [&'static str; 9] = [
        "learning_rate",
        "batch_size",
        "epochs",
        "adam.beta1",
        "adam.beta2",
        "adam.epsilon",
        "seed",
        "patience",
        "freeze_batchnorm",
    ];

    /// Returns `Ok(false)` when the key is not a training key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<bool, KvError> {
        match key {
            "learning_rate" => self.learning_rate = parse_value(key, value)?,
            "batch_size" => self.batch_size = parse_value(key, value)?,
            "epochs" => self.epochs = parse_value(key, value)?,
            "adam.beta1" => self.beta1 = parse_value(key, value)?,
            "adam.beta2" => self.beta2 = parse_value(key, value)?,
            "adam.epsilon" => self.epsilon = parse_value(key, value)?,
            "seed" => self.seed = parse_value(key, value)?,
            "patience" => self.patience = parse_value(key, value)?,
            "freeze_batchnorm" => self.freeze_batchnorm = parse_value(key, value)?,
            _ => return Ok(false),
        }
        Ok(true)
    }

    pub fn to_kv(&self) -> String {
        write_kv(&[
            ("learning_rate", self.learning_rate.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("epochs", self.epochs.to_string()),
            ("adam.beta1", self.beta1.to_string()),
            ("adam.beta2", self.beta2.to_string()),
            ("adam.epsilon", self.epsilon.to_string()),
            ("seed", self.seed.to_string()),
            ("patience", self.patience.to_string()),
            ("freeze_batchnorm", self.freeze_batchnorm.to_string()),
        ])
    }

    pub fn from_kv(text: &str) -> Result<Self, KvError> {
        let mut c = TrainConfig::default();
        for (k, v) in parse_kv(text)? {
            if !c.set(&k, &v)? {
                return Err(KvError::UnknownKey(k));
            }
        }
        Ok(c)
    }
}
