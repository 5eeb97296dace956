//! Trainable layers with explicit forward and backward passes.

pub mod activation;
pub mod batchnorm;
pub mod dropout;
pub mod fire;
pub mod lstm;

pub use activation::{relu, relu_backward, sigmoid, softmax, softmax_backward};
pub use batchnorm::{batchnorm_backward, batchnorm_forward, BatchNormCache, BatchNormOutput, BatchNormParams};
pub use dropout::{dropout, dropout_mask, DropoutMask};
pub use fire::{fire_backward, fire_forward, fire_forward_cached, FireCache, FireParams};
pub use lstm::{
    bilstm_backward, bilstm_forward, bilstm_forward_cached, lstm_step, lstm_step_backward,
    lstm_step_cached, BiLstmCache, BiLstmParams, Gate, LstmParams, LstmState, LstmStepCache,
};

/// Whether stochastic and batch-statistic layers run in training form.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}
