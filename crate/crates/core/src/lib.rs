//! A small neural compute engine and an end-to-end phonocardiogram
//! classifier built on it.

pub mod gradcheck;
pub mod kv;
pub mod layers;
pub mod model;
pub mod ops;
pub mod signal;
pub mod tensor;
pub mod training;

pub use tensor::{Tensor, TensorError};
