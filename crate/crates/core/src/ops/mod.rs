//! Stateless numeric primitives and their backward passes.

pub mod affine;
pub mod conv;
pub mod pool;

pub use affine::{affine, affine_backward, AffineGrads};
pub use conv::{conv, conv1d, conv2d, conv_backward, output_geometry, ConvGrads, ConvSpec, Padding};
pub use pool::{global_maxpool_with_indices, maxpool, maxpool_backward, maxpool_with_indices, PoolSpec};
