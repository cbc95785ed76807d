//! Deterministic numerical kernels shared by every model component.

pub mod conv;
pub mod macs;
pub mod norm;
pub mod ops;
pub mod rng;
pub mod scalar;
pub mod tensor;

pub use conv::{conv1d, conv2d, Conv1dSpec, Conv2dSpec, Padding};
pub use norm::layer_norm;
pub use rng::{derive_seed, rng_fill, Distribution, Rng};
pub use scalar::{Dual, Scalar};
pub use tensor::Tensor;
