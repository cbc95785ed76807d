//! Reusable layers: attention, feed-forward Transformer block, WaveNet stack,
//! complex 2-D convolution.

pub mod attention;
pub mod complex_conv;
pub mod fft_block;
pub mod wavenet;

pub use attention::{attention, attention_weights, linear_attention, scaled_dot_attention, AttentionParams};
pub use complex_conv::{complex_conv2d, ComplexKernel};
pub use fft_block::{fft_block, Affine, FftBlockParams, LN_EPS};
pub use wavenet::{wn_stack, WnLayer, WnStackParams};
