//! File formats: the `ADVT` tensor container, model config files and WAV.

pub mod container;
pub mod wav;

use std::path::Path;

pub use container::{decode_tensors, encode_tensors, load_weights, read_tensors, save_weights, write_tensors};
pub use wav::{decode_wav, encode_wav, read_wav, write_wav, WavSummary};

use crate::config::ModelConfig;
use crate::error::Result;

/// Reads a `key = value` config file on top of the defaults.
pub fn read_config(path: impl AsRef<Path>) -> Result<ModelConfig> {
    std::fs::read_to_string(path)?.parse()
}

pub fn write_config(cfg: &ModelConfig, path: impl AsRef<Path>) -> Result<()> {
    Ok(std::fs::write(path, cfg.to_config_string())?)
}
