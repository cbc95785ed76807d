//! Model hyperparameters and the `key = value` config file format.
//!
//! One assignment per line, `#` starts a comment, blank lines are ignored.
//! Lists are comma separated; discriminator resolutions are
//! `fft:hop:win` triples. Keys not in the registry below are rejected.
//! Keys that are omitted keep their default value.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::Serialize;

use crate::dsp::{MelConfig, StftConfig, SAMPLE_RATE};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AttentionKind {
    ScaledDot,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DecoderKind {
    Istft,
    /// Transposed-convolution vocoder; cost-modelled only, never executed.
    UpsamplingBaseline,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DiscResolution {
    pub fft_size: usize,
    pub hop: usize,
    pub win_length: usize,
}

impl DiscResolution {
    pub fn stft(&self) -> StftConfig {
        StftConfig {
            fft_size: self.fft_size,
            hop: self.hop,
            win_length: self.win_length,
            center: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelConfig {
    pub sample_rate: u32,
    pub fft_size: usize,
    pub hop_length: usize,
    pub win_length: usize,
    pub n_mels: usize,
    pub mel_fmin: f64,
    pub mel_fmax: f64,
    pub ppg_dim: usize,

    pub attention_kind: AttentionKind,
    pub n_heads: usize,
    pub ffn_kernel1: usize,
    pub ffn_kernel2: usize,

    pub vocab_size: usize,
    pub t2p_hidden: usize,
    pub t2p_filter: usize,
    pub t2p_blocks: usize,
    pub dur_channels: usize,
    pub dur_kernel: usize,
    pub dur_layers: usize,
    pub postnet_channels: usize,
    pub postnet_kernel: usize,
    pub postnet_layers: usize,

    pub n_speakers: usize,
    pub speaker_dim: usize,

    pub latent_dim: usize,
    pub prior_hidden: usize,
    pub prior_filter: usize,
    pub prior_blocks: usize,

    pub posterior_hidden: usize,
    pub posterior_layers: usize,
    pub posterior_kernel: usize,

    pub flow_couplings: usize,
    pub flow_hidden: usize,
    pub flow_wn_layers: usize,
    pub flow_kernel: usize,
    pub share_flow: bool,
    pub fle_dim: usize,

    pub ppg_pred_channels: usize,
    pub ppg_pred_kernel: usize,
    pub ppg_pred_layers: usize,

    pub decoder_kind: DecoderKind,
    pub decoder_channels: Vec<usize>,
    pub decoder_groups: Vec<usize>,
    pub decoder_kernel: usize,
    pub decoder_res_blocks: usize,

    pub baseline_initial_channel: usize,
    pub baseline_rates: Vec<usize>,
    pub baseline_kernels: Vec<usize>,
    pub baseline_res_kernels: Vec<usize>,
    pub baseline_res_dilations: Vec<usize>,

    pub disc_resolutions: Vec<DiscResolution>,
    pub disc_channels: Vec<usize>,
    pub disc_kernel: usize,

    pub phonemes_per_second: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            sample_rate: SAMPLE_RATE,
            fft_size: 1024,
            hop_length: 200,
            win_length: 800,
            n_mels: 80,
            mel_fmin: 0.0,
            mel_fmax: 8000.0,
            ppg_dim: 256,

            attention_kind: AttentionKind::Linear,
            n_heads: 4,
            ffn_kernel1: 9,
            ffn_kernel2: 1,

            vocab_size: 128,
            t2p_hidden: 128,
            t2p_filter: 768,
            t2p_blocks: 2,
            dur_channels: 128,
            dur_kernel: 3,
            dur_layers: 2,
            postnet_channels: 256,
            postnet_kernel: 5,
            postnet_layers: 5,

            n_speakers: 16,
            speaker_dim: 256,

            latent_dim: 192,
            prior_hidden: 192,
            prior_filter: 768,
            prior_blocks: 2,

            posterior_hidden: 192,
            posterior_layers: 16,
            posterior_kernel: 5,

            flow_couplings: 4,
            flow_hidden: 192,
            flow_wn_layers: 3,
            flow_kernel: 3,
            share_flow: true,
            fle_dim: 192,

            ppg_pred_channels: 192,
            ppg_pred_kernel: 5,
            ppg_pred_layers: 2,

            decoder_kind: DecoderKind::Istft,
            decoder_channels: vec![256, 384, 1026],
            decoder_groups: vec![2, 4, 6],
            decoder_kernel: 3,
            decoder_res_blocks: 1,

            baseline_initial_channel: 128,
            baseline_rates: vec![5, 5, 4, 2],
            baseline_kernels: vec![10, 10, 8, 4],
            baseline_res_kernels: vec![3, 7, 11],
            baseline_res_dilations: vec![1, 3, 5],

            disc_resolutions: vec![
                DiscResolution {
                    fft_size: 512,
                    hop: 128,
                    win_length: 512,
                },
                DiscResolution {
                    fft_size: 1024,
                    hop: 256,
                    win_length: 1024,
                },
                DiscResolution {
                    fft_size: 2048,
                    hop: 512,
                    win_length: 2048,
                },
            ],
            disc_channels: vec![16, 32, 64, 64],
            disc_kernel: 3,

            phonemes_per_second: 12.0,
        }
    }
}

fn cfg_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl ModelConfig {
    /// Desk-scale configuration used by derivative checks and the
    /// analyzer-vs-runtime MAC equality: hidden width 8, two WaveNet layers,
    /// 64-point STFT.
    pub fn micro() -> Self {
        Self {
            fft_size: 64,
            hop_length: 16,
            win_length: 64,
            n_mels: 12,
            ppg_dim: 16,
            n_heads: 2,
            ffn_kernel1: 3,
            vocab_size: 20,
            t2p_hidden: 8,
            t2p_filter: 16,
            dur_channels: 8,
            postnet_channels: 8,
            postnet_kernel: 3,
            postnet_layers: 3,
            n_speakers: 3,
            speaker_dim: 8,
            latent_dim: 8,
            prior_hidden: 8,
            prior_filter: 16,
            posterior_hidden: 8,
            posterior_layers: 2,
            posterior_kernel: 3,
            flow_hidden: 8,
            flow_wn_layers: 2,
            fle_dim: 8,
            ppg_pred_channels: 8,
            ppg_pred_kernel: 3,
            decoder_channels: vec![8, 12, 66],
            decoder_groups: vec![2, 2, 6],
            baseline_initial_channel: 16,
            baseline_rates: vec![4, 4],
            baseline_kernels: vec![8, 8],
            baseline_res_kernels: vec![3],
            baseline_res_dilations: vec![1, 3],
            disc_resolutions: vec![
                DiscResolution {
                    fft_size: 64,
                    hop: 16,
                    win_length: 64,
                },
                DiscResolution {
                    fft_size: 128,
                    hop: 32,
                    win_length: 128,
                },
            ],
            disc_channels: vec![4, 4, 4],
            ..Self::default()
        }
    }

    pub fn stft(&self) -> StftConfig {
        StftConfig {
            fft_size: self.fft_size,
            hop: self.hop_length,
            win_length: self.win_length,
            center: true,
        }
    }

    pub fn mel(&self) -> MelConfig {
        MelConfig {
            n_mels: self.n_mels,
            f_min: self.mel_fmin,
            f_max: self.mel_fmax,
        }
    }

    pub fn n_bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    /// Number of layers (features) per sub-discriminator, score layer included.
    pub fn disc_layers(&self) -> usize {
        self.disc_channels.len() + 1
    }

    pub fn validate(&self) -> Result<()> {
        if self.sample_rate != SAMPLE_RATE {
            return Err(cfg_err(format!("sample_rate is fixed at {SAMPLE_RATE}")));
        }
        self.stft().validate()?;
        self.mel().validate()?;

        let positive = [
            ("ppg_dim", self.ppg_dim),
            ("n_heads", self.n_heads),
            ("vocab_size", self.vocab_size),
            ("t2p_hidden", self.t2p_hidden),
            ("t2p_filter", self.t2p_filter),
            ("dur_channels", self.dur_channels),
            ("dur_layers", self.dur_layers),
            ("postnet_channels", self.postnet_channels),
            ("n_speakers", self.n_speakers),
            ("speaker_dim", self.speaker_dim),
            ("latent_dim", self.latent_dim),
            ("prior_hidden", self.prior_hidden),
            ("prior_filter", self.prior_filter),
            ("posterior_hidden", self.posterior_hidden),
            ("posterior_layers", self.posterior_layers),
            ("flow_couplings", self.flow_couplings),
            ("flow_hidden", self.flow_hidden),
            ("flow_wn_layers", self.flow_wn_layers),
            ("fle_dim", self.fle_dim),
            ("ppg_pred_channels", self.ppg_pred_channels),
            ("ppg_pred_layers", self.ppg_pred_layers),
            ("baseline_initial_channel", self.baseline_initial_channel),
        ];
        for (k, v) in positive {
            if v == 0 {
                return Err(cfg_err(format!("{k} must be >= 1")));
            }
        }
        if self.postnet_layers < 2 {
            return Err(cfg_err("postnet_layers must be >= 2"));
        }
        let odd = [
            ("ffn_kernel1", self.ffn_kernel1),
            ("ffn_kernel2", self.ffn_kernel2),
            ("dur_kernel", self.dur_kernel),
            ("postnet_kernel", self.postnet_kernel),
            ("posterior_kernel", self.posterior_kernel),
            ("flow_kernel", self.flow_kernel),
            ("ppg_pred_kernel", self.ppg_pred_kernel),
            ("decoder_kernel", self.decoder_kernel),
            ("disc_kernel", self.disc_kernel),
        ];
        for (k, v) in odd {
            if v % 2 == 0 {
                return Err(cfg_err(format!("{k} must be odd, got {v}")));
            }
        }
        for (k, d) in [("t2p_hidden", self.t2p_hidden), ("prior_hidden", self.prior_hidden)] {
            if d % self.n_heads != 0 {
                return Err(cfg_err(format!("{k} {d} not divisible by n_heads {}", self.n_heads)));
            }
        }
        if !self.latent_dim.is_multiple_of(2) {
            return Err(cfg_err("latent_dim must be even (flow splits it in halves)"));
        }
        if self.decoder_channels.is_empty() || self.decoder_channels.len() != self.decoder_groups.len() {
            return Err(cfg_err(
                "decoder_channels and decoder_groups must be non-empty and equally long",
            ));
        }
        let last = *self.decoder_channels.last().unwrap();
        if last != 2 * self.n_bins() {
            return Err(cfg_err(format!(
                "last decoder channel count {last} must equal 2 * (fft_size / 2 + 1) = {}",
                2 * self.n_bins()
            )));
        }
        let mut c_in = self.latent_dim;
        for (&c_out, &g) in self.decoder_channels.iter().zip(&self.decoder_groups) {
            if g == 0 || !c_in.is_multiple_of(g) || c_out % g != 0 {
                return Err(cfg_err(format!(
                    "decoder stage {c_in}->{c_out} not divisible by {g} groups"
                )));
            }
            c_in = c_out;
        }
        let n = self.baseline_rates.len();
        if n == 0 || self.baseline_kernels.len() != n {
            return Err(cfg_err(
                "baseline_rates and baseline_kernels must be non-empty and equally long",
            ));
        }
        if self.baseline_rates.iter().product::<usize>() != self.hop_length {
            return Err(cfg_err("product of baseline_rates must equal hop_length"));
        }
        if !self.baseline_initial_channel.is_multiple_of(1 << n) {
            return Err(cfg_err("baseline_initial_channel must be divisible by 2^stages"));
        }
        if self.baseline_res_kernels.is_empty() || self.baseline_res_dilations.is_empty() {
            return Err(cfg_err("baseline residual kernels and dilations must be non-empty"));
        }
        if self.disc_resolutions.is_empty() || self.disc_channels.is_empty() || self.disc_channels.contains(&0) {
            return Err(cfg_err(
                "discriminators need at least one resolution and positive channels",
            ));
        }
        for r in &self.disc_resolutions {
            r.stft().validate()?;
        }
        if !(self.phonemes_per_second > 0.0 && self.phonemes_per_second.is_finite()) {
            return Err(cfg_err("phonemes_per_second must be > 0"));
        }
        Ok(())
    }

    /// Applies `key=value` assignments on top of `self`, then validates.
    pub fn with_overrides<'a>(&self, assignments: impl IntoIterator<Item = &'a str>) -> Result<Self> {
        let mut cfg = self.clone();
        for a in assignments {
            let (key, value) = a
                .split_once('=')
                .ok_or_else(|| cfg_err(format!("override {a:?} is not key=value")))?;
            cfg.set(key.trim(), value.trim()).map_err(cfg_err)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Serializes every key, in registry order.
    pub fn to_config_string(&self) -> String {
        let mut out = String::new();
        for key in KEYS {
            let _ = writeln!(out, "{key} = {}", self.get(key));
        }
        out
    }

    fn get(&self, key: &str) -> String {
        fn list(v: &[usize]) -> String {
            v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
        }
        match key {
            "sample_rate" => self.sample_rate.to_string(),
            "fft_size" => self.fft_size.to_string(),
            "hop_length" => self.hop_length.to_string(),
            "win_length" => self.win_length.to_string(),
            "n_mels" => self.n_mels.to_string(),
            "mel_fmin" => self.mel_fmin.to_string(),
            "mel_fmax" => self.mel_fmax.to_string(),
            "ppg_dim" => self.ppg_dim.to_string(),
            "attention_kind" => match self.attention_kind {
                AttentionKind::Linear => "linear".into(),
                AttentionKind::ScaledDot => "scaled_dot".into(),
            },
            "n_heads" => self.n_heads.to_string(),
            "ffn_kernel1" => self.ffn_kernel1.to_string(),
            "ffn_kernel2" => self.ffn_kernel2.to_string(),
            "vocab_size" => self.vocab_size.to_string(),
            "t2p_hidden" => self.t2p_hidden.to_string(),
            "t2p_filter" => self.t2p_filter.to_string(),
            "t2p_blocks" => self.t2p_blocks.to_string(),
            "dur_channels" => self.dur_channels.to_string(),
            "dur_kernel" => self.dur_kernel.to_string(),
            "dur_layers" => self.dur_layers.to_string(),
            "postnet_channels" => self.postnet_channels.to_string(),
            "postnet_kernel" => self.postnet_kernel.to_string(),
            "postnet_layers" => self.postnet_layers.to_string(),
            "n_speakers" => self.n_speakers.to_string(),
            "speaker_dim" => self.speaker_dim.to_string(),
            "latent_dim" => self.latent_dim.to_string(),
            "prior_hidden" => self.prior_hidden.to_string(),
            "prior_filter" => self.prior_filter.to_string(),
            "prior_blocks" => self.prior_blocks.to_string(),
            "posterior_hidden" => self.posterior_hidden.to_string(),
            "posterior_layers" => self.posterior_layers.to_string(),
            "posterior_kernel" => self.posterior_kernel.to_string(),
            "flow_couplings" => self.flow_couplings.to_string(),
            "flow_hidden" => self.flow_hidden.to_string(),
            "flow_wn_layers" => self.flow_wn_layers.to_string(),
            "flow_kernel" => self.flow_kernel.to_string(),
            "share_flow" => self.share_flow.to_string(),
            "fle_dim" => self.fle_dim.to_string(),
            "ppg_pred_channels" => self.ppg_pred_channels.to_string(),
            "ppg_pred_kernel" => self.ppg_pred_kernel.to_string(),
            "ppg_pred_layers" => self.ppg_pred_layers.to_string(),
            "decoder_kind" => match self.decoder_kind {
                DecoderKind::Istft => "istft".into(),
                DecoderKind::UpsamplingBaseline => "upsampling_baseline".into(),
            },
            "decoder_channels" => list(&self.decoder_channels),
            "decoder_groups" => list(&self.decoder_groups),
            "decoder_kernel" => self.decoder_kernel.to_string(),
            "decoder_res_blocks" => self.decoder_res_blocks.to_string(),
            "baseline_initial_channel" => self.baseline_initial_channel.to_string(),
            "baseline_rates" => list(&self.baseline_rates),
            "baseline_kernels" => list(&self.baseline_kernels),
            "baseline_res_kernels" => list(&self.baseline_res_kernels),
            "baseline_res_dilations" => list(&self.baseline_res_dilations),
            "disc_resolutions" => self
                .disc_resolutions
                .iter()
                .map(|r| format!("{}:{}:{}", r.fft_size, r.hop, r.win_length))
                .collect::<Vec<_>>()
                .join(","),
            "disc_channels" => list(&self.disc_channels),
            "disc_kernel" => self.disc_kernel.to_string(),
            "phonemes_per_second" => self.phonemes_per_second.to_string(),
            _ => unreachable!("unregistered key {key}"),
        }
    }

    fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        fn num<T: FromStr>(v: &str) -> std::result::Result<T, String> {
            v.parse().map_err(|_| format!("cannot parse {v:?} as a number"))
        }
        fn list(v: &str) -> std::result::Result<Vec<usize>, String> {
            v.split(',').map(|s| num(s.trim())).collect()
        }
        match key {
            "sample_rate" => self.sample_rate = num(value)?,
            "fft_size" => self.fft_size = num(value)?,
            "hop_length" => self.hop_length = num(value)?,
            "win_length" => self.win_length = num(value)?,
            "n_mels" => self.n_mels = num(value)?,
            "mel_fmin" => self.mel_fmin = num(value)?,
            "mel_fmax" => self.mel_fmax = num(value)?,
            "ppg_dim" => self.ppg_dim = num(value)?,
            "attention_kind" => {
                self.attention_kind = match value {
                    "linear" => AttentionKind::Linear,
                    "scaled_dot" => AttentionKind::ScaledDot,
                    _ => return Err(format!("attention_kind must be linear|scaled_dot, got {value:?}")),
                }
            }
            "n_heads" => self.n_heads = num(value)?,
            "ffn_kernel1" => self.ffn_kernel1 = num(value)?,
            "ffn_kernel2" => self.ffn_kernel2 = num(value)?,
            "vocab_size" => self.vocab_size = num(value)?,
            "t2p_hidden" => self.t2p_hidden = num(value)?,
            "t2p_filter" => self.t2p_filter = num(value)?,
            "t2p_blocks" => self.t2p_blocks = num(value)?,
            "dur_channels" => self.dur_channels = num(value)?,
            "dur_kernel" => self.dur_kernel = num(value)?,
            "dur_layers" => self.dur_layers = num(value)?,
            "postnet_channels" => self.postnet_channels = num(value)?,
            "postnet_kernel" => self.postnet_kernel = num(value)?,
            "postnet_layers" => self.postnet_layers = num(value)?,
            "n_speakers" => self.n_speakers = num(value)?,
            "speaker_dim" => self.speaker_dim = num(value)?,
            "latent_dim" => self.latent_dim = num(value)?,
            "prior_hidden" => self.prior_hidden = num(value)?,
            "prior_filter" => self.prior_filter = num(value)?,
            "prior_blocks" => self.prior_blocks = num(value)?,
            "posterior_hidden" => self.posterior_hidden = num(value)?,
            "posterior_layers" => self.posterior_layers = num(value)?,
            "posterior_kernel" => self.posterior_kernel = num(value)?,
            "flow_couplings" => self.flow_couplings = num(value)?,
            "flow_hidden" => self.flow_hidden = num(value)?,
            "flow_wn_layers" => self.flow_wn_layers = num(value)?,
            "flow_kernel" => self.flow_kernel = num(value)?,
            "share_flow" => {
                self.share_flow = match value {
                    "true" => true,
                    "false" => false,
                    _ => return Err(format!("share_flow must be true|false, got {value:?}")),
                }
            }
            "fle_dim" => self.fle_dim = num(value)?,
            "ppg_pred_channels" => self.ppg_pred_channels = num(value)?,
            "ppg_pred_kernel" => self.ppg_pred_kernel = num(value)?,
            "ppg_pred_layers" => self.ppg_pred_layers = num(value)?,
            "decoder_kind" => {
                self.decoder_kind = match value {
                    "istft" => DecoderKind::Istft,
                    "upsampling_baseline" => DecoderKind::UpsamplingBaseline,
                    _ => return Err(format!("decoder_kind must be istft|upsampling_baseline, got {value:?}")),
                }
            }
            "decoder_channels" => self.decoder_channels = list(value)?,
            "decoder_groups" => self.decoder_groups = list(value)?,
            "decoder_kernel" => self.decoder_kernel = num(value)?,
            "decoder_res_blocks" => self.decoder_res_blocks = num(value)?,
            "baseline_initial_channel" => self.baseline_initial_channel = num(value)?,
            "baseline_rates" => self.baseline_rates = list(value)?,
            "baseline_kernels" => self.baseline_kernels = list(value)?,
            "baseline_res_kernels" => self.baseline_res_kernels = list(value)?,
            "baseline_res_dilations" => self.baseline_res_dilations = list(value)?,
            "disc_resolutions" => {
                self.disc_resolutions = value
                    .split(',')
                    .map(|triple| {
                        let parts: Vec<&str> = triple.trim().split(':').collect();
                        match parts[..] {
                            [f, h, w] => Ok(DiscResolution {
                                fft_size: num(f)?,
                                hop: num(h)?,
                                win_length: num(w)?,
                            }),
                            _ => Err(format!("resolution {triple:?} is not fft:hop:win")),
                        }
                    })
                    .collect::<std::result::Result<_, String>>()?
            }
            "disc_channels" => self.disc_channels = list(value)?,
            "disc_kernel" => self.disc_kernel = num(value)?,
            "phonemes_per_second" => self.phonemes_per_second = num(value)?,
            _ => return Err(format!("unknown key {key:?}")),
        }
        Ok(())
    }
}

/// Registry of accepted keys, in serialization order.
pub const KEYS: &[&str] = &[
    "sample_rate",
    "fft_size",
    "hop_length",
    "win_length",
    "n_mels",
    "mel_fmin",
    "mel_fmax",
    "ppg_dim",
    "attention_kind",
    "n_heads",
    "ffn_kernel1",
    "ffn_kernel2",
    "vocab_size",
    "t2p_hidden",
    "t2p_filter",
    "t2p_blocks",
    "dur_channels",
    "dur_kernel",
    "dur_layers",
    "postnet_channels",
    "postnet_kernel",
    "postnet_layers",
    "n_speakers",
    "speaker_dim",
    "latent_dim",
    "prior_hidden",
    "prior_filter",
    "prior_blocks",
    "posterior_hidden",
    "posterior_layers",
    "posterior_kernel",
    "flow_couplings",
    "flow_hidden",
    "flow_wn_layers",
    "flow_kernel",
    "share_flow",
    "fle_dim",
    "ppg_pred_channels",
    "ppg_pred_kernel",
    "ppg_pred_layers",
    "decoder_kind",
    "decoder_channels",
    "decoder_groups",
    "decoder_kernel",
    "decoder_res_blocks",
    "baseline_initial_channel",
    "baseline_rates",
    "baseline_kernels",
    "baseline_res_kernels",
    "baseline_res_dilations",
    "disc_resolutions",
    "disc_channels",
    "disc_kernel",
    "phonemes_per_second",
];

impl FromStr for ModelConfig {
    type Err = Error;

    /// Parses config text on top of [`ModelConfig::default`] and validates it.
    fn from_str(text: &str) -> Result<Self> {
        let mut cfg = ModelConfig::default();
        let mut seen = std::collections::HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let parse_err = |message: String| Error::ConfigParse { line: i + 1, message };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| parse_err(format!("expected `key = value`, got {line:?}")))?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(parse_err(format!("key {key:?} set twice")));
            }
            cfg.set(key, value).map_err(parse_err)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_micro_validate() {
        ModelConfig::default().validate().unwrap();
        ModelConfig::micro().validate().unwrap();
    }

    #[test]
    fn round_trips_through_text() {
        for cfg in [ModelConfig::default(), ModelConfig::micro()] {
            let text = cfg.to_config_string();
            assert_eq!(text.parse::<ModelConfig>().unwrap(), cfg);
        }
    }

    #[test]
    fn parses_comments_and_overrides() {
        let cfg: ModelConfig = "# ablation\nshare_flow = false  # no FLE\n\nattention_kind = scaled_dot\n"
            .parse()
            .unwrap();
        assert!(!cfg.share_flow);
        assert_eq!(cfg.attention_kind, AttentionKind::ScaledDot);
        assert_eq!(cfg.fft_size, 1024);
    }

    #[test]
    fn overrides_apply_and_validate() {
        let cfg = ModelConfig::micro()
            .with_overrides(["share_flow=false", " flow_couplings = 3 "])
            .unwrap();
        assert!(!cfg.share_flow);
        assert_eq!(cfg.flow_couplings, 3);
        assert_eq!(cfg.ppg_dim, ModelConfig::micro().ppg_dim);
        assert!(ModelConfig::micro().with_overrides(["nope=1"]).is_err());
        assert!(ModelConfig::micro().with_overrides(["latent_dim=7"]).is_err());
    }

    #[test]
    fn unknown_key_is_rejected_with_line() {
        let err = "fft_size = 1024\nshare_flwo = true\n"
            .parse::<ModelConfig>()
            .unwrap_err();
        assert!(matches!(err, Error::ConfigParse { line: 2, .. }), "{err}");
    }

    #[test]
    fn inconsistent_decoder_is_rejected() {
        let err = "decoder_channels = 256,384,1024".parse::<ModelConfig>().unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        assert!("decoder_groups = 2,5,6".parse::<ModelConfig>().is_err());
    }

    #[test]
    fn duplicate_and_malformed_lines_fail() {
        assert!("n_heads = 2\nn_heads = 4".parse::<ModelConfig>().is_err());
        assert!("n_heads 2".parse::<ModelConfig>().is_err());
        assert!("n_heads = two".parse::<ModelConfig>().is_err());
        assert!("disc_resolutions = 512:128".parse::<ModelConfig>().is_err());
    }
}
