//! Analytic parameter and FLOP accounting.
//!
//! Parameter counts come from the tensor inventory. Compute is counted in
//! multiply-accumulates from layer shapes:
//!
//! * convolution: `C_out · C_in / groups · K · T_out` (2-D: `K_h · K_w · H_out · W_out`)
//! * dense layer: `T · in · out`
//! * scaled-dot attention core: `2 · T² · D`
//! * linear attention core: `2 · T · D² / heads + T · D`
//! * transposed convolution: `C_in · C_out · K · T_in`
//!
//! Normalization, activations and softmax exponentials are not counted. Every
//! (inverse) STFT adds `5 · F · log2 F` FLOPs per frame. Under the `mac2`
//! convention FLOPs are `2 · MACs + spectral`; under `mac1` they are
//! `MACs + spectral / 2`.
//!
//! The analysed utterance has `round(80 · seconds)` frames (12.5 ms hop) and
//! `round(phonemes_per_second · seconds)` phonemes.

use std::fmt;

use serde::Serialize;

use crate::config::{AttentionKind, DecoderKind, ModelConfig};
use crate::dsp::SAMPLE_RATE;
use crate::error::{invalid_arg, Result};
use crate::ppg2wav::decoder::BASELINE_OUTER_KERNEL;
use crate::weights::{inventory, Module};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    Inference,
    Training,
    All,
}

impl Scope {
    pub fn includes(self, m: Module) -> bool {
        match self {
            Scope::Inference => m.is_inference(),
            Scope::Training | Scope::All => true,
        }
    }
}

impl std::str::FromStr for Scope {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "inference" => Ok(Scope::Inference),
            "training" => Ok(Scope::Training),
            "all" => Ok(Scope::All),
            _ => Err(invalid_arg!("scope must be inference|training|all, got {s:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Convention {
    /// One MAC is two FLOPs.
    Mac2,
    /// One MAC is one FLOP.
    Mac1,
}

impl std::str::FromStr for Convention {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mac2" => Ok(Convention::Mac2),
            "mac1" => Ok(Convention::Mac1),
            _ => Err(invalid_arg!("convention must be mac2|mac1, got {s:?}")),
        }
    }
}

/// MACs of one module for one utterance.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ModuleMacs {
    pub macs: u64,
    /// Portion of `macs` spent inside attention cores (excludes projections).
    pub attention_macs: u64,
    /// FFT-based transform FLOPs, counted outside `macs`.
    pub spectral_flops: u64,
}

impl ModuleMacs {
    fn add(&mut self, macs: usize) {
        self.macs += macs as u64;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModuleReport {
    pub module: Module,
    pub params: u64,
    pub macs: u64,
    pub attention_macs: u64,
    pub spectral_flops: u64,
    pub flops: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComplexityReport {
    pub scope: Scope,
    pub convention: Convention,
    pub seconds: f64,
    pub phonemes: usize,
    pub frames: usize,
    pub decoder_kind: DecoderKind,
    pub attention_kind: AttentionKind,
    pub share_flow: bool,
    pub modules: Vec<ModuleReport>,
    pub total_params: u64,
    pub total_macs: u64,
    pub total_flops: f64,
    /// `total_flops / seconds / 1e9`.
    pub gflops_per_second: f64,
}

impl ComplexityReport {
    pub fn module(&self, m: Module) -> Option<&ModuleReport> {
        self.modules.iter().find(|r| r.module == m)
    }
}

fn conv(c_in: usize, c_out: usize, k: usize, groups: usize, t: usize) -> usize {
    c_out * (c_in / groups) * k * t
}

fn fft_block(cfg: &ModelConfig, d: usize, filter: usize, t: usize, m: &mut ModuleMacs) {
    m.add(4 * t * d * d);
    let core = match cfg.attention_kind {
        AttentionKind::ScaledDot => 2 * t * t * d,
        AttentionKind::Linear => 2 * t * d * d / cfg.n_heads + t * d,
    };
    m.add(core);
    m.attention_macs += core as u64;
    m.add(conv(d, filter, cfg.ffn_kernel1, 1, t));
    m.add(conv(filter, d, cfg.ffn_kernel2, 1, t));
}

fn wn_stack(h: usize, k: usize, layers: usize, t: usize, cond_dim: Option<usize>, m: &mut ModuleMacs) {
    if let Some(g) = cond_dim {
        m.add(g * 2 * h * layers);
    }
    for i in 0..layers {
        m.add(conv(h, 2 * h, k, 1, t));
        let out = if i + 1 < layers { 2 * h } else { h };
        m.add(conv(h, out, 1, 1, t));
    }
}

fn spectral_flops(fft_size: usize, frames: usize) -> u64 {
    let n = fft_size as f64;
    (5.0 * n * n.log2() * frames as f64).round() as u64
}

/// MACs for synthesizing `frames` frames from `phonemes` tokens (inference
/// modules) and for one training-path evaluation of each remaining module.
pub fn module_macs(cfg: &ModelConfig, module: Module, phonemes: usize, frames: usize) -> ModuleMacs {
    let mut m = ModuleMacs::default();
    let (t, n) = (phonemes, frames);
    match module {
        Module::Text2Ppg => {
            let d = cfg.t2p_hidden;
            for _ in 0..cfg.t2p_blocks {
                fft_block(cfg, d, cfg.t2p_filter, t, &mut m);
            }
            let mut c_in = d;
            for _ in 0..cfg.dur_layers {
                m.add(conv(c_in, cfg.dur_channels, cfg.dur_kernel, 1, t));
                c_in = cfg.dur_channels;
            }
            m.add(t * cfg.dur_channels);
            for i in 0..cfg.postnet_layers {
                let c_in = if i == 0 { d } else { cfg.postnet_channels };
                let c_out = if i + 1 == cfg.postnet_layers {
                    d
                } else {
                    cfg.postnet_channels
                };
                m.add(conv(c_in, c_out, cfg.postnet_kernel, 1, n));
            }
            m.add(n * d * cfg.ppg_dim);
        }
        Module::SpeakerTable => {}
        Module::PriorEncoder => {
            let h = cfg.prior_hidden;
            m.add(n * cfg.ppg_dim * h);
            m.add(cfg.speaker_dim * h);
            for _ in 0..cfg.prior_blocks {
                fft_block(cfg, h, cfg.prior_filter, n, &mut m);
            }
            m.add(n * h * 2 * cfg.latent_dim);
        }
        Module::Flow => {
            let (half, h) = (cfg.latent_dim / 2, cfg.flow_hidden);
            let cond = cfg.share_flow.then_some(cfg.fle_dim);
            for _ in 0..cfg.flow_couplings {
                m.add(conv(half, h, 1, 1, n));
                wn_stack(h, cfg.flow_kernel, cfg.flow_wn_layers, n, cond, &mut m);
                m.add(conv(h, half, 1, 1, n));
            }
        }
        Module::Decoder => {
            m.add(cfg.speaker_dim * cfg.latent_dim);
            match cfg.decoder_kind {
                DecoderKind::Istft => {
                    let mut c_in = cfg.latent_dim;
                    for (&c_out, &g) in cfg.decoder_channels.iter().zip(&cfg.decoder_groups) {
                        m.add(conv(c_in, c_out, cfg.decoder_kernel, g, n));
                        m.add(2 * cfg.decoder_res_blocks * conv(c_out, c_out, cfg.decoder_kernel, g, n));
                        c_in = c_out;
                    }
                    m.spectral_flops += spectral_flops(cfg.fft_size, n);
                }
                DecoderKind::UpsamplingBaseline => {
                    let mut ch = cfg.baseline_initial_channel;
                    let mut len = n;
                    m.add(conv(cfg.latent_dim, ch, BASELINE_OUTER_KERNEL, 1, len));
                    for (&rate, &k) in cfg.baseline_rates.iter().zip(&cfg.baseline_kernels) {
                        m.add(ch * (ch / 2) * k * len);
                        ch /= 2;
                        len *= rate;
                        for &rk in &cfg.baseline_res_kernels {
                            m.add(2 * cfg.baseline_res_dilations.len() * conv(ch, ch, rk, 1, len));
                        }
                    }
                    m.add(conv(ch, 1, BASELINE_OUTER_KERNEL, 1, len));
                }
            }
        }
        Module::PosteriorEncoder => {
            let h = cfg.posterior_hidden;
            m.add(conv(cfg.n_bins(), h, 1, 1, n));
            wn_stack(h, cfg.posterior_kernel, cfg.posterior_layers, n, None, &mut m);
            m.add(conv(h, 2 * cfg.latent_dim, 1, 1, n));
            m.spectral_flops += spectral_flops(cfg.fft_size, n);
        }
        Module::PpgPredictor => {
            let mut c_in = cfg.latent_dim;
            for _ in 0..cfg.ppg_pred_layers {
                m.add(conv(c_in, cfg.ppg_pred_channels, cfg.ppg_pred_kernel, 1, n));
                c_in = cfg.ppg_pred_channels;
            }
            m.add(n * cfg.ppg_pred_channels * cfg.ppg_dim);
        }
        Module::Msd | Module::Mcd => {
            let real_convs = if module == Module::Mcd { 4 } else { 1 };
            let samples = n * cfg.hop_length;
            for r in &cfg.disc_resolutions {
                if samples < r.fft_size {
                    continue;
                }
                let (mut h, mut w) = (r.fft_size / 2 + 1, 1 + (samples - r.fft_size) / r.hop);
                m.spectral_flops += spectral_flops(r.fft_size, w);
                let k = cfg.disc_kernel;
                let pad = k / 2;
                let last = cfg.disc_channels.len() - 1;
                let mut c_in = 1;
                for (l, &c_out) in cfg.disc_channels.iter().enumerate() {
                    let sw = if l == 0 || l == last { 1 } else { 2 };
                    h = h + 2 * pad - k + 1;
                    w = (w + 2 * pad - k) / sw + 1;
                    m.add(real_convs * c_out * c_in * k * k * h * w);
                    c_in = c_out;
                }
                m.add(real_convs * c_in * h * w);
            }
        }
    }
    m
}

/// Utterance size used for a duration: `(phonemes, frames)`.
pub fn utterance_size(cfg: &ModelConfig, seconds: f64) -> (usize, usize) {
    let frames_per_second = SAMPLE_RATE as f64 / cfg.hop_length as f64;
    let frames = (frames_per_second * seconds).round().max(1.0) as usize;
    let phonemes = (cfg.phonemes_per_second * seconds).round().max(1.0) as usize;
    (phonemes, frames)
}

/// Parameter count per module, straight from the inventory.
pub fn params_by_module(cfg: &ModelConfig) -> Result<Vec<(Module, u64)>> {
    let specs = inventory(cfg)?;
    Ok(Module::ALL
        .iter()
        .map(|&m| {
            (
                m,
                specs.iter().filter(|s| s.module == m).map(|s| s.numel() as u64).sum(),
            )
        })
        .collect())
}

/// Full report: params of every module in `scope` and the cost of
/// synthesizing `seconds` of audio.
pub fn count_flops(cfg: &ModelConfig, seconds: f64, scope: Scope, convention: Convention) -> Result<ComplexityReport> {
    if !(seconds > 0.0 && seconds.is_finite()) {
        return Err(invalid_arg!(
            "duration must be a positive number of seconds, got {seconds}"
        ));
    }
    let (phonemes, frames) = utterance_size(cfg, seconds);
    let mut modules = Vec::new();
    for (module, params) in params_by_module(cfg)? {
        if !scope.includes(module) {
            continue;
        }
        let c = module_macs(cfg, module, phonemes, frames);
        let flops = match convention {
            Convention::Mac2 => 2.0 * c.macs as f64 + c.spectral_flops as f64,
            Convention::Mac1 => c.macs as f64 + c.spectral_flops as f64 / 2.0,
        };
        modules.push(ModuleReport {
            module,
            params,
            macs: c.macs,
            attention_macs: c.attention_macs,
            spectral_flops: c.spectral_flops,
            flops,
        });
    }
    let total_params = modules.iter().map(|m| m.params).sum();
    let total_macs = modules.iter().map(|m| m.macs).sum();
    let total_flops: f64 = modules.iter().map(|m| m.flops).sum();
    Ok(ComplexityReport {
        scope,
        convention,
        seconds,
        phonemes,
        frames,
        decoder_kind: cfg.decoder_kind,
        attention_kind: cfg.attention_kind,
        share_flow: cfg.share_flow,
        modules,
        total_params,
        total_macs,
        total_flops,
        gflops_per_second: total_flops / seconds / 1e9,
    })
}

/// Parameter report (compute columns for a one-second utterance, `mac2`).
pub fn count_params(cfg: &ModelConfig, scope: Scope) -> Result<ComplexityReport> {
    count_flops(cfg, 1.0, scope, Convention::Mac2)
}

/// `(params of one flow coupling, params of the flow-indication table)`.
pub fn flow_sharing_terms(cfg: &ModelConfig) -> Result<(u64, u64)> {
    let shared = ModelConfig {
        share_flow: true,
        ..cfg.clone()
    };
    let specs = inventory(&shared)?;
    let coupling = specs
        .iter()
        .filter(|s| s.name.starts_with("flow.coupling0."))
        .map(|s| s.numel() as u64)
        .sum();
    let fle = specs
        .iter()
        .filter(|s| s.name == crate::ppg2wav::flow::FLE_TABLE)
        .map(|s| s.numel() as u64)
        .sum();
    Ok((coupling, fle))
}

impl fmt::Display for ComplexityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let unit = match self.convention {
            Convention::Mac2 => "mac2",
            Convention::Mac1 => "mac1",
        };
        writeln!(
            f,
            "scope {:?}, {} s ({} phonemes, {} frames), convention {unit}",
            self.scope, self.seconds, self.phonemes, self.frames
        )?;
        writeln!(f, "{:<18} {:>12} {:>14} {:>12}", "module", "params", "MACs", "GFLOPs")?;
        for m in &self.modules {
            writeln!(
                f,
                "{:<18} {:>12} {:>14} {:>12.4}",
                m.module.name(),
                m.params,
                m.macs,
                m.flops / 1e9
            )?;
        }
        writeln!(
            f,
            "{:<18} {:>12} {:>14} {:>12.4}",
            "total",
            self.total_params,
            self.total_macs,
            self.total_flops / 1e9
        )?;
        write!(
            f,
            "params {:.3} M, {:.4} GFLOPs per second of speech",
            self.total_params as f64 / 1e6,
            self.gflops_per_second
        )
    }
}
