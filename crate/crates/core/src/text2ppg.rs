//! Phoneme ids to frame-level PPG.
//!
//! Embedding plus sinusoidal positions, feed-forward Transformer blocks,
//! duration prediction, length regulation, a residual convolutional post-net
//! and a projection to the PPG width. No speaker information enters here.

use crate::config::ModelConfig;
use crate::error::{invalid_arg, shape_err, Error, Result};
use crate::nn::{fft_block, LN_EPS};
use crate::numerics::ops::{linear, relu, tanh};
use crate::numerics::{conv1d, layer_norm, Conv1dSpec, Scalar, Tensor};
use crate::weights::{Registrar, WeightStore};

/// Upper bound on frames produced by a single token.
pub const MAX_TOKEN_FRAMES: usize = 1000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhonemeSequence {
    ids: Vec<usize>,
}

impl PhonemeSequence {
    pub fn new(ids: Vec<usize>, vocab_size: usize) -> Result<Self> {
        if ids.is_empty() {
            return Err(invalid_arg!("phoneme sequence is empty"));
        }
        if let Some(&bad) = ids.iter().find(|&&i| i >= vocab_size) {
            return Err(invalid_arg!("phoneme id {bad} outside vocabulary of {vocab_size}"));
        }
        Ok(Self { ids })
    }

    /// Ids stored as floats in a 1-D tensor; every value must be a
    /// non-negative integer.
    pub fn from_tensor(t: &Tensor, vocab_size: usize) -> Result<Self> {
        if t.ndim() != 1 {
            return Err(shape_err!("phoneme_ids must be 1-D, got {:?}", t.shape()));
        }
        let ids = t
            .data()
            .iter()
            .map(|&v| {
                if v.is_finite() && v >= 0.0 && v.fract() == 0.0 && v < u32::MAX as f32 {
                    Ok(v as usize)
                } else {
                    Err(invalid_arg!("phoneme id {v} is not a non-negative integer"))
                }
            })
            .collect::<Result<_>>()?;
        Self::new(ids, vocab_size)
    }

    pub fn ids(&self) -> &[usize] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn to_tensor(&self) -> Tensor {
        Tensor::new(vec![self.ids.len()], self.ids.iter().map(|&i| i as f32).collect()).expect("non-empty")
    }
}

/// Frame-level posteriorgram `[N, ppg_dim]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ppg<S = f32> {
    frames: Tensor<S>,
}

impl<S: Scalar> Ppg<S> {
    pub fn new(frames: Tensor<S>) -> Result<Self> {
        frames.dims2()?;
        Ok(Self {
            frames: frames.ensure_finite("ppg")?,
        })
    }

    pub fn frames(&self) -> &Tensor<S> {
        &self.frames
    }

    pub fn into_frames(self) -> Tensor<S> {
        self.frames
    }

    pub fn n_frames(&self) -> usize {
        self.frames.dim(0)
    }

    pub fn dim(&self) -> usize {
        self.frames.dim(1)
    }
}

pub(crate) fn register(r: &mut Registrar, cfg: &ModelConfig) {
    let d = cfg.t2p_hidden;
    r.table("text2ppg.embedding", cfg.vocab_size, d);
    for i in 0..cfg.t2p_blocks {
        r.fft_block(
            &format!("text2ppg.blocks.{i}"),
            d,
            cfg.t2p_filter,
            cfg.ffn_kernel1,
            cfg.ffn_kernel2,
        );
    }
    let mut c_in = d;
    for i in 0..cfg.dur_layers {
        r.conv1d(
            &format!("text2ppg.duration.conv{i}"),
            c_in,
            cfg.dur_channels,
            cfg.dur_kernel,
            1,
        );
        r.layer_norm(&format!("text2ppg.duration.norm{i}"), cfg.dur_channels);
        c_in = cfg.dur_channels;
    }
    r.linear("text2ppg.duration.proj", cfg.dur_channels, 1, true);
    for i in 0..cfg.postnet_layers {
        let c_in = if i == 0 { d } else { cfg.postnet_channels };
        let c_out = if i + 1 == cfg.postnet_layers {
            d
        } else {
            cfg.postnet_channels
        };
        r.conv1d(&format!("text2ppg.postnet.conv{i}"), c_in, c_out, cfg.postnet_kernel, 1);
    }
    r.linear("text2ppg.proj", d, cfg.ppg_dim, true);
}

/// Sinusoidal position table `[T, D]`: sine on even columns, cosine on odd.
pub fn positions<S: Scalar>(t: usize, d: usize) -> Tensor<S> {
    Tensor::from_fn(&[t, d], |e| {
        let (pos, c) = (e / d, e % d);
        let rate = 10000f64.powf((c - c % 2) as f64 / d as f64);
        let angle = pos as f64 / rate;
        S::from_f64(if c % 2 == 0 { angle.sin() } else { angle.cos() })
    })
}

/// Repeats row `i` of `h` `durations[i]` times.
pub fn length_regulate<S: Scalar>(h: &Tensor<S>, durations: &[usize]) -> Result<Tensor<S>> {
    let (t, d) = h.dims2()?;
    if durations.len() != t {
        return Err(shape_err!("{} durations for {t} tokens", durations.len()));
    }
    let n: usize = durations.iter().sum();
    if n == 0 {
        return Err(invalid_arg!("durations sum to zero"));
    }
    let mut out = Vec::with_capacity(n * d);
    for (i, &k) in durations.iter().enumerate() {
        for _ in 0..k {
            out.extend_from_slice(h.row(i));
        }
    }
    Tensor::new(vec![n, d], out)
}

/// Token encoder output `[T, D]`.
pub fn encode<S: Scalar>(seq: &PhonemeSequence, cfg: &ModelConfig, store: &WeightStore<S>) -> Result<Tensor<S>> {
    let d = cfg.t2p_hidden;
    let table = store.get("text2ppg.embedding")?;
    table.expect_shape(&[cfg.vocab_size, d])?;
    let mut rows = Vec::with_capacity(seq.len() * d);
    for &id in seq.ids() {
        if id >= cfg.vocab_size {
            return Err(invalid_arg!("phoneme id {id} outside vocabulary of {}", cfg.vocab_size));
        }
        rows.extend_from_slice(table.row(id));
    }
    let mut h = Tensor::new(vec![seq.len(), d], rows)?.add(&positions(seq.len(), d))?;
    for i in 0..cfg.t2p_blocks {
        let p = store.fft_block(&format!("text2ppg.blocks.{i}"), cfg.n_heads, cfg.attention_kind)?;
        h = fft_block(&h, &p, None)?;
    }
    Ok(h)
}

/// Per-token log durations `[T]` as regressed by the predictor.
pub fn log_durations<S: Scalar>(h: &Tensor<S>, cfg: &ModelConfig, store: &WeightStore<S>) -> Result<Vec<S>> {
    let mut x = h.t()?;
    for i in 0..cfg.dur_layers {
        let c = store.affine(&format!("text2ppg.duration.conv{i}"))?;
        let y = relu(&conv1d(&x, c.weight, Some(c.bias), Conv1dSpec::default())?);
        let n = store.affine(&format!("text2ppg.duration.norm{i}"))?;
        x = layer_norm(&y.t()?, n.weight, n.bias, LN_EPS)?.t()?;
    }
    let p = store.affine("text2ppg.duration.proj")?;
    Ok(linear(&x.t()?, p.weight, Some(p.bias))?.into_data())
}

/// `round_half_up(exp(log_duration))`, clamped to `1..=MAX_TOKEN_FRAMES`.
pub fn predict_durations<S: Scalar>(h: &Tensor<S>, cfg: &ModelConfig, store: &WeightStore<S>) -> Result<Vec<usize>> {
    log_durations(h, cfg, store)?
        .into_iter()
        .map(|v| {
            let v = v.value();
            if v.is_nan() {
                return Err(Error::NonFinite("duration predictor"));
            }
            let frames = (v.exp() + 0.5).floor();
            Ok(frames.clamp(1.0, MAX_TOKEN_FRAMES as f64) as usize)
        })
        .collect()
}

/// Full front end. Returns the PPG and the durations used.
pub fn text2ppg_forward<S: Scalar>(
    seq: &PhonemeSequence,
    cfg: &ModelConfig,
    store: &WeightStore<S>,
    durations_override: Option<&[usize]>,
) -> Result<(Ppg<S>, Vec<usize>)> {
    let h = encode(seq, cfg, store)?;
    let durations = match durations_override {
        Some(d) => d.to_vec(),
        None => predict_durations(&h, cfg, store)?,
    };
    let frames = length_regulate(&h, &durations)?;

    let mut x = frames.t()?;
    let residual = x.clone();
    for i in 0..cfg.postnet_layers {
        let c = store.affine(&format!("text2ppg.postnet.conv{i}"))?;
        x = conv1d(&x, c.weight, Some(c.bias), Conv1dSpec::default())?;
        if i + 1 < cfg.postnet_layers {
            x = tanh(&x);
        }
    }
    let refined = x.add(&residual)?.t()?;
    let p = store.affine("text2ppg.proj")?;
    let ppg = linear(&refined, p.weight, Some(p.bias))?.ensure_finite("text2ppg")?;
    Ok((Ppg::new(ppg)?, durations))
}
