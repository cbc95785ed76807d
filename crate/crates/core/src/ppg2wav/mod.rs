//! PPG-conditioned CVAE: posterior and prior encoders, the weight-shared
//! flow, the PPG predictor, the iSTFT decoder, and end-to-end synthesis.
//!
//! Latents are `[N, latent_dim]` (frames by channels).

pub mod decoder;
pub mod flow;
pub mod posterior;
pub mod ppg_predictor;
pub mod prior;

pub use decoder::decode;
pub use flow::{flow_forward, flow_inverse, flow_layer};
pub use posterior::posterior_encode;
pub use ppg_predictor::ppg_predict;
pub use prior::prior_encode;

use crate::config::ModelConfig;
use crate::dsp::Waveform;
use crate::error::{invalid_arg, shape_err, Error, Result};
use crate::numerics::{derive_seed, Rng, Scalar, Tensor};
use crate::text2ppg::Ppg;
use crate::weights::{WeightStore, SPEAKER_TABLE};

/// Diagonal Gaussian over `[N, latent_dim]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianParams<S = f32> {
    pub mu: Tensor<S>,
    pub log_sigma: Tensor<S>,
}

impl<S: Scalar> GaussianParams<S> {
    /// Splits `[N, 2L]` into mean (first `L` columns) and log-scale.
    pub(crate) fn from_stats(stats: &Tensor<S>) -> Result<Self> {
        let (n, two_l) = stats.dims2()?;
        let l = two_l / 2;
        let mut mu = Vec::with_capacity(n * l);
        let mut ls = Vec::with_capacity(n * l);
        for r in 0..n {
            let row = stats.row(r);
            mu.extend_from_slice(&row[..l]);
            ls.extend_from_slice(&row[l..]);
        }
        Ok(Self {
            mu: Tensor::new(vec![n, l], mu)?,
            log_sigma: Tensor::new(vec![n, l], ls)?,
        })
    }

    /// `mu + scale · exp(log_sigma) · ε`, ε drawn row-major from `rng`.
    pub fn sample(&self, scale: f64, rng: &mut Rng) -> Tensor<S> {
        let mut out = self.mu.clone();
        for (z, &ls) in out.data_mut().iter_mut().zip(self.log_sigma.data()) {
            *z += ls.exp().scale(scale * rng.normal());
        }
        out
    }

    pub fn n_frames(&self) -> usize {
        self.mu.dim(0)
    }
}

/// Row `id` of the speaker table.
pub fn speaker_embedding<S: Scalar>(store: &WeightStore<S>, id: usize) -> Result<Tensor<S>> {
    let table = store.get(SPEAKER_TABLE)?;
    let (count, dim) = table.dims2()?;
    if id >= count {
        return Err(Error::UnknownSpeaker { id, count });
    }
    Tensor::new(vec![dim], table.row(id).to_vec())
}

pub(crate) fn check_latent<S: Scalar>(z: &Tensor<S>, cfg: &ModelConfig) -> Result<usize> {
    let (n, l) = z.dims2()?;
    if l != cfg.latent_dim {
        return Err(shape_err!("latent width {l}, config expects {}", cfg.latent_dim));
    }
    Ok(n)
}

/// Inference path: prior, temperature-scaled sample, inverse flow, decoder.
///
/// The noise stream is seeded with `derive_seed(seed, "synthesize")`; at
/// temperature 0 it is never drawn from.
pub fn synthesize<S: Scalar>(
    ppg: &Ppg<S>,
    speaker_id: usize,
    store: &WeightStore<S>,
    cfg: &ModelConfig,
    temperature: f64,
    seed: u64,
) -> Result<Waveform<S>> {
    if !(temperature >= 0.0 && temperature.is_finite()) {
        return Err(invalid_arg!("temperature must be finite and >= 0, got {temperature}"));
    }
    let speaker = speaker_embedding(store, speaker_id)?;
    let prior = prior_encode(ppg, &speaker, cfg, store)?;
    let z_p = if temperature == 0.0 {
        prior.mu.clone()
    } else {
        prior.sample(temperature, &mut Rng::new(derive_seed(seed, "synthesize")))
    };
    let z = flow_inverse(&z_p, None, cfg, store)?;
    decode(&z, &speaker, cfg, store)
}
