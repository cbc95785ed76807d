//! Posterior encoder: linear spectrogram to `q(z | y)`.

use super::GaussianParams;
use crate::config::ModelConfig;
use crate::error::{shape_err, Result};
use crate::nn::wn_stack;
use crate::numerics::{conv1d, Conv1dSpec, Rng, Scalar, Tensor};
use crate::weights::{Registrar, WeightStore};

pub(crate) fn register(r: &mut Registrar, cfg: &ModelConfig) {
    let h = cfg.posterior_hidden;
    r.conv1d("posterior.pre", cfg.n_bins(), h, 1, 1);
    r.wn_stack("posterior.wn", h, cfg.posterior_kernel, cfg.posterior_layers, None);
    r.conv1d("posterior.proj", h, 2 * cfg.latent_dim, 1, 1);
}

/// Encodes `linspec: [bins, N]`. With `rng`, `z = mu + sigma · ε`; without,
/// `z = mu`.
pub fn posterior_encode<S: Scalar>(
    linspec: &Tensor<S>,
    cfg: &ModelConfig,
    store: &WeightStore<S>,
    rng: Option<&mut Rng>,
) -> Result<(Tensor<S>, GaussianParams<S>)> {
    let (bins, _) = linspec.dims2()?;
    if bins != cfg.n_bins() {
        return Err(shape_err!(
            "spectrogram has {bins} bins, config expects {}",
            cfg.n_bins()
        ));
    }
    let pre = store.affine("posterior.pre")?;
    let h = conv1d(linspec, pre.weight, Some(pre.bias), Conv1dSpec::default())?;
    let wn = store.wn_stack("posterior.wn", cfg.posterior_hidden, cfg.posterior_layers, false)?;
    let h = wn_stack(&h, None, &wn)?;
    let proj = store.affine("posterior.proj")?;
    let stats = conv1d(&h, proj.weight, Some(proj.bias), Conv1dSpec::default())?.t()?;
    let post = GaussianParams::from_stats(&stats)?;
    let z = match rng {
        Some(rng) => post.sample(1.0, rng),
        None => post.mu.clone(),
    };
    Ok((z.ensure_finite("posterior encoder")?, post))
}
