//! Prior encoder: PPG plus speaker embedding to `(mu, log_sigma)`.

use super::GaussianParams;
use crate::config::ModelConfig;
use crate::error::{shape_err, Result};
use crate::nn::fft_block;
use crate::numerics::ops::{add_row_bias, linear};
use crate::numerics::{Scalar, Tensor};
use crate::text2ppg::Ppg;
use crate::weights::{Registrar, WeightStore};

pub(crate) fn register(r: &mut Registrar, cfg: &ModelConfig) {
    let h = cfg.prior_hidden;
    r.linear("prior.pre", cfg.ppg_dim, h, true);
    r.linear("prior.speaker", cfg.speaker_dim, h, true);
    for i in 0..cfg.prior_blocks {
        r.fft_block(
            &format!("prior.blocks.{i}"),
            h,
            cfg.prior_filter,
            cfg.ffn_kernel1,
            cfg.ffn_kernel2,
        );
    }
    r.linear("prior.proj", h, 2 * cfg.latent_dim, true);
}

pub fn prior_encode<S: Scalar>(
    ppg: &Ppg<S>,
    speaker: &Tensor<S>,
    cfg: &ModelConfig,
    store: &WeightStore<S>,
) -> Result<GaussianParams<S>> {
    if ppg.dim() != cfg.ppg_dim {
        return Err(shape_err!("PPG width {}, config expects {}", ppg.dim(), cfg.ppg_dim));
    }
    if speaker.shape() != [cfg.speaker_dim] {
        return Err(shape_err!(
            "speaker vector {:?}, expected [{}]",
            speaker.shape(),
            cfg.speaker_dim
        ));
    }
    let pre = store.affine("prior.pre")?;
    let mut h = linear(ppg.frames(), pre.weight, Some(pre.bias))?;
    let sp = store.affine("prior.speaker")?;
    let s = linear(
        &speaker.clone().reshape(&[1, cfg.speaker_dim])?,
        sp.weight,
        Some(sp.bias),
    )?;
    add_row_bias(&mut h, s.data())?;
    for i in 0..cfg.prior_blocks {
        let p = store.fft_block(&format!("prior.blocks.{i}"), cfg.n_heads, cfg.attention_kind)?;
        h = fft_block(&h, &p, None)?;
    }
    let proj = store.affine("prior.proj")?;
    let stats = linear(&h, proj.weight, Some(proj.bias))?.ensure_finite("prior encoder")?;
    GaussianParams::from_stats(&stats)
}
