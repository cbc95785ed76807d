//! Frame-level PPG prediction from the latent.

use super::check_latent;
use crate::config::ModelConfig;
use crate::error::Result;
use crate::numerics::ops::{linear, relu};
use crate::numerics::{conv1d, Conv1dSpec, Scalar, Tensor};
use crate::text2ppg::Ppg;
use crate::weights::{Registrar, WeightStore};

pub(crate) fn register(r: &mut Registrar, cfg: &ModelConfig) {
    let mut c_in = cfg.latent_dim;
    for i in 0..cfg.ppg_pred_layers {
        r.conv1d(
            &format!("ppg_predictor.conv{i}"),
            c_in,
            cfg.ppg_pred_channels,
            cfg.ppg_pred_kernel,
            1,
        );
        c_in = cfg.ppg_pred_channels;
    }
    r.linear("ppg_predictor.proj", cfg.ppg_pred_channels, cfg.ppg_dim, true);
}

pub fn ppg_predict<S: Scalar>(z: &Tensor<S>, cfg: &ModelConfig, store: &WeightStore<S>) -> Result<Ppg<S>> {
    check_latent(z, cfg)?;
    let mut x = z.t()?;
    for i in 0..cfg.ppg_pred_layers {
        let c = store.affine(&format!("ppg_predictor.conv{i}"))?;
        x = relu(&conv1d(&x, c.weight, Some(c.bias), Conv1dSpec::default())?);
    }
    let p = store.affine("ppg_predictor.proj")?;
    Ppg::new(linear(&x.t()?, p.weight, Some(p.bias))?)
}
