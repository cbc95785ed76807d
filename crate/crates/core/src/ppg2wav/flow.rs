//! Mean-only coupling flow with optional weight sharing.
//!
//! Layer `k` splits the channels in halves, shifts the second half by a
//! WaveNet prediction from the first, then reverses the channel order. With
//! `share_flow` every layer uses coupling 0 and is told apart by row `k` of
//! the flow-indication table fed in as global conditioning; without it each
//! layer owns its coupling and receives no conditioning. Shifts have unit
//! Jacobian, so the log-determinant is exactly 0.

use super::check_latent;
use crate::config::ModelConfig;
use crate::error::{invalid_arg, Result};
use crate::nn::wn_stack;
use crate::numerics::{conv1d, Conv1dSpec, Scalar, Tensor};
use crate::weights::{Registrar, WeightStore};

pub const FLE_TABLE: &str = "flow.fle";

pub(crate) fn coupling_prefix(cfg: &ModelConfig, layer: usize) -> String {
    format!("flow.coupling{}", if cfg.share_flow { 0 } else { layer })
}

pub(crate) fn register_coupling(r: &mut Registrar, cfg: &ModelConfig, prefix: &str) {
    let half = cfg.latent_dim / 2;
    r.conv1d(&format!("{prefix}.pre"), half, cfg.flow_hidden, 1, 1);
    r.wn_stack(
        &format!("{prefix}.wn"),
        cfg.flow_hidden,
        cfg.flow_kernel,
        cfg.flow_wn_layers,
        Some(cfg.fle_dim),
    );
    r.conv1d(&format!("{prefix}.post"), cfg.flow_hidden, half, 1, 1);
}

pub(crate) fn register(r: &mut Registrar, cfg: &ModelConfig) {
    let owned = if cfg.share_flow { 1 } else { cfg.flow_couplings };
    for c in 0..owned {
        register_coupling(r, cfg, &format!("flow.coupling{c}"));
    }
    if cfg.share_flow {
        r.table(FLE_TABLE, cfg.flow_couplings, cfg.fle_dim);
    }
}

/// Shift predicted from the first half, `[half, N]`.
fn shift<S: Scalar>(x0: &Tensor<S>, layer: usize, cfg: &ModelConfig, store: &WeightStore<S>) -> Result<Tensor<S>> {
    let prefix = coupling_prefix(cfg, layer);
    let pre = store.affine(&format!("{prefix}.pre"))?;
    let h = conv1d(x0, pre.weight, Some(pre.bias), Conv1dSpec::default())?;
    let wn = store.wn_stack(&format!("{prefix}.wn"), cfg.flow_hidden, cfg.flow_wn_layers, true)?;
    let fle = if cfg.share_flow {
        let table = store.get(FLE_TABLE)?;
        Some(Tensor::new(vec![cfg.fle_dim], table.row(layer).to_vec())?)
    } else {
        None
    };
    let h = wn_stack(&h, fle.as_ref(), &wn)?;
    let post = store.affine(&format!("{prefix}.post"))?;
    conv1d(&h, post.weight, Some(post.bias), Conv1dSpec::default())
}

fn halves<S: Scalar>(x: &Tensor<S>) -> Result<(Tensor<S>, Tensor<S>)> {
    let c = x.dim(0);
    Ok((x.slice_rows(0, c / 2)?, x.slice_rows(c / 2, c)?))
}

fn flip<S: Scalar>(x: &Tensor<S>) -> Tensor<S> {
    let (c, n) = (x.dim(0), x.dim(1));
    Tensor::from_fn(&[c, n], |e| x.data()[(c - 1 - e / n) * n + e % n])
}

fn coupling<S: Scalar>(
    x: &Tensor<S>,
    layer: usize,
    cfg: &ModelConfig,
    store: &WeightStore<S>,
    sign: f64,
) -> Result<Tensor<S>> {
    let (x0, mut x1) = halves(x)?;
    let m = shift(&x0, layer, cfg, store)?;
    for (a, &b) in x1.data_mut().iter_mut().zip(m.data()) {
        *a += b.scale(sign);
    }
    Tensor::concat_rows(&[&x0, &x1])
}

fn check_layers<S: Scalar>(g: Option<&Tensor<S>>, cfg: &ModelConfig, store: &WeightStore<S>) -> Result<()> {
    if g.is_some() {
        return Err(invalid_arg!("the flow takes no speaker conditioning"));
    }
    if cfg.share_flow {
        store.get(FLE_TABLE)?.expect_shape(&[cfg.flow_couplings, cfg.fle_dim])?;
    }
    Ok(())
}

/// Coupling `layer` alone (no channel reversal) applied to `z: [N, L]`.
pub fn flow_layer<S: Scalar>(
    z: &Tensor<S>,
    layer: usize,
    cfg: &ModelConfig,
    store: &WeightStore<S>,
) -> Result<Tensor<S>> {
    check_latent(z, cfg)?;
    if layer >= cfg.flow_couplings {
        return Err(invalid_arg!("flow layer {layer} of {}", cfg.flow_couplings));
    }
    coupling(&z.t()?, layer, cfg, store, 1.0)?.t()
}

/// `z → f(z)`; returns the transformed latent and its log-determinant (0).
pub fn flow_forward<S: Scalar>(
    z: &Tensor<S>,
    g: Option<&Tensor<S>>,
    cfg: &ModelConfig,
    store: &WeightStore<S>,
) -> Result<(Tensor<S>, S)> {
    check_latent(z, cfg)?;
    check_layers(g, cfg, store)?;
    let mut x = z.t()?;
    for k in 0..cfg.flow_couplings {
        x = flip(&coupling(&x, k, cfg, store, 1.0)?);
    }
    Ok((x.t()?.ensure_finite("flow")?, S::zero()))
}

pub fn flow_inverse<S: Scalar>(
    fz: &Tensor<S>,
    g: Option<&Tensor<S>>,
    cfg: &ModelConfig,
    store: &WeightStore<S>,
) -> Result<Tensor<S>> {
    check_latent(fz, cfg)?;
    check_layers(g, cfg, store)?;
    let mut x = fz.t()?;
    for k in (0..cfg.flow_couplings).rev() {
        x = coupling(&flip(&x), k, cfg, store, -1.0)?;
    }
    x.t()?.ensure_finite("inverse flow")
}
