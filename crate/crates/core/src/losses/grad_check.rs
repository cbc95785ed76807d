//! Directional-derivative check of the loss pipeline: forward-mode dual
//! numbers against a central finite difference along a seeded unit
//! direction in weight space.

use serde::Serialize;

use super::{training_terms, TermMask, TrainingExample};
use crate::config::ModelConfig;
use crate::dsp::Waveform;
use crate::error::{invalid_arg, Error, Result};
use crate::numerics::{rng_fill, Distribution, Dual, Rng, Scalar, Tensor};
use crate::text2ppg::Ppg;
use crate::weights::WeightStore;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LossId {
    Recon,
    Kl,
    Ppg,
    Fm,
    /// `Σ w²` over every weight; exact reference for the machinery.
    Quadratic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GradCheck {
    pub ad: f64,
    pub fd: f64,
    pub rel_err: f64,
}

const NOISE_SEED: u64 = 0;

fn evaluate<S: Scalar>(loss: LossId, ex: &TrainingExample<S>, cfg: &ModelConfig, store: &WeightStore<S>) -> Result<S> {
    let only = |kl, recon, ppg, adversarial| TermMask {
        kl,
        recon,
        ppg,
        adversarial,
    };
    let terms = match loss {
        LossId::Quadratic => {
            let mut acc = S::Acc::zero();
            for (_, t) in store.iter() {
                for &w in t.data() {
                    acc += (w * w).widen();
                }
            }
            return Ok(S::narrow(acc));
        }
        LossId::Recon => training_terms(ex, cfg, store, NOISE_SEED, only(false, true, false, false))?,
        LossId::Kl => training_terms(ex, cfg, store, NOISE_SEED, only(true, false, false, false))?,
        LossId::Ppg => training_terms(ex, cfg, store, NOISE_SEED, only(false, false, true, false))?,
        LossId::Fm => training_terms(ex, cfg, store, NOISE_SEED, only(false, false, false, true))?,
    };
    Ok(match loss {
        LossId::Recon => terms.recon,
        LossId::Kl => terms.kl,
        LossId::Ppg => terms.ppg,
        LossId::Fm => terms.fm,
        LossId::Quadratic => unreachable!(),
    })
}

/// Unit-norm direction with one standard-normal draw per weight, in store order.
pub fn random_direction<S: Scalar>(store: &WeightStore<S>, seed: u64) -> WeightStore<f64> {
    let mut rng = Rng::new(seed);
    let mut dir = store.map(|_, t| Tensor::<f64>::from_fn(t.shape(), |_| rng.normal()));
    let norm = dir
        .iter()
        .flat_map(|(_, t)| t.data())
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt();
    for (_, t) in dir.iter_mut() {
        t.data_mut().iter_mut().for_each(|v| *v /= norm);
    }
    dir
}

fn shifted(store: &WeightStore<f64>, dir: &WeightStore<f64>, step: f64) -> Result<WeightStore<f64>> {
    let mut out = store.clone();
    for ((_, t), (_, d)) in out.iter_mut().zip(dir.iter()) {
        for (w, &dv) in t.data_mut().iter_mut().zip(d.data()) {
            *w += step * dv;
        }
    }
    Ok(out)
}

/// Compares the forward-mode derivative of `loss` along a seeded random unit
/// direction with the central difference `(L(w + εd) - L(w - εd)) / 2ε`.
pub fn directional_grad_check(
    loss: LossId,
    store: &WeightStore,
    cfg: &ModelConfig,
    ex: &TrainingExample,
    direction_seed: u64,
    eps: f64,
) -> Result<GradCheck> {
    if !(1e-5..=1e-2).contains(&eps) {
        return Err(invalid_arg!("eps must lie in [1e-5, 1e-2], got {eps}"));
    }
    let base = store.cast::<f64>();
    let dir = random_direction(store, direction_seed);

    let mut tangents = dir.iter().map(|(_, t)| t.data().to_vec());
    let dual_store = base.map(|_, t| {
        let tan = tangents.next().expect("same layout");
        Tensor::new(
            t.shape().to_vec(),
            t.data().iter().zip(&tan).map(|(&v, &d)| Dual::new(v, d)).collect(),
        )
        .expect("same shape")
    });
    let ad = evaluate(loss, &ex.cast::<Dual>()?, cfg, &dual_store)?.tangent;

    let ex64 = ex.cast::<f64>()?;
    let plus = evaluate(loss, &ex64, cfg, &shifted(&base, &dir, eps)?)?;
    let minus = evaluate(loss, &ex64, cfg, &shifted(&base, &dir, -eps)?)?;
    if !(plus.is_finite() && minus.is_finite() && ad.is_finite()) {
        return Err(Error::NonFinite("grad check"));
    }
    let fd = (plus - minus) / (2.0 * eps);
    let rel_err = (ad - fd).abs() / ad.abs().max(fd.abs()).max(1e-12);
    Ok(GradCheck { ad, fd, rel_err })
}

/// Seeded utterance of `frames` frames: uniform noise waveform, normal PPG.
pub fn synthetic_example(cfg: &ModelConfig, frames: usize, speaker_id: usize, seed: u64) -> Result<TrainingExample> {
    let wave = rng_fill(
        &[frames * cfg.hop_length],
        seed,
        Distribution::Uniform { lo: -0.5, hi: 0.5 },
    )?;
    let ppg = rng_fill(
        &[frames, cfg.ppg_dim],
        seed.wrapping_add(1),
        Distribution::Normal { mean: 0.0, std: 1.0 },
    )?;
    Ok(TrainingExample {
        wave: Waveform::new(wave.into_data()),
        ppg: Ppg::new(ppg)?,
        speaker_id,
    })
}
