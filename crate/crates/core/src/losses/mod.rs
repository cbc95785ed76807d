//! Training objectives evaluated forward-only.
//!
//! L1 terms are means over elements; adversarial and feature-matching terms
//! are summed over sub-discriminators. The GAN objective is least squares.

pub mod grad_check;

pub use grad_check::{directional_grad_check, GradCheck, LossId};

use serde::Serialize;

use crate::config::ModelConfig;
use crate::discriminators::{mcd_forward, msd_forward, DiscOutput};
use crate::dsp::{linear_spectrogram, mel_spectrogram, Waveform};
use crate::error::{invalid_arg, shape_err, Result};
use crate::numerics::{derive_seed, Rng, Scalar, Tensor};
use crate::ppg2wav::{
    decode, flow_forward, posterior_encode, ppg_predict, prior_encode, speaker_embedding, GaussianParams,
};
use crate::text2ppg::Ppg;
use crate::weights::WeightStore;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossWeights {
    pub recon: f64,
    pub ppg: f64,
    pub fm: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            recon: 45.0,
            ppg: 10.0,
            fm: 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossReport {
    pub l_ppg: f64,
    pub l_kl: f64,
    pub l_recon: f64,
    pub l_cvae: f64,
    pub l_adv_g: f64,
    pub l_adv_d: f64,
    pub l_fm: f64,
    pub l_g: f64,
    pub l_d: f64,
}

fn mean_abs_diff<S: Scalar>(a: &Tensor<S>, b: &Tensor<S>) -> Result<S> {
    if a.shape() != b.shape() {
        return Err(shape_err!("L1 operands {:?} vs {:?}", a.shape(), b.shape()));
    }
    let mut acc = S::Acc::zero();
    for (&x, &y) in a.data().iter().zip(b.data()) {
        acc += (x - y).abs().widen();
    }
    Ok(S::narrow(acc).scale(1.0 / a.len() as f64))
}

fn mean_sq_dist<S: Scalar>(t: &Tensor<S>, target: f64) -> S {
    let mut acc = S::Acc::zero();
    for &v in t.data() {
        let d = (v - S::from_f64(target)).widen();
        acc += d * d;
    }
    S::narrow(acc).scale(1.0 / t.len() as f64)
}

/// Mean `|ppg_hat - ppg|`.
pub fn ppg_loss<S: Scalar>(ppg_hat: &Ppg<S>, ppg: &Ppg<S>) -> Result<S> {
    mean_abs_diff(ppg_hat.frames(), ppg.frames())
}

/// Single-sample KL estimate `log q(z|y) - log p(f(z)) - log_det`, averaged
/// over elements:
/// `mean[ls_p - ls_q - ½((z - mu_q)/σ_q)² + ½((fz - mu_p)/σ_p)²] - log_det / n`.
pub fn kl_loss<S: Scalar>(
    post: &GaussianParams<S>,
    z: &Tensor<S>,
    fz: &Tensor<S>,
    log_det: S,
    prior: &GaussianParams<S>,
) -> Result<S> {
    let shape = post.mu.shape();
    for t in [&post.log_sigma, z, fz, &prior.mu, &prior.log_sigma] {
        if t.shape() != shape {
            return Err(shape_err!("kl operands disagree: {:?} vs {shape:?}", t.shape()));
        }
    }
    let n = post.mu.len();
    let half = S::from_f64(0.5);
    let mut acc = S::Acc::zero();
    for e in 0..n {
        let (mq, lq) = (post.mu.data()[e], post.log_sigma.data()[e]);
        let (mp, lp) = (prior.mu.data()[e], prior.log_sigma.data()[e]);
        let uq = (z.data()[e] - mq) * (-lq).exp();
        let up = (fz.data()[e] - mp) * (-lp).exp();
        acc += (lp - lq - half * uq * uq + half * up * up).widen();
    }
    Ok((S::narrow(acc) - log_det).scale(1.0 / n as f64))
}

/// Mean L1 between log-mel spectrograms; both waves are first trimmed to the
/// shorter length.
pub fn recon_loss<S: Scalar>(wave_hat: &Waveform<S>, wave_ref: &Waveform<S>, cfg: &ModelConfig) -> Result<S> {
    let len = wave_hat.len().min(wave_ref.len());
    if len == 0 {
        return Err(invalid_arg!("recon_loss needs two non-empty waveforms"));
    }
    let (stft, mel) = (cfg.stft(), cfg.mel());
    let a = mel_spectrogram(&wave_hat.samples()[..len], &stft, &mel)?;
    let b = mel_spectrogram(&wave_ref.samples()[..len], &stft, &mel)?;
    mean_abs_diff(&a, &b)
}

fn check_counts<S: Scalar>(real: &DiscOutput<S>, fake: &DiscOutput<S>) -> Result<()> {
    if real.scores.len() != fake.scores.len() || real.features.len() != fake.features.len() {
        return Err(shape_err!(
            "discriminator outputs disagree: {} vs {} sub-discriminators",
            real.scores.len(),
            fake.scores.len()
        ));
    }
    Ok(())
}

/// Least-squares adversarial terms `(L_adv_G, L_adv_D)`.
pub fn adv_losses<S: Scalar>(real: &DiscOutput<S>, fake: &DiscOutput<S>) -> Result<(S, S)> {
    check_counts(real, fake)?;
    let (mut g, mut d) = (S::zero(), S::zero());
    for (r, f) in real.scores.iter().zip(&fake.scores) {
        d += mean_sq_dist(r, 1.0) + mean_sq_dist(f, 0.0);
        g += mean_sq_dist(f, 1.0);
    }
    Ok((g, d))
}

/// Sum over sub-discriminators and layers of the mean L1 feature distance.
pub fn fm_loss<S: Scalar>(real: &DiscOutput<S>, fake: &DiscOutput<S>) -> Result<S> {
    check_counts(real, fake)?;
    let mut total = S::zero();
    for (rs, fs) in real.features.iter().zip(&fake.features) {
        if rs.len() != fs.len() {
            return Err(shape_err!("feature lists of {} vs {} layers", rs.len(), fs.len()));
        }
        for (r, f) in rs.iter().zip(fs) {
            total += mean_abs_diff(r, f)?;
        }
    }
    Ok(total)
}

/// Concatenates the sub-discriminator lists of several discriminators.
pub fn merge_outputs<S: Scalar>(parts: Vec<DiscOutput<S>>) -> DiscOutput<S> {
    let mut out = DiscOutput {
        scores: Vec::new(),
        features: Vec::new(),
    };
    for p in parts {
        out.scores.extend(p.scores);
        out.features.extend(p.features);
    }
    out
}

/// Raw loss terms before weighting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossTerms<S = f64> {
    pub kl: S,
    pub recon: S,
    pub ppg: S,
    pub adv_g: S,
    pub adv_d: S,
    pub fm: S,
}

pub fn total_losses(t: LossTerms<f64>, w: LossWeights) -> LossReport {
    let l_cvae = t.kl + w.recon * t.recon + w.ppg * t.ppg;
    let l_g = t.adv_g + w.fm * t.fm + l_cvae;
    LossReport {
        l_ppg: t.ppg,
        l_kl: t.kl,
        l_recon: t.recon,
        l_cvae,
        l_adv_g: t.adv_g,
        l_adv_d: t.adv_d,
        l_fm: t.fm,
        l_g,
        l_d: t.adv_d,
    }
}

/// One utterance for the training-path forward.
#[derive(Debug, Clone)]
pub struct TrainingExample<S = f32> {
    pub wave: Waveform<S>,
    pub ppg: Ppg<S>,
    pub speaker_id: usize,
}

impl<S: Scalar> TrainingExample<S> {
    pub fn cast<T: Scalar>(&self) -> Result<TrainingExample<T>> {
        Ok(TrainingExample {
            wave: self.wave.cast(),
            ppg: Ppg::new(self.ppg.frames().cast())?,
            speaker_id: self.speaker_id,
        })
    }
}

/// Which terms [`training_terms`] evaluates; skipped terms are zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TermMask {
    pub kl: bool,
    pub recon: bool,
    pub ppg: bool,
    pub adversarial: bool,
}

impl TermMask {
    pub const ALL: TermMask = TermMask {
        kl: true,
        recon: true,
        ppg: true,
        adversarial: true,
    };
}

/// Training-path forward: posterior sample, flow, prior, PPG prediction,
/// decoder, both discriminators.
///
/// The linear spectrogram and the PPG are cropped to their common frame
/// count. Posterior noise comes from `derive_seed(seed, "posterior")`.
pub fn training_terms<S: Scalar>(
    ex: &TrainingExample<S>,
    cfg: &ModelConfig,
    store: &WeightStore<S>,
    seed: u64,
    mask: TermMask,
) -> Result<LossTerms<S>> {
    let spec = linear_spectrogram(ex.wave.samples(), &cfg.stft())?;
    let n = spec.dim(1).min(ex.ppg.n_frames());
    let spec = spec.t()?.slice_rows(0, n)?.t()?;
    let ppg = Ppg::new(ex.ppg.frames().slice_rows(0, n)?)?;
    let speaker = speaker_embedding(store, ex.speaker_id)?;

    let mut rng = Rng::new(derive_seed(seed, "posterior"));
    let (z, post) = posterior_encode(&spec, cfg, store, Some(&mut rng))?;
    let mut terms = LossTerms {
        kl: S::zero(),
        recon: S::zero(),
        ppg: S::zero(),
        adv_g: S::zero(),
        adv_d: S::zero(),
        fm: S::zero(),
    };
    if mask.kl {
        let (fz, log_det) = flow_forward(&z, None, cfg, store)?;
        let prior = prior_encode(&ppg, &speaker, cfg, store)?;
        terms.kl = kl_loss(&post, &z, &fz, log_det, &prior)?;
    }
    if mask.ppg {
        terms.ppg = ppg_loss(&ppg_predict(&z, cfg, store)?, &ppg)?;
    }
    if mask.recon || mask.adversarial {
        let wave_hat = decode(&z, &speaker, cfg, store)?;
        let len = wave_hat.len().min(ex.wave.len());
        let wave_ref = Waveform::new(ex.wave.samples()[..len].to_vec());
        if mask.recon {
            terms.recon = recon_loss(&wave_hat, &wave_ref, cfg)?;
        }
        if mask.adversarial {
            let wave_hat = Waveform::new(wave_hat.samples()[..len].to_vec());
            let real = merge_outputs(vec![
                msd_forward(&wave_ref, cfg, store)?,
                mcd_forward(&wave_ref, cfg, store)?,
            ]);
            let fake = merge_outputs(vec![
                msd_forward(&wave_hat, cfg, store)?,
                mcd_forward(&wave_hat, cfg, store)?,
            ]);
            (terms.adv_g, terms.adv_d) = adv_losses(&real, &fake)?;
            terms.fm = fm_loss(&real, &fake)?;
        }
    }
    Ok(terms)
}

/// Every term plus the weighted composites.
pub fn evaluate_losses(ex: &TrainingExample, cfg: &ModelConfig, store: &WeightStore, seed: u64) -> Result<LossReport> {
    let t = training_terms(&ex.cast::<f64>()?, cfg, &store.cast::<f64>(), seed, TermMask::ALL)?;
    for v in [t.kl, t.recon, t.ppg, t.adv_g, t.adv_d, t.fm] {
        if !v.is_finite() {
            return Err(crate::Error::NonFinite("losses"));
        }
    }
    Ok(total_losses(t, LossWeights::default()))
}
