//! Multi-resolution spectral discriminators, forward only.
//!
//! Each sub-discriminator sees one STFT resolution (no centring) laid out as
//! a `[channels, bins, frames]` image. Layer 0 keeps the resolution, the
//! middle layers halve the frame axis, the last listed layer keeps it, and a
//! 1x1 convolution produces the score map. The magnitude variant works on
//! `|X|`; the complex variant runs complex convolutions on `(Re X, Im X)`
//! and scores with the modulus of its final map.

use crate::config::ModelConfig;
use crate::dsp::stft::magnitude;
use crate::dsp::{stft, Waveform};
use crate::error::{invalid_arg, Result};
use crate::nn::complex_conv2d;
use crate::numerics::ops::leaky_relu;
use crate::numerics::{conv2d, Conv2dSpec, Scalar, Tensor};
use crate::weights::{Registrar, WeightStore};

pub const LEAKY_SLOPE: f64 = 0.2;

#[derive(Debug, Clone, PartialEq)]
pub struct DiscOutput<S = f32> {
    /// One `[bins', frames']` map per sub-discriminator.
    pub scores: Vec<Tensor<S>>,
    /// Per sub-discriminator, every layer output (score layer last).
    pub features: Vec<Vec<Tensor<S>>>,
}

impl<S: Scalar> DiscOutput<S> {
    pub fn n_features(&self) -> usize {
        self.features.iter().map(Vec::len).sum()
    }
}

fn layer_spec(cfg: &ModelConfig, layer: usize) -> Conv2dSpec {
    let pad = cfg.disc_kernel / 2;
    let last = cfg.disc_channels.len() - 1;
    let stride = if layer == 0 || layer == last { (1, 1) } else { (1, 2) };
    Conv2dSpec {
        stride,
        padding: (pad, pad),
    }
}

const SCORE_SPEC: Conv2dSpec = Conv2dSpec {
    stride: (1, 1),
    padding: (0, 0),
};

fn register_stack(r: &mut Registrar, cfg: &ModelConfig, name: &str, complex: bool) {
    for res in 0..cfg.disc_resolutions.len() {
        let mut c_in = 1;
        for (l, &c_out) in cfg.disc_channels.iter().enumerate() {
            let prefix = format!("{name}.{res}.conv{l}");
            if complex {
                r.complex_conv2d(&prefix, c_in, c_out, cfg.disc_kernel);
            } else {
                r.conv2d(&prefix, c_in, c_out, cfg.disc_kernel);
            }
            c_in = c_out;
        }
        let prefix = format!("{name}.{res}.score");
        if complex {
            r.complex_conv2d(&prefix, c_in, 1, 1);
        } else {
            r.conv2d(&prefix, c_in, 1, 1);
        }
    }
}

pub(crate) fn register_msd(r: &mut Registrar, cfg: &ModelConfig) {
    register_stack(r, cfg, "msd", false);
}

pub(crate) fn register_mcd(r: &mut Registrar, cfg: &ModelConfig) {
    register_stack(r, cfg, "mcd", true);
}

fn check_length(len: usize, cfg: &ModelConfig) -> Result<()> {
    let need = cfg.disc_resolutions.iter().map(|r| r.fft_size).max().unwrap_or(0);
    if len < need {
        return Err(invalid_arg!(
            "waveform of {len} samples is shorter than the largest window {need}"
        ));
    }
    Ok(())
}

fn as_image<S: Scalar>(t: Tensor<S>) -> Result<Tensor<S>> {
    let (h, w) = t.dims2()?;
    t.reshape(&[1, h, w])
}

fn squeeze<S: Scalar>(t: &Tensor<S>) -> Result<Tensor<S>> {
    let (_, h, w) = t.dims3()?;
    t.clone().reshape(&[h, w])
}

pub fn msd_forward<S: Scalar>(wave: &Waveform<S>, cfg: &ModelConfig, store: &WeightStore<S>) -> Result<DiscOutput<S>> {
    check_length(wave.len(), cfg)?;
    let mut out = DiscOutput {
        scores: Vec::new(),
        features: Vec::new(),
    };
    for (res, resolution) in cfg.disc_resolutions.iter().enumerate() {
        let spec = stft(wave.samples(), &resolution.stft())?;
        let mut x = as_image(spec.magnitude())?;
        let mut feats = Vec::with_capacity(cfg.disc_layers());
        for l in 0..cfg.disc_channels.len() {
            let c = store.affine(&format!("msd.{res}.conv{l}"))?;
            x = leaky_relu(&conv2d(&x, c.weight, Some(c.bias), layer_spec(cfg, l))?, LEAKY_SLOPE);
            feats.push(x.clone());
        }
        let c = store.affine(&format!("msd.{res}.score"))?;
        let score = conv2d(&x, c.weight, Some(c.bias), SCORE_SPEC)?;
        out.scores.push(squeeze(&score)?.ensure_finite("msd")?);
        feats.push(score);
        out.features.push(feats);
    }
    Ok(out)
}

fn stack_parts<S: Scalar>(re: &Tensor<S>, im: &Tensor<S>) -> Result<Tensor<S>> {
    let (c, h, w) = re.dims3()?;
    let mut data = re.data().to_vec();
    data.extend_from_slice(im.data());
    Tensor::new(vec![2 * c, h, w], data)
}

pub fn mcd_forward<S: Scalar>(wave: &Waveform<S>, cfg: &ModelConfig, store: &WeightStore<S>) -> Result<DiscOutput<S>> {
    check_length(wave.len(), cfg)?;
    let mut out = DiscOutput {
        scores: Vec::new(),
        features: Vec::new(),
    };
    for (res, resolution) in cfg.disc_resolutions.iter().enumerate() {
        let spec = stft(wave.samples(), &resolution.stft())?;
        let mut re = as_image(spec.real)?;
        let mut im = as_image(spec.imag)?;
        let mut feats = Vec::with_capacity(cfg.disc_layers());
        for l in 0..cfg.disc_channels.len() {
            let k = store.complex_kernel(&format!("mcd.{res}.conv{l}"))?;
            let (r, i) = complex_conv2d(&re, &im, &k, layer_spec(cfg, l))?;
            re = leaky_relu(&r, LEAKY_SLOPE);
            im = leaky_relu(&i, LEAKY_SLOPE);
            feats.push(stack_parts(&re, &im)?);
        }
        let k = store.complex_kernel(&format!("mcd.{res}.score"))?;
        let (r, i) = complex_conv2d(&re, &im, &k, SCORE_SPEC)?;
        let modulus = r.zip_map(&i, magnitude)?;
        out.scores.push(squeeze(&modulus)?.ensure_finite("mcd")?);
        feats.push(stack_parts(&r, &i)?);
        out.features.push(feats);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{rng_fill, Distribution};
    use crate::weights::init_weights;

    fn noise(n: usize, seed: u64) -> Waveform {
        Waveform::new(
            rng_fill(&[n], seed, Distribution::Uniform { lo: -0.5, hi: 0.5 })
                .unwrap()
                .into_data(),
        )
    }

    fn max_score_diff(a: &DiscOutput, b: &DiscOutput) -> f64 {
        a.scores
            .iter()
            .zip(&b.scores)
            .map(|(x, y)| x.max_abs_diff(y))
            .fold(0.0, f64::max)
    }

    #[test]
    fn structure_and_zero_input() {
        let cfg = ModelConfig::micro();
        let store = init_weights(&cfg, 1).unwrap();
        for f in [msd_forward::<f32>, mcd_forward::<f32>] {
            let a = f(&Waveform::zeros(400), &cfg, &store).unwrap();
            assert_eq!(a.scores.len(), cfg.disc_resolutions.len());
            assert_eq!(a.n_features(), cfg.disc_resolutions.len() * cfg.disc_layers());
            assert!(a.scores.iter().all(|s| s.all_finite()));
            assert_eq!(a, f(&Waveform::zeros(400), &cfg, &store).unwrap());
            let b = f(&noise(400, 2), &cfg, &store).unwrap();
            for (fa, fb) in a.features.iter().flatten().zip(b.features.iter().flatten()) {
                assert_eq!(fa.shape(), fb.shape());
            }
        }
    }

    #[test]
    fn one_sample_change_is_seen() {
        let cfg = ModelConfig::micro();
        let store = init_weights(&cfg, 1).unwrap();
        let a = noise(300, 3);
        let mut s = a.clone().into_samples();
        s[150] += 0.25;
        let b = Waveform::new(s);
        assert!(
            max_score_diff(
                &msd_forward(&a, &cfg, &store).unwrap(),
                &msd_forward(&b, &cfg, &store).unwrap()
            ) > 0.0
        );
        assert!(
            max_score_diff(
                &mcd_forward(&a, &cfg, &store).unwrap(),
                &mcd_forward(&b, &cfg, &store).unwrap()
            ) > 0.0
        );
    }

    #[test]
    fn short_input_rejected() {
        let cfg = ModelConfig::micro();
        let store = init_weights(&cfg, 1).unwrap();
        assert!(msd_forward(&Waveform::zeros(100), &cfg, &store).is_err());
        assert!(mcd_forward(&Waveform::zeros(100), &cfg, &store).is_err());
    }

    #[test]
    fn real_kernels_on_real_part_match_a_real_stack() {
        let cfg = ModelConfig::micro();
        let mut store = init_weights(&cfg, 4).unwrap();
        for (name, t) in store.iter_mut() {
            if name.starts_with("mcd.") && name.contains("_im") {
                *t = t.map(|_| 0.0);
            }
        }
        let wave = noise(256, 5);
        let out = mcd_forward(&wave, &cfg, &store).unwrap();
        for (res, r) in cfg.disc_resolutions.iter().enumerate() {
            let mut x = as_image(stft(wave.samples(), &r.stft()).unwrap().real).unwrap();
            for l in 0..cfg.disc_channels.len() {
                let w = store.get(&format!("mcd.{res}.conv{l}.weight_re")).unwrap();
                let b = store.get(&format!("mcd.{res}.conv{l}.bias_re")).unwrap();
                x = leaky_relu(&conv2d(&x, w, Some(b), layer_spec(&cfg, l)).unwrap(), LEAKY_SLOPE);
                let got = &out.features[res][l];
                let c = x.dim(0);
                let real_half =
                    Tensor::new(x.shape().to_vec(), got.data()[..c * x.dim(1) * x.dim(2)].to_vec()).unwrap();
                assert!(real_half.max_abs_diff(&x) < 1e-6);
            }
        }
    }
}
