//! Grouped-convolution spectrum decoder followed by the inverse STFT.
//!
//! The upsampling baseline is registered here too so its parameters can be
//! counted, but it is never executed.

use super::check_latent;
use crate::config::{DecoderKind, ModelConfig};
use crate::dsp::{istft, ComplexSpectrum, Waveform};
use crate::error::{invalid_arg, shape_err, Result};
use crate::numerics::ops::{add_row_bias, leaky_relu, linear};
use crate::numerics::{conv1d, Conv1dSpec, Scalar, Tensor};
use crate::weights::{Registrar, WeightStore};

pub const LEAKY_SLOPE: f64 = 0.1;

/// Kernel of the baseline's input and output convolutions.
pub const BASELINE_OUTER_KERNEL: usize = 7;

pub(crate) fn register(r: &mut Registrar, cfg: &ModelConfig) {
    r.linear("decoder.speaker", cfg.speaker_dim, cfg.latent_dim, true);
    match cfg.decoder_kind {
        DecoderKind::Istft => {
            let mut c_in = cfg.latent_dim;
            for (s, (&c_out, &g)) in cfg.decoder_channels.iter().zip(&cfg.decoder_groups).enumerate() {
                r.conv1d(&format!("decoder.stage{s}.conv"), c_in, c_out, cfg.decoder_kernel, g);
                for b in 0..cfg.decoder_res_blocks {
                    for c in ["conv1", "conv2"] {
                        r.conv1d(
                            &format!("decoder.stage{s}.res{b}.{c}"),
                            c_out,
                            c_out,
                            cfg.decoder_kernel,
                            g,
                        );
                    }
                }
                c_in = c_out;
            }
        }
        DecoderKind::UpsamplingBaseline => {
            let mut ch = cfg.baseline_initial_channel;
            r.conv1d("decoder.pre", cfg.latent_dim, ch, BASELINE_OUTER_KERNEL, 1);
            for (i, &k) in cfg.baseline_kernels.iter().enumerate() {
                r.conv_transpose1d(&format!("decoder.up{i}"), ch, ch / 2, k);
                ch /= 2;
                for (j, &rk) in cfg.baseline_res_kernels.iter().enumerate() {
                    for m in 0..cfg.baseline_res_dilations.len() {
                        r.conv1d(&format!("decoder.up{i}.res{j}.convs1.{m}"), ch, ch, rk, 1);
                        r.conv1d(&format!("decoder.up{i}.res{j}.convs2.{m}"), ch, ch, rk, 1);
                    }
                }
            }
            r.conv1d("decoder.post", ch, 1, BASELINE_OUTER_KERNEL, 1);
        }
    }
}

/// Predicted complex spectrum for `z: [N, L]` and a speaker vector.
pub fn decode_spectrum<S: Scalar>(
    z: &Tensor<S>,
    speaker: &Tensor<S>,
    cfg: &ModelConfig,
    store: &WeightStore<S>,
) -> Result<ComplexSpectrum<S>> {
    if cfg.decoder_kind != DecoderKind::Istft {
        return Err(invalid_arg!("the upsampling baseline decoder is a cost model only"));
    }
    let n = check_latent(z, cfg)?;
    if speaker.shape() != [cfg.speaker_dim] {
        return Err(shape_err!(
            "speaker vector {:?}, expected [{}]",
            speaker.shape(),
            cfg.speaker_dim
        ));
    }
    let sp = store.affine("decoder.speaker")?;
    let s = linear(
        &speaker.clone().reshape(&[1, cfg.speaker_dim])?,
        sp.weight,
        Some(sp.bias),
    )?;
    let mut x = z.clone();
    add_row_bias(&mut x, s.data())?;
    let mut x = x.t()?;
    for (s, &g) in cfg.decoder_groups.iter().enumerate() {
        if s > 0 {
            x = leaky_relu(&x, LEAKY_SLOPE);
        }
        let spec = Conv1dSpec::grouped(g);
        let c = store.affine(&format!("decoder.stage{s}.conv"))?;
        x = conv1d(&x, c.weight, Some(c.bias), spec)?;
        for b in 0..cfg.decoder_res_blocks {
            let c1 = store.affine(&format!("decoder.stage{s}.res{b}.conv1"))?;
            let c2 = store.affine(&format!("decoder.stage{s}.res{b}.conv2"))?;
            let y = conv1d(&leaky_relu(&x, LEAKY_SLOPE), c1.weight, Some(c1.bias), spec)?;
            let y = conv1d(&leaky_relu(&y, LEAKY_SLOPE), c2.weight, Some(c2.bias), spec)?;
            x.add_assign(&y)?;
        }
    }
    let bins = cfg.n_bins();
    if x.dim(0) != 2 * bins {
        return Err(shape_err!("decoder emits {} channels, need {}", x.dim(0), 2 * bins));
    }
    let x = x.ensure_finite("decoder")?;
    ComplexSpectrum::new(x.slice_rows(0, bins)?, x.slice_rows(bins, 2 * bins)?, cfg.stft()).inspect(|spec| {
        debug_assert_eq!(spec.n_frames(), n);
    })
}

/// Waveform of exactly `N · hop` samples.
pub fn decode<S: Scalar>(
    z: &Tensor<S>,
    speaker: &Tensor<S>,
    cfg: &ModelConfig,
    store: &WeightStore<S>,
) -> Result<Waveform<S>> {
    let spec = decode_spectrum(z, speaker, cfg, store)?;
    let len = spec.n_frames() * cfg.hop_length;
    Ok(Waveform::new(istft(&spec, Some(len))?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{rng_fill, Distribution};
    use crate::weights::init_weights;

    fn z(cfg: &ModelConfig, n: usize) -> Tensor {
        rng_fill(&[n, cfg.latent_dim], 1, Distribution::Normal { mean: 0.0, std: 1.0 }).unwrap()
    }

    #[test]
    fn sample_count_and_speaker_effect() {
        let cfg = ModelConfig::micro();
        let store = init_weights(&cfg, 2).unwrap();
        let s1 = rng_fill(&[cfg.speaker_dim], 3, Distribution::Normal { mean: 0.0, std: 1.0 }).unwrap();
        let s2 = rng_fill(&[cfg.speaker_dim], 4, Distribution::Normal { mean: 0.0, std: 1.0 }).unwrap();
        for n in [1, 2, 7] {
            assert_eq!(
                decode(&z(&cfg, n), &s1, &cfg, &store).unwrap().len(),
                n * cfg.hop_length
            );
        }
        let a = decode(&z(&cfg, 6), &s1, &cfg, &store).unwrap();
        let b = decode(&z(&cfg, 6), &s2, &cfg, &store).unwrap();
        let dist: f64 = a
            .samples()
            .iter()
            .zip(b.samples())
            .map(|(x, y)| ((x - y) as f64).powi(2))
            .sum();
        assert!(dist > 0.0);
    }

    #[test]
    fn zero_network_gives_silence() {
        let cfg = ModelConfig::micro();
        let mut store = init_weights(&cfg, 2).unwrap();
        for (name, t) in store.iter_mut() {
            if name.starts_with("decoder.") {
                *t = t.map(|_| 0.0);
            }
        }
        let w = decode(&z(&cfg, 5), &Tensor::zeros(&[cfg.speaker_dim]), &cfg, &store).unwrap();
        assert!(w.samples().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn baseline_is_not_executable() {
        let cfg = ModelConfig {
            decoder_kind: DecoderKind::UpsamplingBaseline,
            ..ModelConfig::micro()
        };
        let store = init_weights(&cfg, 2).unwrap();
        assert!(decode(&z(&cfg, 2), &Tensor::zeros(&[cfg.speaker_dim]), &cfg, &store).is_err());
    }
}
