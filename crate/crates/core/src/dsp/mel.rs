use serde::Serialize;

use super::stft::{linear_spectrogram, StftConfig, SAMPLE_RATE};
use crate::error::{invalid_arg, Result};
use crate::numerics::{Scalar, Tensor};

/// Floor applied to mel energies before the natural log.
pub const LOG_FLOOR: f64 = 1e-5;

/// HTK-scale triangular mel filterbank, each triangle peak-normalized to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MelConfig {
    pub n_mels: usize,
    pub f_min: f64,
    pub f_max: f64,
}

impl Default for MelConfig {
    fn default() -> Self {
        Self {
            n_mels: 80,
            f_min: 0.0,
            f_max: 8000.0,
        }
    }
}

fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

impl MelConfig {
    pub fn validate(&self) -> Result<()> {
        let nyquist = SAMPLE_RATE as f64 / 2.0;
        if self.n_mels == 0 || !(0.0 <= self.f_min && self.f_min < self.f_max && self.f_max <= nyquist) {
            return Err(invalid_arg!(
                "mel config needs n_mels >= 1 and 0 <= f_min < f_max <= {nyquist}, got {self:?}"
            ));
        }
        Ok(())
    }

    /// Filterbank `[n_mels, fft_size / 2 + 1]`.
    pub fn filterbank(&self, fft_size: usize) -> Result<Tensor<f64>> {
        self.validate()?;
        let n_bins = fft_size / 2 + 1;
        let (lo, hi) = (hz_to_mel(self.f_min), hz_to_mel(self.f_max));
        let edges: Vec<f64> = (0..self.n_mels + 2)
            .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (self.n_mels + 1) as f64))
            .collect();
        let bin_hz = SAMPLE_RATE as f64 / fft_size as f64;
        let mut fb = Tensor::<f64>::zeros(&[self.n_mels, n_bins]);
        for m in 0..self.n_mels {
            let (l, c, r) = (edges[m], edges[m + 1], edges[m + 2]);
            for (k, w) in fb.row_mut(m).iter_mut().enumerate() {
                let f = k as f64 * bin_hz;
                let up = (f - l) / (c - l);
                let down = (r - f) / (r - c);
                *w = up.min(down).max(0.0);
            }
        }
        Ok(fb)
    }
}

/// Applies a filterbank `[M, F]` to a magnitude spectrogram `[F, N]` and takes
/// `ln(max(·, 1e-5))`.
pub fn log_mel_from_magnitude<S: Scalar>(mag: &Tensor<S>, fb: &Tensor<f64>) -> Result<Tensor<S>> {
    let (f, n) = mag.dims2()?;
    let (m, fb_bins) = fb.dims2()?;
    if fb_bins != f {
        return Err(invalid_arg!("filterbank has {fb_bins} bins, spectrogram has {f}"));
    }
    let md = mag.data();
    let mut out = Vec::with_capacity(m * n);
    let mut acc = vec![S::Acc::zero(); n];
    for row in 0..m {
        acc.iter_mut().for_each(|a| *a = S::Acc::zero());
        for (k, &w) in fb.row(row).iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let wv = S::Acc::from_f64(w);
            for (a, &v) in acc.iter_mut().zip(&md[k * n..(k + 1) * n]) {
                *a += wv * v.widen();
            }
        }
        out.extend(
            acc.iter()
                .map(|&a| S::narrow(a).max_by_value(S::from_f64(LOG_FLOOR)).ln()),
        );
    }
    Tensor::new(vec![m, n], out)
}

/// Log-mel spectrogram `[n_mels, n_frames]`.
pub fn mel_spectrogram<S: Scalar>(wave: &[S], stft: &StftConfig, mel: &MelConfig) -> Result<Tensor<S>> {
    let mag = linear_spectrogram(wave, stft)?;
    log_mel_from_magnitude(&mag, &mel.filterbank(stft.fft_size)?)
}
