use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::Serialize;

use crate::error::{invalid_arg, shape_err, Result};
use crate::numerics::{Scalar, Tensor};

/// Output sample rate of every waveform in the system.
pub const SAMPLE_RATE: u32 = 16_000;

/// Mono audio at [`SAMPLE_RATE`].
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform<S = f32> {
    samples: Vec<S>,
}

impl<S: Scalar> Waveform<S> {
    pub fn new(samples: Vec<S>) -> Self {
        Self { samples }
    }

    pub fn zeros(len: usize) -> Self {
        Self::new(vec![S::zero(); len])
    }

    pub fn samples(&self) -> &[S] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<S> {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn sample_rate(&self) -> u32 {
        SAMPLE_RATE
    }

    pub fn is_finite(&self) -> bool {
        self.samples.iter().all(|s| s.is_finite())
    }

    pub fn cast<T: Scalar>(&self) -> Waveform<T> {
        Waveform::new(self.samples.iter().map(|s| T::from_f64(s.value())).collect())
    }
}

/// STFT framing. Windows are periodic Hann of `win_length`, centred inside
/// each `fft_size` frame. With `center`, the signal is reflect-padded by
/// `fft_size / 2` on both sides and an input of `L` samples yields
/// `1 + L / hop` frames (81 frames for one second at hop 200); without it,
/// frames start at sample 0 and `1 + (L - fft_size) / hop` frames fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct StftConfig {
    pub fft_size: usize,
    pub hop: usize,
    pub win_length: usize,
    pub center: bool,
}

impl Default for StftConfig {
    fn default() -> Self {
        Self {
            fft_size: 1024,
            hop: 200,
            win_length: 800,
            center: true,
        }
    }
}

impl StftConfig {
    pub fn new(fft_size: usize, hop: usize, win_length: usize, center: bool) -> Result<Self> {
        let cfg = Self {
            fft_size,
            hop,
            win_length,
            center,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1 <= self.hop && self.hop <= self.win_length && self.win_length <= self.fft_size) {
            return Err(invalid_arg!(
                "stft needs 1 <= hop <= win_length <= fft_size, got hop {} win {} fft {}",
                self.hop,
                self.win_length,
                self.fft_size
            ));
        }
        if self.fft_size < 2 || !self.fft_size.is_multiple_of(2) {
            return Err(invalid_arg!("fft_size must be even and >= 2, got {}", self.fft_size));
        }
        if self.center && self.hop > self.fft_size / 2 {
            return Err(invalid_arg!("centred stft needs hop <= fft_size / 2"));
        }
        Ok(())
    }

    pub fn n_bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    /// Number of frames produced for a signal of `len` samples.
    pub fn n_frames(&self, len: usize) -> Result<usize> {
        if len == 0 {
            return Err(invalid_arg!("stft input is empty"));
        }
        if self.center {
            Ok(1 + len / self.hop)
        } else if len < self.fft_size {
            Err(shape_err!(
                "uncentred stft needs at least {} samples, got {len}",
                self.fft_size
            ))
        } else {
            Ok(1 + (len - self.fft_size) / self.hop)
        }
    }

    /// Analysis/synthesis window, zero-padded to `fft_size`.
    pub fn window(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.fft_size];
        let off = (self.fft_size - self.win_length) / 2;
        let n = self.win_length as f64;
        for i in 0..self.win_length {
            w[off + i] = 0.5 - 0.5 * (std::f64::consts::TAU * i as f64 / n).cos();
        }
        w
    }

    /// Largest relative deviation of the interior squared-window overlap-add
    /// sum from its mean. Zero (up to rounding) means the pair is COLA.
    pub fn cola_deviation(&self) -> f64 {
        let w = self.window();
        let sq: Vec<f64> = w.iter().map(|v| v * v).collect();
        // Sum over every frame offset congruent modulo hop.
        let sums: Vec<f64> = (0..self.hop)
            .map(|r| sq.iter().skip(r).step_by(self.hop).sum())
            .collect();
        let mean = sums.iter().sum::<f64>() / sums.len() as f64;
        sums.iter().map(|s| ((s - mean) / mean).abs()).fold(0.0, f64::max)
    }
}

/// Real and imaginary STFT planes, each `[n_bins, n_frames]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectrum<S = f32> {
    pub real: Tensor<S>,
    pub imag: Tensor<S>,
    pub config: StftConfig,
}

impl<S: Scalar> ComplexSpectrum<S> {
    pub fn new(real: Tensor<S>, imag: Tensor<S>, config: StftConfig) -> Result<Self> {
        let (f, _) = real.dims2()?;
        if f != config.n_bins() {
            return Err(shape_err!(
                "spectrum has {f} bins, fft_size {} needs {}",
                config.fft_size,
                config.n_bins()
            ));
        }
        imag.expect_shape(real.shape())?;
        Ok(Self { real, imag, config })
    }

    pub fn n_frames(&self) -> usize {
        self.real.dim(1)
    }

    /// `sqrt(re² + im²)` elementwise, exactly zero where both parts are.
    pub fn magnitude(&self) -> Tensor<S> {
        let data = self
            .real
            .data()
            .iter()
            .zip(self.imag.data())
            .map(|(&r, &i)| magnitude(r, i))
            .collect();
        Tensor::new(self.real.shape().to_vec(), data).expect("same shape")
    }
}

#[inline]
pub(crate) fn magnitude<S: Scalar>(re: S, im: S) -> S {
    let p = re * re + im * im;
    if p.value() == 0.0 {
        S::zero()
    } else {
        p.sqrt()
    }
}

/// Reflection index for `i` in a signal of length `n` (edge sample not repeated).
fn reflect(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let m = i.rem_euclid(period);
    if m < n as isize {
        m as usize
    } else {
        (period - m) as usize
    }
}

struct Planned {
    fft: Arc<dyn Fft<f64>>,
    buf: Vec<Complex<f64>>,
    scratch: Vec<Complex<f64>>,
}

impl Planned {
    fn new(n: usize, inverse: bool) -> Self {
        let mut planner = FftPlanner::new();
        let fft = if inverse {
            planner.plan_fft_inverse(n)
        } else {
            planner.plan_fft_forward(n)
        };
        let scratch = vec![Complex::default(); fft.get_inplace_scratch_len()];
        Self {
            fft,
            buf: vec![Complex::default(); n],
            scratch,
        }
    }

    fn run(&mut self) {
        self.fft.process_with_scratch(&mut self.buf, &mut self.scratch);
    }
}

pub fn stft<S: Scalar>(wave: &[S], cfg: &StftConfig) -> Result<ComplexSpectrum<S>> {
    cfg.validate()?;
    let n_frames = cfg.n_frames(wave.len())?;
    let n = cfg.fft_size;
    let f = cfg.n_bins();
    let pad = if cfg.center { (n / 2) as isize } else { 0 };
    let window = cfg.window();
    let mut plan = Planned::new(n, false);
    let mut real = vec![S::zero(); f * n_frames];
    let mut imag = vec![S::zero(); f * n_frames];
    let mut frame = vec![S::zero(); n];
    for t in 0..n_frames {
        let start = (t * cfg.hop) as isize - pad;
        for (k, v) in frame.iter_mut().enumerate() {
            *v = wave[reflect(start + k as isize, wave.len())];
        }
        let spec = S::map_linear(&frame, 2 * f, |x, out| {
            for ((b, &xv), &wv) in plan.buf.iter_mut().zip(x).zip(&window) {
                *b = Complex::new(xv * wv, 0.0);
            }
            plan.run();
            for (k, c) in plan.buf[..f].iter().enumerate() {
                out[k] = c.re;
                out[f + k] = c.im;
            }
        });
        for k in 0..f {
            real[k * n_frames + t] = spec[k];
            imag[k * n_frames + t] = spec[f + k];
        }
    }
    ComplexSpectrum::new(
        Tensor::new(vec![f, n_frames], real)?,
        Tensor::new(vec![f, n_frames], imag)?,
        *cfg,
    )
}

/// Weighted overlap-add inverse. Each frame is inverse-transformed, windowed
/// with the analysis window and summed; the result is divided by the summed
/// squared window wherever that envelope is non-negligible. With `target_len`,
/// the output is trimmed or zero-extended to exactly that many samples;
/// otherwise it has `(N - 1) * hop` samples (centred) or the full span.
pub fn istft<S: Scalar>(spec: &ComplexSpectrum<S>, target_len: Option<usize>) -> Result<Vec<S>> {
    let cfg = spec.config;
    cfg.validate()?;
    let (f, n_frames) = spec.real.dims2()?;
    if f != cfg.n_bins() {
        return Err(shape_err!(
            "spectrum has {f} bins, fft_size {} needs {}",
            cfg.fft_size,
            cfg.n_bins()
        ));
    }
    spec.imag.expect_shape(spec.real.shape())?;
    let n = cfg.fft_size;
    let window = cfg.window();
    let total = n + (n_frames - 1) * cfg.hop;
    let mut acc = vec![S::zero(); total];
    let mut env = vec![0.0f64; total];
    let mut plan = Planned::new(n, true);
    let mut bins = vec![S::zero(); 2 * f];
    let scale = 1.0 / n as f64;
    for t in 0..n_frames {
        for k in 0..f {
            bins[k] = spec.real.data()[k * n_frames + t];
            bins[f + k] = spec.imag.data()[k * n_frames + t];
        }
        let frame = S::map_linear(&bins, n, |x, out| {
            // Hermitian extension; DC and Nyquist imaginary parts are dropped.
            plan.buf[0] = Complex::new(x[0], 0.0);
            for k in 1..f - 1 {
                plan.buf[k] = Complex::new(x[k], x[f + k]);
                plan.buf[n - k] = Complex::new(x[k], -x[f + k]);
            }
            plan.buf[n / 2] = Complex::new(x[f - 1], 0.0);
            plan.run();
            for ((o, c), &w) in out.iter_mut().zip(&plan.buf).zip(&window) {
                *o = c.re * scale * w;
            }
        });
        let off = t * cfg.hop;
        for (i, (&v, &w)) in frame.iter().zip(&window).enumerate() {
            acc[off + i] += v;
            env[off + i] += w * w;
        }
    }
    for (a, &e) in acc.iter_mut().zip(&env) {
        if e > 1e-11 {
            *a = a.scale(1.0 / e);
        }
    }
    let start = if cfg.center { n / 2 } else { 0 };
    let natural = if cfg.center { (n_frames - 1) * cfg.hop } else { total };
    let len = target_len.unwrap_or(natural);
    let mut out: Vec<S> = acc.into_iter().skip(start).take(len).collect();
    out.resize(len, S::zero());
    Ok(out)
}

/// Magnitude spectrogram `[n_bins, n_frames]`.
pub fn linear_spectrogram<S: Scalar>(wave: &[S], cfg: &StftConfig) -> Result<Tensor<S>> {
    Ok(stft(wave, cfg)?.magnitude())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{rng_fill, Distribution};

    fn noise(len: usize, seed: u64) -> Vec<f32> {
        rng_fill(&[len], seed, Distribution::Uniform { lo: -1.0, hi: 1.0 })
            .unwrap()
            .into_data()
    }

    #[test]
    fn default_pair_is_cola() {
        assert!(StftConfig::default().cola_deviation() < 1e-6);
        // A hop that breaks the Hann overlap condition is detected.
        let bad = StftConfig::new(1024, 300, 800, true).unwrap();
        assert!(bad.cola_deviation() > 1e-3);
    }

    #[test]
    fn one_second_gives_81_frames() {
        assert_eq!(StftConfig::default().n_frames(16_000).unwrap(), 81);
    }

    #[test]
    fn zero_wave_zero_spectrum() {
        let s = stft(&vec![0.0f32; 16_000], &StftConfig::default()).unwrap();
        assert!(s.real.data().iter().chain(s.imag.data()).all(|&v| v == 0.0));
    }

    #[test]
    fn sine_peaks_at_expected_bin() {
        let x: Vec<f32> = (0..16_000)
            .map(|i| (std::f64::consts::TAU * 1000.0 * i as f64 / 16_000.0).sin() as f32)
            .collect();
        let mag = linear_spectrogram(&x, &StftConfig::default()).unwrap();
        let (f, n) = mag.dims2().unwrap();
        let mid = n / 2;
        let peak = (0..f)
            .max_by(|&a, &b| mag.data()[a * n + mid].total_cmp(&mag.data()[b * n + mid]))
            .unwrap();
        assert_eq!(peak, 64);
    }

    #[test]
    fn matches_direct_dft() {
        let cfg = StftConfig::default();
        let x = noise(4000, 5);
        let s = stft(&x, &cfg).unwrap();
        let n = cfg.fft_size;
        let w = cfg.window();
        let frames = s.n_frames();
        for &t in &[0, 1, frames / 2, frames - 1] {
            let start = (t * cfg.hop) as isize - (n / 2) as isize;
            let frame: Vec<f64> = (0..n)
                .map(|k| {
                    // reflect padding written out independently
                    let mut i = start + k as isize;
                    if i < 0 {
                        i = -i;
                    }
                    if i >= x.len() as isize {
                        i = 2 * (x.len() as isize - 1) - i;
                    }
                    x[i as usize] as f64 * w[k]
                })
                .collect();
            for &bin in &[0usize, 1, 64, 300, 512] {
                let (mut re, mut im) = (0.0, 0.0);
                for (k, v) in frame.iter().enumerate() {
                    let ang = -std::f64::consts::TAU * (bin * k) as f64 / n as f64;
                    re += v * ang.cos();
                    im += v * ang.sin();
                }
                assert!((s.real.data()[bin * frames + t] as f64 - re).abs() < 1e-4);
                assert!((s.imag.data()[bin * frames + t] as f64 - im).abs() < 1e-4);
            }
        }
    }

    #[test]
    fn round_trip_reconstructs() {
        let cfg = StftConfig::default();
        let x = noise(16_000, 17);
        let s = stft(&x, &cfg).unwrap();
        let y = istft(&s, Some(x.len())).unwrap();
        let num: f64 = x.iter().zip(&y).map(|(&a, &b)| (a as f64 - b as f64).powi(2)).sum();
        let den: f64 = x.iter().map(|&a| (a as f64).powi(2)).sum();
        assert!((num / den).sqrt() < 1e-6, "rel err {}", (num / den).sqrt());
    }

    #[test]
    fn zero_spectrum_zero_wave() {
        let cfg = StftConfig::default();
        let z = Tensor::<f32>::zeros(&[513, 10]);
        let spec = ComplexSpectrum::new(z.clone(), z, cfg).unwrap();
        let y = istft(&spec, Some(2000)).unwrap();
        assert_eq!(y.len(), 2000);
        assert!(y.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_frame_inverts_windowed_impulse() {
        // Frame holding a unit impulse at its centre: spectrum is
        // w[c] * exp(-i 2π k c / N). The inverse must put w[c] * w[c] / w[c]^2 = 1
        // back at the centre and zero elsewhere.
        let cfg = StftConfig {
            center: false,
            ..StftConfig::default()
        };
        let n = cfg.fft_size;
        let c = n / 2;
        let w = cfg.window();
        let f = cfg.n_bins();
        let mut re = vec![0.0f32; f];
        let mut im = vec![0.0f32; f];
        for k in 0..f {
            let ang = -std::f64::consts::TAU * (k * c) as f64 / n as f64;
            re[k] = (w[c] * ang.cos()) as f32;
            im[k] = (w[c] * ang.sin()) as f32;
        }
        let spec = ComplexSpectrum::new(
            Tensor::new(vec![f, 1], re).unwrap(),
            Tensor::new(vec![f, 1], im).unwrap(),
            cfg,
        )
        .unwrap();
        let y = istft(&spec, None).unwrap();
        assert_eq!(y.len(), n);
        for (i, &v) in y.iter().enumerate() {
            let expect = if i == c { 1.0 } else { 0.0 };
            if w[i] * w[i] > 1e-11 {
                assert!((v as f64 - expect).abs() < 1e-5, "sample {i}: {v}");
            }
        }
    }

    #[test]
    fn istft_rejects_bin_mismatch() {
        let z = Tensor::<f32>::zeros(&[100, 4]);
        assert!(ComplexSpectrum::new(z.clone(), z, StftConfig::default()).is_err());
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(stft::<f32>(&[], &StftConfig::default()).is_err());
    }

    #[test]
    fn magnitude_equals_complex_modulus() {
        let cfg = StftConfig::default();
        let x = noise(3000, 23);
        let s = stft(&x, &cfg).unwrap();
        let m = linear_spectrogram(&x, &cfg).unwrap();
        for ((&r, &i), &v) in s.real.data().iter().zip(s.imag.data()).zip(m.data()) {
            assert!((v - (r * r + i * i).sqrt()).abs() <= 1e-6 * v.max(1.0));
        }
    }

    #[test]
    fn parseval_energy() {
        // For each frame, Σ_k |X_k|^2 over the full (two-sided) spectrum equals
        // N · Σ_n (w[n] x[n])^2. With the one-sided half we weight interior bins twice.
        let cfg = StftConfig::default();
        let x = noise(6000, 29);
        let m = linear_spectrogram(&x, &cfg).unwrap();
        let (f, frames) = m.dims2().unwrap();
        let mut spec_energy = 0.0;
        for k in 0..f {
            let weight = if k == 0 || k == f - 1 { 1.0 } else { 2.0 };
            for t in 0..frames {
                spec_energy += weight * (m.data()[k * frames + t] as f64).powi(2);
            }
        }
        spec_energy /= cfg.fft_size as f64;
        // Window-energy-weighted signal energy: Σ_t Σ_n (w[n] x_pad[t·hop + n])².
        let w = cfg.window();
        let half = (cfg.fft_size / 2) as isize;
        let last = x.len() as isize - 1;
        let mut expect = 0.0;
        for t in 0..frames {
            for (k, &wk) in w.iter().enumerate() {
                let i = (t * cfg.hop + k) as isize - half;
                let i = if i < 0 {
                    -i
                } else if i > last {
                    2 * last - i
                } else {
                    i
                };
                expect += (wk * x[i as usize] as f64).powi(2);
            }
        }
        assert!(
            ((spec_energy - expect) / expect).abs() < 0.01,
            "{spec_energy} vs {expect}"
        );
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(12))]
            #[test]
            fn stft_is_linear(seed in 0u64..1000, a in -2.0f32..2.0) {
                let cfg = StftConfig::default();
                let x = noise(2400, seed);
                let y = noise(2400, seed + 7);
                let xy: Vec<f32> = x.iter().zip(&y).map(|(&p, &q)| a * p + q).collect();
                let lhs = stft(&xy, &cfg).unwrap();
                let sx = stft(&x, &cfg).unwrap();
                let sy = stft(&y, &cfg).unwrap();
                let rr = sx.real.scale(a).add(&sy.real).unwrap();
                let ri = sx.imag.scale(a).add(&sy.imag).unwrap();
                // 1e-5 relative to the largest coefficient (f32 storage).
                let scale = rr.data().iter().chain(ri.data()).fold(1.0f32, |m, v| m.max(v.abs())) as f64;
                prop_assert!(lhs.real.max_abs_diff(&rr) < 1e-5 * scale);
                prop_assert!(lhs.imag.max_abs_diff(&ri) < 1e-5 * scale);
            }
        }
    }
}
