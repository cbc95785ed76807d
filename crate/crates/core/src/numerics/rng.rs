//! Seeded random streams.
//!
//! The generator is ChaCha8 (`rand_chacha::ChaCha8Rng::seed_from_u64`), which
//! is specified bit-for-bit and therefore identical on every platform.
//! Uniform variates take the top 53 bits of `next_u64` scaled by 2^-53, giving
//! values in [0, 1). Normal variates use the Box–Muller transform on pairs of
//! those uniforms, with `u1` mapped to (0, 1] so the logarithm stays finite;
//! both outputs of each pair are used, cosine branch first.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use super::tensor::Tensor;
use crate::error::{invalid_arg, shape_err, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Distribution {
    Uniform { lo: f64, hi: f64 },
    Normal { mean: f64, std: f64 },
}

#[derive(Debug, Clone)]
pub struct Rng {
    inner: ChaCha8Rng,
    spare_normal: Option<f64>,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self {
            inner: ChaCha8Rng::seed_from_u64(seed),
            spare_normal: None,
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform in [0, 1).
    pub fn uniform(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Standard normal variate.
    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = std::f64::consts::TAU * u2;
        self.spare_normal = Some(r * theta.sin());
        r * theta.cos()
    }

    pub fn sample(&mut self, dist: Distribution) -> f64 {
        match dist {
            Distribution::Uniform { lo, hi } => self.uniform_range(lo, hi),
            Distribution::Normal { mean, std } => mean + std * self.normal(),
        }
    }

    pub fn fill(&mut self, shape: &[usize], dist: Distribution) -> Result<Tensor> {
        validate(shape, dist)?;
        let n = shape.iter().product();
        let data = (0..n).map(|_| self.sample(dist) as f32).collect();
        Tensor::new(shape.to_vec(), data)
    }
}

#[allow(clippy::neg_cmp_op_on_partial_ord)]
fn validate(shape: &[usize], dist: Distribution) -> Result<()> {
    if shape.is_empty() || shape.contains(&0) {
        return Err(shape_err!("rng_fill needs non-empty positive dims, got {shape:?}"));
    }
    match dist {
        Distribution::Normal { std, .. } if std < 0.0 || std.is_nan() => {
            Err(invalid_arg!("normal sigma must be >= 0, got {std}"))
        }
        Distribution::Uniform { lo, hi } if !(lo <= hi) => {
            Err(invalid_arg!("uniform bounds must satisfy lo <= hi, got ({lo}, {hi})"))
        }
        _ => Ok(()),
    }
}

/// Deterministic tensor drawn from a fresh stream seeded with `seed`.
pub fn rng_fill(shape: &[usize], seed: u64, dist: Distribution) -> Result<Tensor> {
    Rng::new(seed).fill(shape, dist)
}

/// Sub-seed for a named stream: FNV-1a over the name, mixed with the master
/// seed through the SplitMix64 finalizer.
pub fn derive_seed(master: u64, name: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    let mut z = h ^ master.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
