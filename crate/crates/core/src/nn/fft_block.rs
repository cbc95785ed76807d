//! Pre-norm feed-forward Transformer block.

use super::attention::{attention, AttentionParams};
use crate::error::Result;
use crate::numerics::ops::relu;
use crate::numerics::{conv1d, layer_norm, Conv1dSpec, Scalar, Tensor};

pub const LN_EPS: f64 = 1e-5;

#[derive(Debug, Clone, Copy)]
pub struct Affine<'a, S> {
    pub weight: &'a Tensor<S>,
    pub bias: &'a Tensor<S>,
}

#[derive(Debug, Clone, Copy)]
pub struct FftBlockParams<'a, S> {
    pub attn: AttentionParams<'a, S>,
    pub norm1: Affine<'a, S>,
    pub norm2: Affine<'a, S>,
    /// `[filter, D, K1]`
    pub ff1: Affine<'a, S>,
    /// `[D, filter, K2]`
    pub ff2: Affine<'a, S>,
}

/// `h = x + Attn(LN(x))`, then `h + FF(LN(h))` where FF is conv, ReLU, conv
/// along time.
pub fn fft_block<S: Scalar>(x: &Tensor<S>, p: &FftBlockParams<S>, mask: Option<&[bool]>) -> Result<Tensor<S>> {
    let normed = layer_norm(x, p.norm1.weight, p.norm1.bias, LN_EPS)?;
    let h = x.add(&attention(&normed, &p.attn, mask)?)?;
    let normed = layer_norm(&h, p.norm2.weight, p.norm2.bias, LN_EPS)?.t()?;
    let f = relu(&conv1d(&normed, p.ff1.weight, Some(p.ff1.bias), Conv1dSpec::default())?);
    let f = conv1d(&f, p.ff2.weight, Some(p.ff2.bias), Conv1dSpec::default())?;
    h.add(&f.t()?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::AttentionKind;
    use crate::numerics::{rng_fill, Distribution};

    struct Owned {
        t: Vec<Tensor<f64>>,
    }

    impl Owned {
        fn random(d: usize, filter: usize, seed: u64) -> Self {
            let shapes: [&[usize]; 12] = [
                &[d, d],
                &[d, d],
                &[d, d],
                &[d, d],
                &[d],
                &[d],
                &[d],
                &[d],
                &[filter, d, 3],
                &[filter],
                &[d, filter, 1],
                &[d],
            ];
            let t = shapes
                .iter()
                .enumerate()
                .map(|(i, s)| {
                    let dist = match i {
                        4 | 6 => Distribution::Uniform { lo: 1.0, hi: 1.0 },
                        5 | 7 => Distribution::Uniform { lo: 0.0, hi: 0.0 },
                        _ => Distribution::Normal { mean: 0.0, std: 0.3 },
                    };
                    rng_fill(s, seed + i as u64, dist).unwrap().cast()
                })
                .collect();
            Self { t }
        }

        fn zeroed(d: usize, filter: usize) -> Self {
            let mut o = Self::random(d, filter, 0);
            for (i, t) in o.t.iter_mut().enumerate() {
                if !matches!(i, 4 | 6) {
                    *t = t.map(|_| 0.0);
                }
            }
            o
        }

        fn params(&self, kind: AttentionKind) -> FftBlockParams<'_, f64> {
            let t = &self.t;
            FftBlockParams {
                attn: AttentionParams {
                    w_q: &t[0],
                    w_k: &t[1],
                    w_v: &t[2],
                    w_o: &t[3],
                    n_heads: 2,
                    kind,
                },
                norm1: Affine {
                    weight: &t[4],
                    bias: &t[5],
                },
                norm2: Affine {
                    weight: &t[6],
                    bias: &t[7],
                },
                ff1: Affine {
                    weight: &t[8],
                    bias: &t[9],
                },
                ff2: Affine {
                    weight: &t[10],
                    bias: &t[11],
                },
            }
        }
    }

    #[test]
    fn zero_weights_pass_input_through() {
        let x: Tensor<f64> = rng_fill(&[4, 8], 1, Distribution::Normal { mean: 0.0, std: 1.0 })
            .unwrap()
            .cast();
        let o = Owned::zeroed(8, 16);
        for kind in [AttentionKind::Linear, AttentionKind::ScaledDot] {
            assert_eq!(fft_block(&x, &o.params(kind), None).unwrap(), x);
        }
    }

    #[test]
    fn shape_preserved_and_full_receptive_field() {
        let o = Owned::random(8, 16, 10);
        for t in [1, 4, 9] {
            let x: Tensor<f64> = rng_fill(&[t, 8], 2, Distribution::Normal { mean: 0.0, std: 1.0 })
                .unwrap()
                .cast();
            let y = fft_block(&x, &o.params(AttentionKind::Linear), None).unwrap();
            assert_eq!(y.shape(), x.shape());
            assert!(y.all_finite());
        }
        let x: Tensor<f64> = rng_fill(&[4, 8], 3, Distribution::Normal { mean: 0.0, std: 1.0 })
            .unwrap()
            .cast();
        let p = o.params(AttentionKind::ScaledDot);
        let base = fft_block(&x, &p, None).unwrap();
        let mut x2 = x.clone();
        x2.row_mut(0)[0] += 0.5;
        let moved = fft_block(&x2, &p, None).unwrap();
        for i in 0..4 {
            let diff: f64 = base.row(i).iter().zip(moved.row(i)).map(|(a, b)| (a - b).abs()).sum();
            assert!(diff > 0.0, "row {i} unchanged");
        }
    }

    #[test]
    fn width_mismatch_is_an_error() {
        let o = Owned::random(8, 16, 10);
        let x = Tensor::<f64>::zeros(&[3, 6]);
        assert!(fft_block(&x, &o.params(AttentionKind::Linear), None).is_err());
    }
}
