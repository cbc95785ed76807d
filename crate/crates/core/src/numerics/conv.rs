//! Direct 1-D and 2-D convolution (cross-correlation, PyTorch layout).
//!
//! * 1-D: input `[C_in, T]`, weight `[C_out, C_in / groups, K]`, bias `[C_out]`.
//! * 2-D: input `[C_in, H, W]`, weight `[C_out, C_in, Kh, Kw]`, bias `[C_out]`.

use super::macs;
use super::scalar::Scalar;
use super::tensor::Tensor;
use crate::error::{invalid_arg, shape_err, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Padding {
    /// Symmetric zero padding of `(K - 1) * dilation / 2` on each side.
    Same,
    Explicit {
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Conv1dSpec {
    pub stride: usize,
    pub dilation: usize,
    pub groups: usize,
    pub padding: Padding,
}

impl Default for Conv1dSpec {
    fn default() -> Self {
        Self {
            stride: 1,
            dilation: 1,
            groups: 1,
            padding: Padding::Same,
        }
    }
}

impl Conv1dSpec {
    pub fn grouped(groups: usize) -> Self {
        Self {
            groups,
            ..Self::default()
        }
    }

    pub fn dilated(dilation: usize) -> Self {
        Self {
            dilation,
            ..Self::default()
        }
    }

    fn pads(&self, kernel: usize) -> Result<(usize, usize)> {
        match self.padding {
            Padding::Explicit { left, right } => Ok((left, right)),
            Padding::Same => {
                let span = (kernel - 1) * self.dilation;
                if !span.is_multiple_of(2) {
                    return Err(invalid_arg!(
                        "same padding needs an even receptive span, kernel {kernel} dilation {}",
                        self.dilation
                    ));
                }
                Ok((span / 2, span / 2))
            }
        }
    }

    /// Output length for an input of length `t`.
    pub fn output_len(&self, t: usize, kernel: usize) -> Result<usize> {
        let (pl, pr) = self.pads(kernel)?;
        let span = (kernel - 1) * self.dilation + 1;
        let padded = t + pl + pr;
        if padded < span {
            return Err(shape_err!("kernel span {span} exceeds padded input {padded}"));
        }
        Ok((padded - span) / self.stride + 1)
    }
}

pub fn conv1d<S: Scalar>(x: &Tensor<S>, w: &Tensor<S>, b: Option<&Tensor<S>>, spec: Conv1dSpec) -> Result<Tensor<S>> {
    let (c_in, t_in) = x.dims2()?;
    let (c_out, c_in_g, k) = w.dims3()?;
    let g = spec.groups;
    if g == 0 || spec.stride == 0 || spec.dilation == 0 || k == 0 {
        return Err(invalid_arg!("conv1d: groups, stride, dilation and kernel must be >= 1"));
    }
    if c_in % g != 0 || c_out % g != 0 {
        return Err(shape_err!(
            "conv1d: channels {c_in}->{c_out} not divisible by {g} groups"
        ));
    }
    if c_in / g != c_in_g {
        return Err(shape_err!(
            "conv1d: weight expects {c_in_g} inputs per group, input gives {}",
            c_in / g
        ));
    }
    if let Some(b) = b {
        b.expect_shape(&[c_out])?;
    }
    let (pl, _) = spec.pads(k)?;
    let t_out = spec.output_len(t_in, k)?;
    let out_per_group = c_out / g;
    let xd = x.data();
    let wd = w.data();
    let mut out = Vec::with_capacity(c_out * t_out);
    let mut acc = vec![S::Acc::zero(); t_out];
    for co in 0..c_out {
        let init = b.map_or(S::Acc::zero(), |b| b.data()[co].widen());
        acc.iter_mut().for_each(|a| *a = init);
        let group = co / out_per_group;
        for cig in 0..c_in_g {
            let ci = group * c_in_g + cig;
            let xr = &xd[ci * t_in..(ci + 1) * t_in];
            for kk in 0..k {
                let wv = wd[(co * c_in_g + cig) * k + kk].widen();
                // source index = t * stride + kk * dilation - pl
                let shift = (kk * spec.dilation) as isize - pl as isize;
                let lo = if shift >= 0 {
                    0
                } else {
                    ((-shift) as usize).div_ceil(spec.stride)
                };
                let hi_excl = if (t_in as isize) - shift <= 0 {
                    0
                } else {
                    ((t_in as isize - shift) as usize).div_ceil(spec.stride)
                };
                let hi_excl = hi_excl.min(t_out);
                for (t, a) in acc.iter_mut().enumerate().take(hi_excl).skip(lo) {
                    let src = (t * spec.stride) as isize + shift;
                    *a += wv * xr[src as usize].widen();
                }
            }
        }
        out.extend(acc.iter().map(|&a| S::narrow(a)));
    }
    macs::record((c_out * c_in_g * k * t_out) as u64);
    Tensor::new(vec![c_out, t_out], out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Conv2dSpec {
    /// (height, width) strides.
    pub stride: (usize, usize),
    /// Symmetric zero padding (height, width).
    pub padding: (usize, usize),
}

impl Conv2dSpec {
    pub fn output_dims(&self, h: usize, w: usize, kh: usize, kw: usize) -> Result<(usize, usize)> {
        let (sh, sw) = self.stride;
        let (ph, pw) = self.padding;
        if sh == 0 || sw == 0 {
            return Err(invalid_arg!("conv2d stride must be >= 1"));
        }
        if h + 2 * ph < kh || w + 2 * pw < kw {
            return Err(shape_err!(
                "conv2d kernel {kh}x{kw} exceeds padded input {}x{}",
                h + 2 * ph,
                w + 2 * pw
            ));
        }
        Ok(((h + 2 * ph - kh) / sh + 1, (w + 2 * pw - kw) / sw + 1))
    }
}

/// Output positions `[lo, hi)` whose source `o * stride + shift` lies in `0..len`.
fn valid_range(shift: isize, stride: usize, len: usize, out_len: usize) -> (usize, usize) {
    let lo = if shift >= 0 {
        0
    } else {
        ((-shift) as usize).div_ceil(stride)
    };
    let hi = if len as isize - shift <= 0 {
        0
    } else {
        ((len as isize - shift) as usize).div_ceil(stride)
    };
    (lo, hi.min(out_len).max(lo))
}

pub fn conv2d<S: Scalar>(x: &Tensor<S>, w: &Tensor<S>, b: Option<&Tensor<S>>, spec: Conv2dSpec) -> Result<Tensor<S>> {
    let (c_in, h, wid) = x.dims3()?;
    let (c_out, wc_in, kh, kw) = match w.shape()[..] {
        [a, b, c, d] => (a, b, c, d),
        _ => return Err(shape_err!("conv2d weight must be 4-D, got {:?}", w.shape())),
    };
    if wc_in != c_in {
        return Err(shape_err!(
            "conv2d: weight expects {wc_in} input channels, input has {c_in}"
        ));
    }
    if let Some(b) = b {
        b.expect_shape(&[c_out])?;
    }
    let (ho, wo) = spec.output_dims(h, wid, kh, kw)?;
    let (sh, sw) = spec.stride;
    let (ph, pw) = spec.padding;
    let xd = x.data();
    let plane_out = ho * wo;
    let rows = c_in * kh * kw;
    let mut cols = vec![S::Acc::zero(); rows * plane_out];
    for ci in 0..c_in {
        let plane = &xd[ci * h * wid..(ci + 1) * h * wid];
        for ki in 0..kh {
            for kj in 0..kw {
                let r = (ci * kh + ki) * kw + kj;
                let col = &mut cols[r * plane_out..(r + 1) * plane_out];
                let (lo, hi) = valid_range(kj as isize - pw as isize, sw, wid, wo);
                for oi in 0..ho {
                    let si = (oi * sh + ki) as isize - ph as isize;
                    if si < 0 || si as usize >= h || lo >= hi {
                        continue;
                    }
                    let row = &plane[si as usize * wid..(si as usize + 1) * wid];
                    let base = lo * sw + kj - pw;
                    for (c, &v) in col[oi * wo + lo..oi * wo + hi]
                        .iter_mut()
                        .zip(row[base..].iter().step_by(sw))
                    {
                        *c = v.widen();
                    }
                }
            }
        }
    }
    let wd: Vec<S::Acc> = w.data().iter().map(|v| v.widen()).collect();
    let mut out = Vec::with_capacity(c_out * plane_out);
    let mut acc = vec![S::Acc::zero(); plane_out];
    for co in 0..c_out {
        let init = b.map_or(S::Acc::zero(), |b| b.data()[co].widen());
        acc.iter_mut().for_each(|a| *a = init);
        for (r, &wv) in wd[co * rows..(co + 1) * rows].iter().enumerate() {
            for (a, &c) in acc.iter_mut().zip(&cols[r * plane_out..(r + 1) * plane_out]) {
                *a += wv * c;
            }
        }
        out.extend(acc.iter().map(|&a| S::narrow(a)));
    }
    macs::record((c_out * c_in * kh * kw * ho * wo) as u64);
    Tensor::new(vec![c_out, ho, wo], out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::rng::{rng_fill, Distribution};

    const U: Distribution = Distribution::Uniform { lo: -1.0, hi: 1.0 };

    /// Independent reference: explicit padded buffer and a triple loop in f64.
    #[allow(clippy::too_many_arguments)]
    fn naive_conv1d(
        x: &Tensor,
        w: &Tensor,
        b: Option<&Tensor>,
        stride: usize,
        dil: usize,
        groups: usize,
        pl: usize,
        pr: usize,
    ) -> Vec<Vec<f64>> {
        let (c_in, t) = x.dims2().unwrap();
        let (c_out, cig, k) = w.dims3().unwrap();
        let padded: Vec<Vec<f64>> = (0..c_in)
            .map(|c| {
                let mut v = vec![0.0; pl];
                v.extend(x.row(c).iter().map(|&e| e as f64));
                v.extend(std::iter::repeat_n(0.0, pr));
                v
            })
            .collect();
        let t_out = (t + pl + pr - dil * (k - 1) - 1) / stride + 1;
        let opg = c_out / groups;
        (0..c_out)
            .map(|co| {
                (0..t_out)
                    .map(|to| {
                        let mut s = b.map_or(0.0, |b| b.data()[co] as f64);
                        for j in 0..cig {
                            let ci = (co / opg) * cig + j;
                            for kk in 0..k {
                                s += w.data()[(co * cig + j) * k + kk] as f64 * padded[ci][to * stride + kk * dil];
                            }
                        }
                        s
                    })
                    .collect()
            })
            .collect()
    }

    #[test]
    fn identity_kernel_is_identity() {
        let x = rng_fill(&[1, 9], 3, U).unwrap();
        let w = Tensor::new(vec![1, 1, 1], vec![1.0]).unwrap();
        let b = Tensor::new(vec![1], vec![0.0]).unwrap();
        assert_eq!(conv1d(&x, &w, Some(&b), Conv1dSpec::default()).unwrap(), x);
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn dilated_matches_naive_loop() {
        let x = rng_fill(&[3, 7], 11, U).unwrap();
        let w = rng_fill(&[2, 3, 3], 12, U).unwrap();
        let b = rng_fill(&[2], 13, U).unwrap();
        let y = conv1d(&x, &w, Some(&b), Conv1dSpec::dilated(2)).unwrap();
        let r = naive_conv1d(&x, &w, Some(&b), 1, 2, 1, 2, 2);
        assert_eq!(y.shape(), &[2, 7]);
        for co in 0..2 {
            for t in 0..7 {
                assert!((y.row(co)[t] as f64 - r[co][t]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn strided_explicit_padding_matches_naive_loop() {
        let x = rng_fill(&[4, 13], 21, U).unwrap();
        let w = rng_fill(&[6, 2, 4], 22, U).unwrap();
        let spec = Conv1dSpec {
            stride: 3,
            dilation: 1,
            groups: 2,
            padding: Padding::Explicit { left: 1, right: 2 },
        };
        let y = conv1d(&x, &w, None, spec).unwrap();
        let r = naive_conv1d(&x, &w, None, 3, 1, 2, 1, 2);
        assert_eq!(y.dims2().unwrap(), (6, r[0].len()));
        for (co, row) in r.iter().enumerate() {
            for (t, &v) in row.iter().enumerate() {
                assert!((y.row(co)[t] as f64 - v).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn grouped_equals_concatenated_halves() {
        let x = rng_fill(&[4, 10], 31, U).unwrap();
        let w = rng_fill(&[6, 2, 3], 32, U).unwrap();
        let y = conv1d(&x, &w, None, Conv1dSpec::grouped(2)).unwrap();
        let xa = x.slice_rows(0, 2).unwrap();
        let xb = x.slice_rows(2, 4).unwrap();
        let wa = Tensor::new(vec![3, 2, 3], w.data()[..18].to_vec()).unwrap();
        let wb = Tensor::new(vec![3, 2, 3], w.data()[18..].to_vec()).unwrap();
        let ya = conv1d(&xa, &wa, None, Conv1dSpec::default()).unwrap();
        let yb = conv1d(&xb, &wb, None, Conv1dSpec::default()).unwrap();
        assert_eq!(y, Tensor::concat_rows(&[&ya, &yb]).unwrap());
    }

    #[test]
    fn errors_on_bad_groups_and_short_input() {
        let x = Tensor::<f32>::zeros(&[3, 5]);
        let w = Tensor::<f32>::zeros(&[4, 1, 3]);
        assert!(conv1d(&x, &w, None, Conv1dSpec::grouped(2)).is_err());
        let w = Tensor::<f32>::zeros(&[1, 3, 9]);
        let spec = Conv1dSpec {
            padding: Padding::Explicit { left: 0, right: 0 },
            ..Conv1dSpec::default()
        };
        assert!(conv1d(&x, &w, None, spec).is_err());
    }

    #[test]
    fn conv2d_matches_naive_loop() {
        let x = rng_fill(&[2, 5, 6], 41, U).unwrap();
        let w = rng_fill(&[3, 2, 3, 3], 42, U).unwrap();
        let spec = Conv2dSpec {
            stride: (1, 2),
            padding: (1, 1),
        };
        let y = conv2d(&x, &w, None, spec).unwrap();
        let (ho, wo) = (5, 3);
        assert_eq!(y.shape(), &[3, ho, wo]);
        for co in 0..3 {
            for i in 0..ho {
                for j in 0..wo {
                    let mut s = 0.0f64;
                    for ci in 0..2 {
                        for a in 0..3 {
                            for c in 0..3 {
                                let (si, sj) = (i as isize + a as isize - 1, (j * 2) as isize + c as isize - 1);
                                if (0..5).contains(&si) && (0..6).contains(&sj) {
                                    s += w.data()[((co * 2 + ci) * 3 + a) * 3 + c] as f64
                                        * x.data()[(ci * 5 + si as usize) * 6 + sj as usize] as f64;
                                }
                            }
                        }
                    }
                    assert!((y.data()[(co * ho + i) * wo + j] as f64 - s).abs() < 1e-6);
                }
            }
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]
            #[test]
            fn conv1d_is_linear_in_input(seed in 0u64..10_000, a in -3.0f32..3.0) {
                let x1 = rng_fill(&[4, 12], seed, U).unwrap();
                let x2 = rng_fill(&[4, 12], seed + 1, U).unwrap();
                let w = rng_fill(&[6, 2, 5], seed + 2, U).unwrap();
                let spec = Conv1dSpec { stride: 1, dilation: 2, groups: 2, padding: Padding::Same };
                let lhs = conv1d(&x1.scale(a).add(&x2).unwrap(), &w, None, spec).unwrap();
                let rhs = conv1d(&x1, &w, None, spec).unwrap().scale(a)
                    .add(&conv1d(&x2, &w, None, spec).unwrap()).unwrap();
                prop_assert!(lhs.max_abs_diff(&rhs) < 1e-5);
            }
        }
    }
}
