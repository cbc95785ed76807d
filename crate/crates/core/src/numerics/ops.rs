//! Dense products and elementwise activations.

use super::macs;
use super::scalar::Scalar;
use super::tensor::Tensor;
use crate::error::{shape_err, Result};

/// `x · wᵀ + b` for `x: [T, in]`, `w: [out, in]`, `b: [out]`.
pub fn linear<S: Scalar>(x: &Tensor<S>, w: &Tensor<S>, b: Option<&Tensor<S>>) -> Result<Tensor<S>> {
    let (t, d_in) = x.dims2()?;
    let (d_out, w_in) = w.dims2()?;
    if w_in != d_in {
        return Err(shape_err!("linear: input width {d_in} vs weight width {w_in}"));
    }
    if let Some(b) = b {
        b.expect_shape(&[d_out])?;
    }
    let xd = x.data();
    let wd = w.data();
    let mut out = Vec::with_capacity(t * d_out);
    for i in 0..t {
        let xr = &xd[i * d_in..(i + 1) * d_in];
        for o in 0..d_out {
            let wr = &wd[o * d_in..(o + 1) * d_in];
            let mut acc = b.map_or(S::Acc::zero(), |b| b.data()[o].widen());
            for (&a, &c) in xr.iter().zip(wr) {
                acc += a.widen() * c.widen();
            }
            out.push(S::narrow(acc));
        }
    }
    macs::record((t * d_in * d_out) as u64);
    Tensor::new(vec![t, d_out], out)
}

/// Plain matrix product `a · b` for `a: [m, k]`, `b: [k, n]`.
pub fn matmul<S: Scalar>(a: &Tensor<S>, b: &Tensor<S>) -> Result<Tensor<S>> {
    let (m, k) = a.dims2()?;
    let (kb, n) = b.dims2()?;
    if k != kb {
        return Err(shape_err!("matmul inner dims {k} vs {kb}"));
    }
    let ad = a.data();
    let bd = b.data();
    let mut acc = vec![S::Acc::zero(); n];
    let mut out = Vec::with_capacity(m * n);
    for i in 0..m {
        acc.iter_mut().for_each(|v| *v = S::Acc::zero());
        for p in 0..k {
            let av = ad[i * k + p].widen();
            for (o, &bv) in acc.iter_mut().zip(&bd[p * n..(p + 1) * n]) {
                *o += av * bv.widen();
            }
        }
        out.extend(acc.iter().map(|&v| S::narrow(v)));
    }
    macs::record((m * k * n) as u64);
    Tensor::new(vec![m, n], out)
}

pub fn relu<S: Scalar>(x: &Tensor<S>) -> Tensor<S> {
    x.map(|v| v.max_by_value(S::zero()))
}

pub fn leaky_relu<S: Scalar>(x: &Tensor<S>, slope: f64) -> Tensor<S> {
    x.map(|v| if v.value() < 0.0 { v.scale(slope) } else { v })
}

pub fn tanh<S: Scalar>(x: &Tensor<S>) -> Tensor<S> {
    x.map(S::tanh)
}

/// `elu(u) + 1`, strictly positive.
#[inline]
pub fn elu_plus_one<S: Scalar>(u: S) -> S {
    if u.value() > 0.0 {
        u + S::one()
    } else {
        u.exp()
    }
}

/// Adds `v: [C]` to every column of `x: [C, T]`.
pub fn add_channel_bias<S: Scalar>(x: &mut Tensor<S>, v: &[S]) -> Result<()> {
    let (c, t) = x.dims2()?;
    if v.len() != c {
        return Err(shape_err!("channel bias length {} vs {c} channels", v.len()));
    }
    for (ch, &b) in v.iter().enumerate() {
        for e in &mut x.data_mut()[ch * t..(ch + 1) * t] {
            *e += b;
        }
    }
    Ok(())
}

/// Adds `v: [D]` to every row of `x: [T, D]`.
pub fn add_row_bias<S: Scalar>(x: &mut Tensor<S>, v: &[S]) -> Result<()> {
    let (t, d) = x.dims2()?;
    if v.len() != d {
        return Err(shape_err!("row bias length {} vs width {d}", v.len()));
    }
    for r in 0..t {
        for (e, &b) in x.row_mut(r).iter_mut().zip(v) {
            *e += b;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_matches_hand_product() {
        let x = Tensor::<f32>::new(vec![1, 2], vec![1.0, 2.0]).unwrap();
        let w = Tensor::new(vec![2, 2], vec![1.0, 0.0, 3.0, -1.0]).unwrap();
        let b = Tensor::new(vec![2], vec![0.5, 0.0]).unwrap();
        let y = linear(&x, &w, Some(&b)).unwrap();
        assert_eq!(y.data(), &[1.5, 1.0]);
    }

    #[test]
    fn matmul_counts_macs() {
        let a = Tensor::<f32>::zeros(&[3, 4]);
        let b = Tensor::<f32>::zeros(&[4, 5]);
        let (_, n) = macs::measure(|| matmul(&a, &b).unwrap());
        assert_eq!(n, 60);
    }
}
