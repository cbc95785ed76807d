//! Multi-head self-attention over `[T, D]` sequences.
//!
//! Projections are bias-free `[D, D]` matrices applied as `x · Wᵀ`. The mask,
//! when given, marks valid positions with `true`; invalid positions never
//! contribute as keys or values. There is no causal mask.

use crate::config::AttentionKind;
use crate::error::{invalid_arg, shape_err, Result};
use crate::numerics::ops::{elu_plus_one, linear};
use crate::numerics::{macs, Scalar, Tensor};

#[derive(Debug, Clone, Copy)]
pub struct AttentionParams<'a, S> {
    pub w_q: &'a Tensor<S>,
    pub w_k: &'a Tensor<S>,
    pub w_v: &'a Tensor<S>,
    pub w_o: &'a Tensor<S>,
    pub n_heads: usize,
    pub kind: AttentionKind,
}

impl<S: Scalar> AttentionParams<'_, S> {
    fn check(&self, x: &Tensor<S>, mask: Option<&[bool]>) -> Result<(usize, usize)> {
        let (t, d) = x.dims2()?;
        for w in [self.w_q, self.w_k, self.w_v, self.w_o] {
            w.expect_shape(&[d, d])?;
        }
        if self.n_heads == 0 || d % self.n_heads != 0 {
            return Err(invalid_arg!("width {d} not divisible by {} heads", self.n_heads));
        }
        if let Some(m) = mask {
            if m.len() != t {
                return Err(shape_err!("mask length {} vs sequence length {t}", m.len()));
            }
        }
        Ok((t, d))
    }

    fn project(&self, x: &Tensor<S>) -> Result<(Tensor<S>, Tensor<S>, Tensor<S>)> {
        Ok((
            linear(x, self.w_q, None)?,
            linear(x, self.w_k, None)?,
            linear(x, self.w_v, None)?,
        ))
    }
}

/// Dispatches on `p.kind`.
pub fn attention<S: Scalar>(x: &Tensor<S>, p: &AttentionParams<S>, mask: Option<&[bool]>) -> Result<Tensor<S>> {
    match p.kind {
        AttentionKind::ScaledDot => scaled_dot_attention(x, p, mask),
        AttentionKind::Linear => linear_attention(x, p, mask),
    }
}

/// Softmax attention weights, one `[T, T]` matrix per head.
pub fn attention_weights<S: Scalar>(
    x: &Tensor<S>,
    p: &AttentionParams<S>,
    mask: Option<&[bool]>,
) -> Result<Vec<Tensor<S>>> {
    p.check(x, mask)?;
    let (q, k, _) = p.project(x)?;
    softmax_weights(&q, &k, p.n_heads, mask)
}

fn softmax_weights<S: Scalar>(
    q: &Tensor<S>,
    k: &Tensor<S>,
    n_heads: usize,
    mask: Option<&[bool]>,
) -> Result<Vec<Tensor<S>>> {
    let (t, d) = q.dims2()?;
    let dh = d / n_heads;
    let valid = |j: usize| mask.is_none_or(|m| m[j]);
    if !(0..t).any(valid) {
        return Err(invalid_arg!("mask removes all positions"));
    }
    let scale = 1.0 / (dh as f64).sqrt();
    let (qd, kd) = (q.data(), k.data());
    let mut heads = Vec::with_capacity(n_heads);
    for h in 0..n_heads {
        let off = h * dh;
        let mut w = Vec::with_capacity(t * t);
        for i in 0..t {
            let qi = &qd[i * d + off..i * d + off + dh];
            let mut logits: Vec<Option<S>> = Vec::with_capacity(t);
            for j in 0..t {
                if !valid(j) {
                    logits.push(None);
                    continue;
                }
                let kj = &kd[j * d + off..j * d + off + dh];
                let mut acc = S::Acc::zero();
                for (&a, &b) in qi.iter().zip(kj) {
                    acc += a.widen() * b.widen();
                }
                logits.push(Some(S::narrow(acc).scale(scale)));
            }
            let max = logits
                .iter()
                .flatten()
                .map(|v| v.value())
                .fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<S> = logits
                .iter()
                .map(|l| l.map_or(S::zero(), |v| (v - S::from_f64(max)).exp()))
                .collect();
            let mut sum = S::Acc::zero();
            for &e in &exps {
                sum += e.widen();
            }
            let sum = S::narrow(sum);
            w.extend(exps.into_iter().map(|e| e / sum));
        }
        heads.push(Tensor::new(vec![t, t], w)?);
    }
    macs::record((t * t * d) as u64);
    Ok(heads)
}

/// `softmax(Q Kᵀ / sqrt(D / heads)) V` per head, concatenated and projected by `W_o`.
pub fn scaled_dot_attention<S: Scalar>(
    x: &Tensor<S>,
    p: &AttentionParams<S>,
    mask: Option<&[bool]>,
) -> Result<Tensor<S>> {
    let (t, d) = p.check(x, mask)?;
    let (q, k, v) = p.project(x)?;
    let weights = softmax_weights(&q, &k, p.n_heads, mask)?;
    let dh = d / p.n_heads;
    let vd = v.data();
    let mut ctx = vec![S::zero(); t * d];
    let mut acc = vec![S::Acc::zero(); dh];
    for (h, w) in weights.iter().enumerate() {
        let off = h * dh;
        for i in 0..t {
            acc.iter_mut().for_each(|a| *a = S::Acc::zero());
            for (j, &a) in w.row(i).iter().enumerate() {
                let a = a.widen();
                for (o, &vv) in acc.iter_mut().zip(&vd[j * d + off..j * d + off + dh]) {
                    *o += a * vv.widen();
                }
            }
            for (c, &o) in ctx[i * d + off..i * d + off + dh].iter_mut().zip(&acc) {
                *c = S::narrow(o);
            }
        }
    }
    macs::record((t * t * d) as u64);
    linear(&Tensor::new(vec![t, d], ctx)?, p.w_o, None)
}

/// Non-causal normalized linear attention with `φ(u) = elu(u) + 1`:
/// `φ(Q)[φ(K)ᵀ V] / φ(Q)[φ(K)ᵀ 1]` per head, projected by `W_o`.
pub fn linear_attention<S: Scalar>(x: &Tensor<S>, p: &AttentionParams<S>, mask: Option<&[bool]>) -> Result<Tensor<S>> {
    let (t, d) = p.check(x, mask)?;
    let valid = |j: usize| mask.is_none_or(|m| m[j]);
    if !(0..t).any(valid) {
        return Err(invalid_arg!("mask removes all positions"));
    }
    let (q, k, v) = p.project(x)?;
    let fq = q.map(elu_plus_one);
    let fk = k.map(elu_plus_one);
    let dh = d / p.n_heads;
    let (qd, kd, vd) = (fq.data(), fk.data(), v.data());
    let mut ctx = vec![S::zero(); t * d];
    for h in 0..p.n_heads {
        let off = h * dh;
        // kv[a][b] = Σ_j φ(k_j)[a] v_j[b]; ksum[a] = Σ_j φ(k_j)[a]
        let mut kv = vec![S::Acc::zero(); dh * dh];
        let mut ksum = vec![S::Acc::zero(); dh];
        for j in (0..t).filter(|&j| valid(j)) {
            let kj = &kd[j * d + off..j * d + off + dh];
            let vj = &vd[j * d + off..j * d + off + dh];
            for (a, &ka) in kj.iter().enumerate() {
                let ka = ka.widen();
                ksum[a] += ka;
                for (o, &vb) in kv[a * dh..(a + 1) * dh].iter_mut().zip(vj) {
                    *o += ka * vb.widen();
                }
            }
        }
        for i in 0..t {
            let qi = &qd[i * d + off..i * d + off + dh];
            let mut num = vec![S::Acc::zero(); dh];
            let mut den = S::Acc::zero();
            for (a, &qa) in qi.iter().enumerate() {
                let qa = qa.widen();
                den += qa * ksum[a];
                for (o, &m) in num.iter_mut().zip(&kv[a * dh..(a + 1) * dh]) {
                    *o += qa * m;
                }
            }
            for (c, &n) in ctx[i * d + off..i * d + off + dh].iter_mut().zip(&num) {
                *c = S::narrow(n / den);
            }
        }
    }
    macs::record((2 * t * d * dh + t * d) as u64);
    linear(&Tensor::new(vec![t, d], ctx)?, p.w_o, None)
}
