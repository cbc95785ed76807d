//! Element types for tensors.
//!
//! Every kernel in the crate is generic over [`Scalar`]. Inference runs on
//! `f32`; the directional-derivative checks run the same code on `f64` (for
//! finite differences) and on [`Dual`] (forward-mode tangents).

use std::fmt::Debug;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

pub trait Scalar:
    Copy
    + Debug
    + Default
    + PartialEq
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
{
    /// Accumulator used for dot products and reductions.
    type Acc: Scalar;

    fn from_f64(v: f64) -> Self;
    /// Primal value.
    fn value(self) -> f64;
    fn widen(self) -> Self::Acc;
    fn narrow(acc: Self::Acc) -> Self;

    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn tanh(self) -> Self;
    fn sqrt(self) -> Self;

    fn is_finite(self) -> bool;

    /// Applies a real-linear map to `input`, producing `out_len` outputs.
    ///
    /// Plain floats run the map once in f64; dual numbers run it on the
    /// primal and tangent parts separately.
    fn map_linear<F>(input: &[Self], out_len: usize, f: F) -> Vec<Self>
    where
        F: FnMut(&[f64], &mut [f64]);

    #[inline]
    fn zero() -> Self {
        Self::default()
    }

    #[inline]
    fn one() -> Self {
        Self::from_f64(1.0)
    }

    #[inline]
    fn abs(self) -> Self {
        if self.value() < 0.0 {
            -self
        } else {
            self
        }
    }

    /// Larger of the two by primal value (ties keep `self`).
    #[inline]
    fn max_by_value(self, other: Self) -> Self {
        if other.value() > self.value() {
            other
        } else {
            self
        }
    }

    #[inline]
    fn sigmoid(self) -> Self {
        Self::one() / (Self::one() + (-self).exp())
    }

    #[inline]
    fn scale(self, k: f64) -> Self {
        self * Self::from_f64(k)
    }
}

fn map_plain<T: Copy, F>(
    input: &[T],
    out_len: usize,
    to: impl Fn(T) -> f64,
    from: impl Fn(f64) -> T,
    mut f: F,
) -> Vec<T>
where
    F: FnMut(&[f64], &mut [f64]),
{
    let buf: Vec<f64> = input.iter().map(|&v| to(v)).collect();
    let mut out = vec![0.0; out_len];
    f(&buf, &mut out);
    out.into_iter().map(from).collect()
}

impl Scalar for f32 {
    type Acc = f64;

    #[inline]
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    #[inline]
    fn value(self) -> f64 {
        self as f64
    }
    #[inline]
    fn widen(self) -> f64 {
        self as f64
    }
    #[inline]
    fn narrow(acc: f64) -> Self {
        acc as f32
    }
    #[inline]
    fn exp(self) -> Self {
        f32::exp(self)
    }
    #[inline]
    fn ln(self) -> Self {
        f32::ln(self)
    }
    #[inline]
    fn tanh(self) -> Self {
        f32::tanh(self)
    }
    #[inline]
    fn sqrt(self) -> Self {
        f32::sqrt(self)
    }
    #[inline]
    fn is_finite(self) -> bool {
        f32::is_finite(self)
    }
    fn map_linear<F>(input: &[Self], out_len: usize, f: F) -> Vec<Self>
    where
        F: FnMut(&[f64], &mut [f64]),
    {
        map_plain(input, out_len, |v| v as f64, |v| v as f32, f)
    }
}

impl Scalar for f64 {
    type Acc = f64;

    #[inline]
    fn from_f64(v: f64) -> Self {
        v
    }
    #[inline]
    fn value(self) -> f64 {
        self
    }
    #[inline]
    fn widen(self) -> f64 {
        self
    }
    #[inline]
    fn narrow(acc: f64) -> Self {
        acc
    }
    #[inline]
    fn exp(self) -> Self {
        f64::exp(self)
    }
    #[inline]
    fn ln(self) -> Self {
        f64::ln(self)
    }
    #[inline]
    fn tanh(self) -> Self {
        f64::tanh(self)
    }
    #[inline]
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    #[inline]
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }
    fn map_linear<F>(input: &[Self], out_len: usize, f: F) -> Vec<Self>
    where
        F: FnMut(&[f64], &mut [f64]),
    {
        map_plain(input, out_len, |v| v, |v| v, f)
    }
}

/// Forward-mode dual number: a value paired with a directional derivative.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Dual {
    pub value: f64,
    pub tangent: f64,
}

impl Dual {
    pub const fn new(value: f64, tangent: f64) -> Self {
        Self { value, tangent }
    }

    pub const fn constant(value: f64) -> Self {
        Self { value, tangent: 0.0 }
    }

    /// Applies a unary function given its value and derivative at `self.value`.
    #[inline]
    fn chain(self, f: f64, df: f64) -> Self {
        Self::new(f, df * self.tangent)
    }
}

impl Add for Dual {
    type Output = Dual;
    #[inline]
    fn add(self, rhs: Dual) -> Dual {
        Dual::new(self.value + rhs.value, self.tangent + rhs.tangent)
    }
}

impl Sub for Dual {
    type Output = Dual;
    #[inline]
    fn sub(self, rhs: Dual) -> Dual {
        Dual::new(self.value - rhs.value, self.tangent - rhs.tangent)
    }
}

impl Mul for Dual {
    type Output = Dual;
    #[inline]
    fn mul(self, rhs: Dual) -> Dual {
        Dual::new(
            self.value * rhs.value,
            self.value * rhs.tangent + self.tangent * rhs.value,
        )
    }
}

impl Div for Dual {
    type Output = Dual;
    #[inline]
    fn div(self, rhs: Dual) -> Dual {
        let v = self.value / rhs.value;
        Dual::new(v, (self.tangent - v * rhs.tangent) / rhs.value)
    }
}

impl Neg for Dual {
    type Output = Dual;
    #[inline]
    fn neg(self) -> Dual {
        Dual::new(-self.value, -self.tangent)
    }
}

impl AddAssign for Dual {
    #[inline]
    fn add_assign(&mut self, rhs: Dual) {
        *self = *self + rhs;
    }
}

impl SubAssign for Dual {
    #[inline]
    fn sub_assign(&mut self, rhs: Dual) {
        *self = *self - rhs;
    }
}

impl MulAssign for Dual {
    #[inline]
    fn mul_assign(&mut self, rhs: Dual) {
        *self = *self * rhs;
    }
}

impl Scalar for Dual {
    type Acc = Dual;

    #[inline]
    fn from_f64(v: f64) -> Self {
        Dual::constant(v)
    }
    #[inline]
    fn value(self) -> f64 {
        self.value
    }
    #[inline]
    fn widen(self) -> Dual {
        self
    }
    #[inline]
    fn narrow(acc: Dual) -> Self {
        acc
    }
    #[inline]
    fn exp(self) -> Self {
        let e = self.value.exp();
        self.chain(e, e)
    }
    #[inline]
    fn ln(self) -> Self {
        self.chain(self.value.ln(), 1.0 / self.value)
    }
    #[inline]
    fn tanh(self) -> Self {
        let t = self.value.tanh();
        self.chain(t, 1.0 - t * t)
    }
    #[inline]
    fn sqrt(self) -> Self {
        let s = self.value.sqrt();
        self.chain(s, 0.5 / s)
    }
    #[inline]
    fn sigmoid(self) -> Self {
        let s = 1.0 / (1.0 + (-self.value).exp());
        self.chain(s, s * (1.0 - s))
    }
    #[inline]
    fn is_finite(self) -> bool {
        self.value.is_finite() && self.tangent.is_finite()
    }
    fn map_linear<F>(input: &[Self], out_len: usize, mut f: F) -> Vec<Self>
    where
        F: FnMut(&[f64], &mut [f64]),
    {
        let values: Vec<f64> = input.iter().map(|d| d.value).collect();
        let tangents: Vec<f64> = input.iter().map(|d| d.tangent).collect();
        let mut out_v = vec![0.0; out_len];
        let mut out_t = vec![0.0; out_len];
        f(&values, &mut out_v);
        f(&tangents, &mut out_t);
        out_v.into_iter().zip(out_t).map(|(v, t)| Dual::new(v, t)).collect()
    }
}
