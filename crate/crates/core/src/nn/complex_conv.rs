//! Complex-valued 2-D convolution from four real convolutions.

use crate::error::{shape_err, Result};
use crate::numerics::{conv2d, Conv2dSpec, Scalar, Tensor};

#[derive(Debug, Clone, Copy)]
pub struct ComplexKernel<'a, S> {
    pub w_re: &'a Tensor<S>,
    pub w_im: &'a Tensor<S>,
    pub b_re: &'a Tensor<S>,
    pub b_im: &'a Tensor<S>,
}

/// `(x_re∗w_re − x_im∗w_im + b_re, x_re∗w_im + x_im∗w_re + b_im)`.
pub fn complex_conv2d<S: Scalar>(
    x_re: &Tensor<S>,
    x_im: &Tensor<S>,
    k: &ComplexKernel<S>,
    spec: Conv2dSpec,
) -> Result<(Tensor<S>, Tensor<S>)> {
    if x_re.shape() != x_im.shape() {
        return Err(shape_err!(
            "complex input parts differ: {:?} vs {:?}",
            x_re.shape(),
            x_im.shape()
        ));
    }
    if k.w_re.shape() != k.w_im.shape() || k.b_re.shape() != k.b_im.shape() {
        return Err(shape_err!("complex kernel parts differ in shape"));
    }
    let rr = conv2d(x_re, k.w_re, Some(k.b_re), spec)?;
    let ii = conv2d(x_im, k.w_im, None, spec)?;
    let ri = conv2d(x_re, k.w_im, Some(k.b_im), spec)?;
    let ir = conv2d(x_im, k.w_re, None, spec)?;
    Ok((rr.sub(&ii)?, ri.add(&ir)?))
}
