//! Gated WaveNet residual stack with optional global conditioning.

use super::fft_block::Affine;
use crate::error::{invalid_arg, shape_err, Result};
use crate::numerics::ops::linear;
use crate::numerics::{conv1d, Conv1dSpec, Scalar, Tensor};

#[derive(Debug, Clone, Copy)]
pub struct WnLayer<'a, S> {
    /// `[2H, H, K]`
    pub in_conv: Affine<'a, S>,
    /// `[2H, H, 1]` on every layer but the last, `[H, H, 1]` on the last.
    pub res_skip: Affine<'a, S>,
}

#[derive(Debug, Clone)]
pub struct WnStackParams<'a, S> {
    pub hidden: usize,
    pub dilation_rate: usize,
    pub layers: Vec<WnLayer<'a, S>>,
    /// `[2H·L, G]` projection of the conditioning vector into every gate.
    pub cond: Option<Affine<'a, S>>,
}

/// Runs the stack on `x: [H, T]` and returns the sum of the skip outputs.
///
/// A missing `cond` is the zero vector: only the projection bias reaches the
/// gates.
pub fn wn_stack<S: Scalar>(x: &Tensor<S>, cond: Option<&Tensor<S>>, p: &WnStackParams<S>) -> Result<Tensor<S>> {
    let (h, t) = x.dims2()?;
    if h != p.hidden {
        return Err(shape_err!("wn_stack: input has {h} channels, stack width {}", p.hidden));
    }
    let n = p.layers.len();
    let gate_bias: Option<Vec<S>> = match (cond, &p.cond) {
        (Some(_), None) => return Err(invalid_arg!("conditioning given to an unconditioned WaveNet stack")),
        (None, None) => None,
        (None, Some(proj)) => {
            proj.bias.expect_shape(&[2 * h * n])?;
            Some(proj.bias.data().to_vec())
        }
        (Some(g), Some(proj)) => {
            let gdim = proj.weight.dims2()?.1;
            if g.shape() != [gdim] {
                return Err(shape_err!("conditioning vector {:?}, expected [{gdim}]", g.shape()));
            }
            let g = g.clone().reshape(&[1, gdim])?;
            let v = linear(&g, proj.weight, Some(proj.bias))?;
            if v.len() != 2 * h * n {
                return Err(shape_err!(
                    "conditioning projection yields {} values, need {}",
                    v.len(),
                    2 * h * n
                ));
            }
            Some(v.into_data())
        }
    };

    let mut x = x.clone();
    let mut skip = Tensor::<S>::zeros(&[h, t]);
    let mut dilation = 1;
    for (i, layer) in p.layers.iter().enumerate() {
        let spec = Conv1dSpec::dilated(dilation);
        let mut x_in = conv1d(&x, layer.in_conv.weight, Some(layer.in_conv.bias), spec)?;
        if let Some(gb) = &gate_bias {
            crate::numerics::ops::add_channel_bias(&mut x_in, &gb[i * 2 * h..(i + 1) * 2 * h])?;
        }
        let xd = x_in.data();
        let acts: Vec<S> = (0..h * t).map(|e| xd[e].tanh() * xd[h * t + e].sigmoid()).collect();
        let acts = Tensor::new(vec![h, t], acts)?;
        let rs = conv1d(
            &acts,
            layer.res_skip.weight,
            Some(layer.res_skip.bias),
            Conv1dSpec::default(),
        )?;
        if i + 1 < n {
            let (res, sk) = rs.data().split_at(h * t);
            for (a, &b) in x.data_mut().iter_mut().zip(res) {
                *a += b;
            }
            for (a, &b) in skip.data_mut().iter_mut().zip(sk) {
                *a += b;
            }
        } else {
            skip.add_assign(&rs)?;
        }
        dilation *= p.dilation_rate;
    }
    Ok(skip)
}
