use super::scalar::Scalar;
use super::tensor::Tensor;
use crate::error::{invalid_arg, shape_err, Result};

/// Layer normalization over the last axis.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn layer_norm<S: Scalar>(x: &Tensor<S>, gamma: &Tensor<S>, beta: &Tensor<S>, eps: f64) -> Result<Tensor<S>> {
    let d = *x.shape().last().expect("tensor has at least one axis");
    if gamma.shape() != [d] || beta.shape() != [d] {
        return Err(shape_err!(
            "layer_norm: last dim {d}, gamma {:?}, beta {:?}",
            gamma.shape(),
            beta.shape()
        ));
    }
    if !(eps > 0.0) {
        return Err(invalid_arg!("layer_norm eps must be > 0, got {eps}"));
    }
    let mut out = x.clone();
    let inv_d = S::Acc::from_f64(1.0 / d as f64);
    for row in out.data_mut().chunks_mut(d) {
        let mut sum = S::Acc::zero();
        for &v in row.iter() {
            sum += v.widen();
        }
        let mean = sum * inv_d;
        let mut sq = S::Acc::zero();
        for &v in row.iter() {
            let c = v.widen() - mean;
            sq += c * c;
        }
        let inv_std = S::Acc::one() / (sq * inv_d + S::Acc::from_f64(eps)).sqrt();
        for ((v, &g), &b) in row.iter_mut().zip(gamma.data()).zip(beta.data()) {
            let n = S::narrow((v.widen() - mean) * inv_std);
            *v = n * g + b;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::rng::{rng_fill, Distribution};

    fn ones(d: usize) -> Tensor {
        Tensor::full(&[d], 1.0)
    }

    #[test]
    fn constant_row_collapses_to_beta() {
        let x = Tensor::full(&[2, 6], 3.5f32);
        let y = layer_norm(&x, &ones(6), &Tensor::zeros(&[6]), 1e-5).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_gamma_gives_beta() {
        let x = rng_fill(&[3, 5], 1, Distribution::Normal { mean: 0.0, std: 1.0 }).unwrap();
        let y = layer_norm(&x, &Tensor::zeros(&[5]), &Tensor::full(&[5], 0.25), 1e-5).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.25));
    }

    #[test]
    fn normalized_statistics() {
        let x = rng_fill(&[1, 64], 9, Distribution::Normal { mean: 3.0, std: 5.0 }).unwrap();
        let y = layer_norm(&x, &ones(64), &Tensor::zeros(&[64]), 1e-5).unwrap();
        let m = y.data().iter().map(|&v| v as f64).sum::<f64>() / 64.0;
        let var = y.data().iter().map(|&v| (v as f64 - m).powi(2)).sum::<f64>() / 64.0;
        assert!(m.abs() < 1e-5);
        assert!((var - 1.0).abs() < 1e-3);
    }

    #[test]
    fn rejects_dim_mismatch() {
        let x = Tensor::<f32>::zeros(&[2, 4]);
        assert!(layer_norm(&x, &ones(3), &Tensor::zeros(&[3]), 1e-5).is_err());
    }
}
