use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Normalized activations and per-row inverse standard deviations retained
/// for the backward pass.
#[derive(Clone, Debug)]
pub struct LayerNormCache<T> {
    pub normalized: Tensor<T>,
    pub inv_std: Vec<T>,
}

/// Normalizes every row (position) across its channels, then applies the
/// per-channel gain and shift:
///
/// ```text
/// out[t] = gamma ⊙ (x[t] − μ_t) / √(σ²_t + eps) + beta
/// ```
pub fn layer_norm<T: Scalar>(
    x: &Tensor<T>,
    gamma: &Tensor<T>,
    beta: &Tensor<T>,
    eps: T,
) -> Result<(Tensor<T>, LayerNormCache<T>)> {
    let (m, c) = (x.rows(), x.cols());
    if x.rank() != 2 || c == 0 || gamma.shape() != [c] || beta.shape() != [c] {
        return Err(Error::Dimension {
            op: "layer_norm",
            left: x.shape().to_vec(),
            right: gamma.shape().to_vec(),
        });
    }
    let width = T::from_usize(c).expect("channel count fits scalar");
    let mut out = Tensor::zeros([m, c]);
    let mut normalized = Tensor::zeros([m, c]);
    let mut inv_std = Vec::with_capacity(m);
    for t in 0..m {
        let row = x.row(t);
        let mean = row.iter().fold(T::zero(), |a, &v| a + v) / width;
        let var = row.iter().fold(T::zero(), |a, &v| a + (v - mean) * (v - mean)) / width;
        let inv = T::one() / (var + eps).sqrt();
        inv_std.push(inv);
        let xhat = normalized.row_mut(t);
        for (h, &v) in xhat.iter_mut().zip(row) {
            *h = (v - mean) * inv;
        }
        let xhat = normalized.row(t);
        let dst = out.row_mut(t);
        for k in 0..c {
            dst[k] = gamma.data()[k] * xhat[k] + beta.data()[k];
        }
    }
    Ok((out, LayerNormCache { normalized, inv_std }))
}

/// Gradient of [`layer_norm`]. Accumulates into `grad_gamma` and
/// `grad_beta`; returns the gradient with respect to the input.
pub fn layer_norm_backward<T: Scalar>(
    cache: &LayerNormCache<T>,
    gamma: &Tensor<T>,
    grad_out: &Tensor<T>,
    grad_gamma: &mut Tensor<T>,
    grad_beta: &mut Tensor<T>,
) -> Result<Tensor<T>> {
    let xhat = &cache.normalized;
    if grad_out.shape() != xhat.shape() {
        return Err(Error::Dimension {
            op: "layer_norm_backward",
            left: grad_out.shape().to_vec(),
            right: xhat.shape().to_vec(),
        });
    }
    let (m, c) = (xhat.rows(), xhat.cols());
    let width = T::from_usize(c).expect("channel count fits scalar");
    let mut grad_x = Tensor::zeros([m, c]);
    let mut g_hat = vec![T::zero(); c];
    for t in 0..m {
        let g = grad_out.row(t);
        let h = xhat.row(t);
        let mut mean_g = T::zero();
        let mut mean_gh = T::zero();
        for k in 0..c {
            grad_gamma.data_mut()[k] += g[k] * h[k];
            grad_beta.data_mut()[k] += g[k];
            g_hat[k] = g[k] * gamma.data()[k];
            mean_g += g_hat[k];
            mean_gh += g_hat[k] * h[k];
        }
        mean_g /= width;
        mean_gh /= width;
        let inv = cache.inv_std[t];
        let dst = grad_x.row_mut(t);
        for k in 0..c {
            dst[k] = inv * (g_hat[k] - mean_g - h[k] * mean_gh);
        }
    }
    Ok(grad_x)
}
