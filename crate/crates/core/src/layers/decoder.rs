use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{axpy, dot, Tensor};

/// Dense layer mapping each encoder row to one raw score per label.
#[derive(Clone, Debug, PartialEq)]
pub struct DecoderParams<T> {
    /// `[fs × labels]`
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

impl<T: Scalar> DecoderParams<T> {
    pub fn zeros_like(&self) -> Self {
        DecoderParams {
            weight: Tensor::zeros_like(&self.weight),
            bias: Tensor::zeros_like(&self.bias),
        }
    }
}

/// `score[t] = h[t] · weight + bias`, no nonlinearity.
pub fn decode<T: Scalar>(h: &Tensor<T>, params: &DecoderParams<T>) -> Result<Tensor<T>> {
    let labels = params.bias.len();
    if params.weight.shape() != [h.cols(), labels] {
        return Err(Error::Dimension {
            op: "decode",
            left: h.shape().to_vec(),
            right: params.weight.shape().to_vec(),
        });
    }
    let mut out = h.matmul(&params.weight)?;
    for t in 0..out.rows() {
        axpy(T::one(), params.bias.data(), out.row_mut(t));
    }
    Ok(out)
}

/// Accumulates weight and bias gradients; returns the gradient w.r.t. `h`.
pub fn decode_backward<T: Scalar>(
    h: &Tensor<T>,
    params: &DecoderParams<T>,
    grad_score: &Tensor<T>,
    grads: &mut DecoderParams<T>,
) -> Result<Tensor<T>> {
    let labels = params.bias.len();
    if grad_score.shape() != [h.rows(), labels] {
        return Err(Error::Dimension {
            op: "decode_backward",
            left: grad_score.shape().to_vec(),
            right: vec![h.rows(), labels],
        });
    }
    let fs = h.cols();
    let mut grad_h = Tensor::zeros([h.rows(), fs]);
    for t in 0..h.rows() {
        let g = grad_score.row(t);
        axpy(T::one(), g, grads.bias.data_mut());
        let hr = h.row(t);
        let gw = grads.weight.data_mut();
        for k in 0..fs {
            axpy(hr[k], g, &mut gw[k * labels..(k + 1) * labels]);
        }
        let gh = grad_h.row_mut(t);
        for k in 0..fs {
            gh[k] = dot(params.weight.row(k), g);
        }
    }
    Ok(grad_h)
}
