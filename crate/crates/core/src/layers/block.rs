use crate::error::Result;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

use super::conv::{dilated_conv, dilated_conv_backward};
use super::dropout::{dropout, DropoutMask};
use super::norm::{layer_norm, layer_norm_backward, LayerNormCache};
use super::{Mode, Scheme, LAYER_NORM_EPS};

/// Parameters of one convolutional block: convolution, then layer
/// normalization, then dropout.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvBlockParams<T> {
    /// `[s × in_channels × fs]`
    pub kernel: Tensor<T>,
    pub bias: Tensor<T>,
    pub gamma: Tensor<T>,
    pub beta: Tensor<T>,
}

impl<T: Scalar> ConvBlockParams<T> {
    /// Zero kernel and bias, unit gain, zero shift.
    pub fn neutral(s: usize, in_channels: usize, fs: usize) -> Self {
        ConvBlockParams {
            kernel: Tensor::zeros([s, in_channels, fs]),
            bias: Tensor::zeros([fs]),
            gamma: Tensor::ones([fs]),
            beta: Tensor::zeros([fs]),
        }
    }

    pub fn zeros_like(&self) -> Self {
        ConvBlockParams {
            kernel: Tensor::zeros_like(&self.kernel),
            bias: Tensor::zeros_like(&self.bias),
            gamma: Tensor::zeros_like(&self.gamma),
            beta: Tensor::zeros_like(&self.beta),
        }
    }
}

#[derive(Debug)]
pub struct ConvBlockTape<T> {
    input: Tensor<T>,
    norm: LayerNormCache<T>,
    mask: DropoutMask<T>,
}

pub fn conv_block<T: Scalar>(
    x: &Tensor<T>,
    params: &ConvBlockParams<T>,
    dilation: usize,
    scheme: Scheme,
    rate: f64,
    mode: &mut Mode<'_>,
) -> Result<(Tensor<T>, ConvBlockTape<T>)> {
    let conv = dilated_conv(x, &params.kernel, &params.bias, dilation, scheme)?;
    let (normed, norm) = layer_norm(&conv, &params.gamma, &params.beta, T::lit(LAYER_NORM_EPS))?;
    let (out, mask) = dropout(&normed, rate, mode)?;
    let tape = ConvBlockTape {
        input: x.clone(),
        norm,
        mask,
    };
    Ok((out, tape))
}

pub fn conv_block_backward<T: Scalar>(
    tape: ConvBlockTape<T>,
    params: &ConvBlockParams<T>,
    dilation: usize,
    scheme: Scheme,
    grad_out: &Tensor<T>,
    grads: &mut ConvBlockParams<T>,
) -> Result<Tensor<T>> {
    let g = tape.mask.backward(grad_out)?;
    let g = layer_norm_backward(&tape.norm, &params.gamma, &g, &mut grads.gamma, &mut grads.beta)?;
    dilated_conv_backward(
        &tape.input,
        &params.kernel,
        dilation,
        scheme,
        &g,
        &mut grads.kernel,
        &mut grads.bias,
    )
}

/// Two stacked convolutional blocks sharing one dilation, plus an optional
/// `[n × fs]` projection on the residual path of the first hidden layer when
/// the embedding width differs from the filter count.
#[derive(Clone, Debug, PartialEq)]
pub struct HiddenLayerParams<T> {
    pub first: ConvBlockParams<T>,
    pub second: ConvBlockParams<T>,
    pub projection: Option<Tensor<T>>,
}

impl<T: Scalar> HiddenLayerParams<T> {
    pub fn zeros_like(&self) -> Self {
        HiddenLayerParams {
            first: self.first.zeros_like(),
            second: self.second.zeros_like(),
            projection: self.projection.as_ref().map(Tensor::zeros_like),
        }
    }
}

#[derive(Debug)]
pub struct HiddenLayerTape<T> {
    prev: Tensor<T>,
    pre_activation: Tensor<T>,
    first: ConvBlockTape<T>,
    second: ConvBlockTape<T>,
}

/// `out[t] = ReLU(prev[t] + cblocks[t])`, where `cblocks` is the two-block
/// stack applied to `prev`.
pub fn hidden_layer<T: Scalar>(
    prev: &Tensor<T>,
    params: &HiddenLayerParams<T>,
    dilation: usize,
    scheme: Scheme,
    rate: f64,
    mode: &mut Mode<'_>,
) -> Result<(Tensor<T>, HiddenLayerTape<T>)> {
    let (h1, first) = conv_block(prev, &params.first, dilation, scheme, rate, mode)?;
    let (h2, second) = conv_block(&h1, &params.second, dilation, scheme, rate, mode)?;
    let residual = match &params.projection {
        Some(p) => prev.matmul(p)?,
        None => prev.clone(),
    };
    let pre_activation = residual.add(&h2)?;
    let out = pre_activation.relu();
    let tape = HiddenLayerTape {
        prev: prev.clone(),
        pre_activation,
        first,
        second,
    };
    Ok((out, tape))
}

pub fn hidden_layer_backward<T: Scalar>(
    tape: HiddenLayerTape<T>,
    params: &HiddenLayerParams<T>,
    dilation: usize,
    scheme: Scheme,
    grad_out: &Tensor<T>,
    grads: &mut HiddenLayerParams<T>,
) -> Result<Tensor<T>> {
    let g_pre = grad_out.zip_map(&tape.pre_activation, "relu_backward", |g, z| {
        if z > T::zero() {
            g
        } else {
            T::zero()
        }
    })?;
    let g_h1 = conv_block_backward(tape.second, &params.second, dilation, scheme, &g_pre, &mut grads.second)?;
    let mut g_prev = conv_block_backward(tape.first, &params.first, dilation, scheme, &g_h1, &mut grads.first)?;
    match (&params.projection, grads.projection.as_mut()) {
        (Some(p), Some(gp)) => {
            gp.add_assign(&tape.prev.transpose()?.matmul(&g_pre)?)?;
            g_prev.add_assign(&g_pre.matmul(&p.transpose()?)?)?;
        }
        _ => g_prev.add_assign(&g_pre)?,
    }
    Ok(g_prev)
}
