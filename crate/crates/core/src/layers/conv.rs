use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{axpy, dot, Tensor};

use super::Scheme;

fn check_shapes<T: Scalar>(x: &Tensor<T>, kernel: &Tensor<T>, dilation: usize) -> Result<(usize, usize, usize, usize)> {
    let (s, c_in, fs) = match kernel.shape() {
        &[s, c_in, fs] => (s, c_in, fs),
        other => {
            return Err(Error::Dimension {
                op: "dilated_conv kernel",
                left: other.to_vec(),
                right: vec![0, 0, 0],
            })
        }
    };
    if x.rank() != 2 || x.cols() != c_in {
        return Err(Error::Dimension {
            op: "dilated_conv",
            left: x.shape().to_vec(),
            right: kernel.shape().to_vec(),
        });
    }
    if dilation == 0 {
        return Err(Error::Domain("dilation must be at least 1".into()));
    }
    if x.rows() == 0 {
        return Err(Error::Domain("dilated_conv of an empty sequence".into()));
    }
    Ok((x.rows(), s, c_in, fs))
}

/// One-dimensional dilated convolution with unit stride and zero padding on
/// the far side of the taps, so the output has as many rows as the input.
///
/// `kernel` is `[s × c_in × fs]`; output row `t` is
/// `bias + Σ_i kernel[i]ᵀ · x[tap(t, i)]`.
pub fn dilated_conv<T: Scalar>(
    x: &Tensor<T>,
    kernel: &Tensor<T>,
    bias: &Tensor<T>,
    dilation: usize,
    scheme: Scheme,
) -> Result<Tensor<T>> {
    let (m, s, c_in, fs) = check_shapes(x, kernel, dilation)?;
    if bias.shape() != [fs] {
        return Err(Error::Dimension {
            op: "dilated_conv bias",
            left: bias.shape().to_vec(),
            right: vec![fs],
        });
    }
    let k = kernel.data();
    let mut out = Tensor::zeros([m, fs]);
    for t in 0..m {
        let dst = out.row_mut(t);
        dst.copy_from_slice(bias.data());
        for i in 0..s {
            let Some(j) = scheme.tap(t, i, dilation, m) else {
                continue;
            };
            let tap = &k[i * c_in * fs..(i + 1) * c_in * fs];
            for (c, &xv) in x.row(j).iter().enumerate() {
                axpy(xv, &tap[c * fs..(c + 1) * fs], dst);
            }
        }
    }
    Ok(out)
}

/// Gradient of [`dilated_conv`]. Accumulates into `grad_kernel` and
/// `grad_bias`; returns the gradient with respect to `x`.
pub fn dilated_conv_backward<T: Scalar>(
    x: &Tensor<T>,
    kernel: &Tensor<T>,
    dilation: usize,
    scheme: Scheme,
    grad_out: &Tensor<T>,
    grad_kernel: &mut Tensor<T>,
    grad_bias: &mut Tensor<T>,
) -> Result<Tensor<T>> {
    let (m, s, c_in, fs) = check_shapes(x, kernel, dilation)?;
    if grad_out.shape() != [m, fs] {
        return Err(Error::Dimension {
            op: "dilated_conv_backward",
            left: grad_out.shape().to_vec(),
            right: vec![m, fs],
        });
    }
    let k = kernel.data();
    let mut grad_x = Tensor::zeros([m, c_in]);
    for t in 0..m {
        let g = grad_out.row(t);
        axpy(T::one(), g, grad_bias.data_mut());
        for i in 0..s {
            let Some(j) = scheme.tap(t, i, dilation, m) else {
                continue;
            };
            let tap = &k[i * c_in * fs..(i + 1) * c_in * fs];
            let gk = &mut grad_kernel.data_mut()[i * c_in * fs..(i + 1) * c_in * fs];
            let xr = x.row(j);
            for c in 0..c_in {
                axpy(xr[c], g, &mut gk[c * fs..(c + 1) * fs]);
            }
            let gx = grad_x.row_mut(j);
            for c in 0..c_in {
                gx[c] += dot(&tap[c * fs..(c + 1) * fs], g);
            }
        }
    }
    Ok(grad_x)
}
