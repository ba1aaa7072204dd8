use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{axpy, Tensor};

/// Looks up one table row per character index, producing the `[m × n]`
/// encoder input.
pub fn embed<T: Scalar>(chars: &[usize], table: &Tensor<T>) -> Result<Tensor<T>> {
    let (v, n) = (table.rows(), table.cols());
    let mut out = Tensor::zeros([chars.len(), n]);
    for (t, &c) in chars.iter().enumerate() {
        if c >= v {
            return Err(Error::Vocabulary { index: c, size: v });
        }
        out.row_mut(t).copy_from_slice(table.row(c));
    }
    Ok(out)
}

/// Scatters the output gradient back into the selected table rows, summing
/// over repeated indices.
pub fn embed_backward<T: Scalar>(chars: &[usize], grad_out: &Tensor<T>, grad_table: &mut Tensor<T>) -> Result<()> {
    if grad_out.rows() != chars.len() || grad_out.cols() != grad_table.cols() {
        return Err(Error::Dimension {
            op: "embed_backward",
            left: grad_out.shape().to_vec(),
            right: grad_table.shape().to_vec(),
        });
    }
    for (t, &c) in chars.iter().enumerate() {
        if c >= grad_table.rows() {
            return Err(Error::Vocabulary {
                index: c,
                size: grad_table.rows(),
            });
        }
        axpy(T::one(), grad_out.row(t), grad_table.row_mut(c));
    }
    Ok(())
}
