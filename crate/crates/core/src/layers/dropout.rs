use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

use super::Mode;

/// Per-element multipliers applied by a dropout call: `0` for dropped
/// elements, `1 / (1 − rate)` for survivors, all ones at inference.
#[derive(Clone, Debug, PartialEq)]
pub struct DropoutMask<T>(pub Tensor<T>);

impl<T: Scalar> DropoutMask<T> {
    pub fn backward(&self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        grad_out.mul(&self.0)
    }
}

/// Inverted dropout. Identity in [`Mode::Infer`] and when `rate` is zero.
pub fn dropout<T: Scalar>(x: &Tensor<T>, rate: f64, mode: &mut Mode<'_>) -> Result<(Tensor<T>, DropoutMask<T>)> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::Config(format!("dropout rate {rate} must lie in [0, 1)")));
    }
    let rng = match mode {
        Mode::Train(rng) if rate > 0.0 => rng,
        _ => return Ok((x.clone(), DropoutMask(Tensor::ones(x.shape().to_vec())))),
    };
    let keep = T::lit(1.0 / (1.0 - rate));
    let mask = Tensor::from_vec(
        x.shape().to_vec(),
        (0..x.len())
            .map(|_| if rng.gen::<f64>() < rate { T::zero() } else { keep })
            .collect(),
    )?;
    Ok((x.mul(&mask)?, DropoutMask(mask)))
}
