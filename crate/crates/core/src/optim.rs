//! Adam with bias correction.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0) || !(self.eps > 0.0) {
            return Err(Error::Config("Adam needs lr > 0 and eps > 0".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Config("Adam betas must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

/// First and second moment estimates, one pair per parameter tensor, plus
/// the shared step counter.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<T> {
    pub step: u64,
    pub first: Vec<Tensor<T>>,
    pub second: Vec<Tensor<T>>,
}

impl<T: Scalar> AdamState<T> {
    /// Zero moments shaped like the given parameters.
    pub fn new<'a>(shapes: impl IntoIterator<Item = &'a [usize]>) -> Self {
        let first: Vec<Tensor<T>> = shapes.into_iter().map(|s| Tensor::zeros(s.to_vec())).collect();
        AdamState {
            step: 0,
            second: first.clone(),
            first,
        }
    }

    /// One update over every `(name, parameter, gradient)` triple, in the
    /// same order the state was created with. Entries whose gradient is
    /// `None` keep their parameter and moments unchanged.
    ///
    /// Gradients are checked for finiteness before anything is modified.
    pub fn step<'a, S, I>(&mut self, config: &AdamConfig, slots: I) -> Result<()>
    where
        S: AsRef<str>,
        I: IntoIterator<Item = (S, &'a mut Tensor<T>, Option<&'a Tensor<T>>)>,
    {
        let slots: Vec<_> = slots.into_iter().collect();
        if slots.len() != self.first.len() {
            return Err(Error::Config(format!(
                "optimizer tracks {} tensors but received {}",
                self.first.len(),
                slots.len()
            )));
        }
        for (i, (name, param, grad)) in slots.iter().enumerate() {
            if param.shape() != self.first[i].shape() {
                return Err(Error::Dimension {
                    op: "adam_step",
                    left: param.shape().to_vec(),
                    right: self.first[i].shape().to_vec(),
                });
            }
            if let Some(g) = grad {
                if g.shape() != param.shape() {
                    return Err(Error::Dimension {
                        op: "adam_step",
                        left: g.shape().to_vec(),
                        right: param.shape().to_vec(),
                    });
                }
                if !g.all_finite() {
                    return Err(Error::NonFiniteGradient(name.as_ref().to_string()));
                }
            }
        }

        self.step += 1;
        let t = self.step as i32;
        let lr = T::lit(config.lr);
        let b1 = T::lit(config.beta1);
        let b2 = T::lit(config.beta2);
        let eps = T::lit(config.eps);
        let correction1 = T::one() - b1.powi(t);
        let correction2 = T::one() - b2.powi(t);

        for (i, (_, param, grad)) in slots.into_iter().enumerate() {
            let Some(grad) = grad else { continue };
            let m = self.first[i].data_mut();
            let v = self.second[i].data_mut();
            for (((p, &g), m), v) in param.data_mut().iter_mut().zip(grad.data()).zip(m).zip(v) {
                *m = b1 * *m + (T::one() - b1) * g;
                *v = b2 * *v + (T::one() - b2) * g * g;
                let m_hat = *m / correction1;
                let v_hat = *v / correction2;
                *p -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}
