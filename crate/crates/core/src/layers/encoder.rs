use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

use super::block::{hidden_layer, hidden_layer_backward, HiddenLayerParams, HiddenLayerTape};
use super::{ConvConfig, Mode};

#[derive(Debug)]
pub struct EncoderTape<T> {
    layers: Vec<HiddenLayerTape<T>>,
}

/// Runs the stack of hidden layers, layer `i` dilated by `2^i`. The output of
/// the last hidden layer is the encoder output; with no layers the input is
/// returned unchanged.
pub fn encode<T: Scalar>(
    input: &Tensor<T>,
    layers: &[HiddenLayerParams<T>],
    config: &ConvConfig,
    mode: &mut Mode<'_>,
) -> Result<(Tensor<T>, EncoderTape<T>)> {
    if input.rows() == 0 || input.rank() != 2 {
        return Err(Error::Domain("encode needs at least one position".into()));
    }
    if layers.len() != config.ly {
        return Err(Error::Config(format!(
            "encoder has {} layers but config says ly = {}",
            layers.len(),
            config.ly
        )));
    }
    let mut h = input.clone();
    let mut tapes = Vec::with_capacity(layers.len());
    for (i, params) in layers.iter().enumerate() {
        let (next, tape) = hidden_layer(&h, params, config.dilation(i), config.scheme, config.dp, mode)?;
        tapes.push(tape);
        h = next;
    }
    Ok((h, EncoderTape { layers: tapes }))
}

pub fn encode_backward<T: Scalar>(
    tape: EncoderTape<T>,
    layers: &[HiddenLayerParams<T>],
    config: &ConvConfig,
    grad_out: &Tensor<T>,
    grads: &mut [HiddenLayerParams<T>],
) -> Result<Tensor<T>> {
    let mut g = grad_out.clone();
    for (i, layer_tape) in tape.layers.into_iter().enumerate().rev() {
        g = hidden_layer_backward(layer_tape, &layers[i], config.dilation(i), config.scheme, &g, &mut grads[i])?;
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layers::Scheme;
    use crate::model::ModelParams;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_input(m: usize, n: usize, rng: &mut impl Rng) -> Tensor<f64> {
        Tensor::from_vec([m, n], (0..m * n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    fn setup(config: &ConvConfig, seed: u64) -> Vec<HiddenLayerParams<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let table = Tensor::zeros([1, config.n]);
        let mut params = ModelParams::init(config, table, &mut rng).unwrap();
        // Nonzero shifts so the residual path is not the only signal.
        for layer in &mut params.layers {
            for block in [&mut layer.first, &mut layer.second] {
                for v in block.bias.data_mut().iter_mut().chain(block.beta.data_mut()) {
                    *v = rng.gen_range(-0.1..0.1);
                }
            }
        }
        params.layers
    }

    #[test]
    fn no_layers_is_identity() {
        let config = ConvConfig { n: 5, fs: 5, ly: 0, ..ConvConfig::default() };
        let x = random_input(7, 5, &mut ChaCha8Rng::seed_from_u64(1));
        let (out, _) = encode(&x, &[], &config, &mut Mode::Infer).unwrap();
        assert_eq!(out, x);
    }

    #[test]
    fn rejects_wrong_layer_count() {
        let config = ConvConfig { n: 4, fs: 4, ly: 2, ..ConvConfig::default() };
        let layers = setup(&config, 3);
        let x = Tensor::zeros([3, 4]);
        assert!(encode(&x, &layers[..1], &config, &mut Mode::Infer).is_err());
    }

    fn changed_rows(a: &Tensor<f64>, b: &Tensor<f64>) -> Vec<usize> {
        (0..a.rows()).filter(|&t| a.row(t) != b.row(t)).collect()
    }

    #[test]
    fn influence_stays_inside_receptive_field() {
        for scheme in [Scheme::Future, Scheme::Past] {
            let config = ConvConfig { n: 6, fs: 6, ly: 3, s: 2, scheme, ..ConvConfig::default() };
            let reach = config.receptive_field();
            assert_eq!(reach, 14);
            let layers = setup(&config, 11);
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            let x = random_input(30, 6, &mut rng);
            let (base, _) = encode(&x, &layers, &config, &mut Mode::Infer).unwrap();
            let p = 15;
            let mut y = x.clone();
            y.set(p, 2, y.get(p, 2) + 1.0);
            let (moved, _) = encode(&y, &layers, &config, &mut Mode::Infer).unwrap();
            let changed = changed_rows(&base, &moved);
            assert!(changed.contains(&p));
            for t in changed {
                let delta = p as isize - t as isize;
                match scheme {
                    Scheme::Future => assert!((0..=reach as isize).contains(&delta), "t = {t}"),
                    Scheme::Past => assert!((-(reach as isize)..=0).contains(&delta), "t = {t}"),
                }
            }
        }
    }

    fn reversed(x: &Tensor<f64>) -> Tensor<f64> {
        let rows: Vec<Vec<f64>> = (0..x.rows()).rev().map(|t| x.row(t).to_vec()).collect();
        Tensor::from_rows(&rows).unwrap()
    }

    #[test]
    fn past_scheme_mirrors_future_scheme() {
        let future = ConvConfig { n: 4, fs: 6, ly: 2, s: 3, ..ConvConfig::default() };
        let past = ConvConfig { scheme: Scheme::Past, ..future.clone() };
        let layers = setup(&future, 21);
        let x = random_input(12, 4, &mut ChaCha8Rng::seed_from_u64(8));
        let (a, _) = encode(&x, &layers, &future, &mut Mode::Infer).unwrap();
        let (b, _) = encode(&reversed(&x), &layers, &past, &mut Mode::Infer).unwrap();
        assert_eq!(reversed(&a), b);
    }
}
