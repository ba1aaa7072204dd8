//! The full segmenter: embedding lookup, convolutional encoder, dense
//! decoder and CRF head, with named parameter access for the optimizer and
//! checkpoints.

use rand::Rng;

use crate::corpus::Batch;
use crate::crf::{self, Tag, NUM_TAGS};
use crate::error::{Error, Result};
use crate::layers::{
    decode, decode_backward, embed, embed_backward, encode, encode_backward, ConvBlockParams, ConvConfig,
    DecoderParams, EncoderTape, HiddenLayerParams, Mode,
};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Every trainable tensor of the model. Also used, zero-initialized, as the
/// gradient accumulator.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams<T> {
    /// `[V × n]`
    pub embeddings: Tensor<T>,
    pub layers: Vec<HiddenLayerParams<T>>,
    pub decoder: DecoderParams<T>,
    /// `[4 × 4]`, entry `(r, c)` weights label `r` followed by label `c`.
    pub transitions: Tensor<T>,
}

/// Name of the embedding table in [`ModelParams::named`] order.
pub const EMBEDDINGS: &str = "embeddings";

fn glorot<T: Scalar>(shape: &[usize], fan_in: usize, fan_out: usize, rng: &mut impl Rng) -> Tensor<T> {
    let r = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let len = shape.iter().product();
    let data = (0..len).map(|_| T::lit(rng.gen_range(-r..r))).collect();
    Tensor::from_vec(shape.to_vec(), data).expect("shape matches data")
}

impl<T: Scalar> ModelParams<T> {
    /// Fresh parameters. Kernels, the projection and the decoder weight are
    /// Glorot-uniform; biases and shifts zero; gains one; transitions zero.
    /// The embedding table is supplied by the caller.
    pub fn init(config: &ConvConfig, embeddings: Tensor<T>, rng: &mut impl Rng) -> Result<Self> {
        config.validate()?;
        if embeddings.rank() != 2 || embeddings.cols() != config.n {
            return Err(Error::Dimension {
                op: "embedding table",
                left: embeddings.shape().to_vec(),
                right: vec![embeddings.rows(), config.n],
            });
        }
        let (s, fs) = (config.s, config.fs);
        let block = |c_in: usize, rng: &mut _| {
            let mut p = ConvBlockParams::neutral(s, c_in, fs);
            p.kernel = glorot(&[s, c_in, fs], s * c_in, s * fs, rng);
            p
        };
        let mut layers = Vec::with_capacity(config.ly);
        for i in 0..config.ly {
            let c_in = if i == 0 { config.n } else { fs };
            let first = block(c_in, rng);
            let second = block(fs, rng);
            let projection = (i == 0 && config.needs_projection()).then(|| glorot(&[config.n, fs], config.n, fs, rng));
            layers.push(HiddenLayerParams {
                first,
                second,
                projection,
            });
        }
        let width = if config.ly == 0 { config.n } else { fs };
        let decoder = DecoderParams {
            weight: glorot(&[width, NUM_TAGS], width, NUM_TAGS, rng),
            bias: Tensor::zeros([NUM_TAGS]),
        };
        Ok(ModelParams {
            embeddings,
            layers,
            decoder,
            transitions: Tensor::zeros([NUM_TAGS, NUM_TAGS]),
        })
    }

    pub fn zeros_like(&self) -> Self {
        ModelParams {
            embeddings: Tensor::zeros_like(&self.embeddings),
            layers: self.layers.iter().map(HiddenLayerParams::zeros_like).collect(),
            decoder: self.decoder.zeros_like(),
            transitions: Tensor::zeros_like(&self.transitions),
        }
    }

    /// Every tensor with its stable name, in a fixed order.
    pub fn named(&self) -> Vec<(String, &Tensor<T>)> {
        let mut out = vec![(EMBEDDINGS.to_string(), &self.embeddings)];
        for (i, layer) in self.layers.iter().enumerate() {
            for (b, block) in [("block0", &layer.first), ("block1", &layer.second)] {
                out.push((format!("layer{i}.{b}.kernel"), &block.kernel));
                out.push((format!("layer{i}.{b}.bias"), &block.bias));
                out.push((format!("layer{i}.{b}.gamma"), &block.gamma));
                out.push((format!("layer{i}.{b}.beta"), &block.beta));
            }
            if let Some(p) = &layer.projection {
                out.push((format!("layer{i}.projection"), p));
            }
        }
        out.push(("decoder.weight".into(), &self.decoder.weight));
        out.push(("decoder.bias".into(), &self.decoder.bias));
        out.push(("crf.transitions".into(), &self.transitions));
        out
    }

    /// Mutable counterpart of [`ModelParams::named`], same order.
    pub fn named_mut(&mut self) -> Vec<(String, &mut Tensor<T>)> {
        let mut out = vec![(EMBEDDINGS.to_string(), &mut self.embeddings)];
        for (i, layer) in self.layers.iter_mut().enumerate() {
            for (b, block) in [("block0", &mut layer.first), ("block1", &mut layer.second)] {
                out.push((format!("layer{i}.{b}.kernel"), &mut block.kernel));
                out.push((format!("layer{i}.{b}.bias"), &mut block.bias));
                out.push((format!("layer{i}.{b}.gamma"), &mut block.gamma));
                out.push((format!("layer{i}.{b}.beta"), &mut block.beta));
            }
            if let Some(p) = &mut layer.projection {
                out.push((format!("layer{i}.projection"), p));
            }
        }
        out.push(("decoder.weight".into(), &mut self.decoder.weight));
        out.push(("decoder.bias".into(), &mut self.decoder.bias));
        out.push(("crf.transitions".into(), &mut self.transitions));
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.named().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn scale_assign(&mut self, k: T) {
        for (_, t) in self.named_mut() {
            t.scale_assign(k);
        }
    }

    pub fn fill_zero(&mut self) {
        for (_, t) in self.named_mut() {
            t.fill(T::zero());
        }
    }

    pub fn cast<U: Scalar>(&self) -> ModelParams<U> {
        let block = |b: &ConvBlockParams<T>| ConvBlockParams {
            kernel: b.kernel.cast(),
            bias: b.bias.cast(),
            gamma: b.gamma.cast(),
            beta: b.beta.cast(),
        };
        ModelParams {
            embeddings: self.embeddings.cast(),
            layers: self
                .layers
                .iter()
                .map(|l| HiddenLayerParams {
                    first: block(&l.first),
                    second: block(&l.second),
                    projection: l.projection.as_ref().map(Tensor::cast),
                })
                .collect(),
            decoder: DecoderParams {
                weight: self.decoder.weight.cast(),
                bias: self.decoder.bias.cast(),
            },
            transitions: self.transitions.cast(),
        }
    }
}

/// Expected `(name, shape)` of every tensor for a configuration and
/// vocabulary size, in [`ModelParams::named`] order.
pub fn expected_shapes(config: &ConvConfig, vocab_size: usize) -> Vec<(String, Vec<usize>)> {
    let (s, fs) = (config.s, config.fs);
    let mut out = vec![(EMBEDDINGS.to_string(), vec![vocab_size, config.n])];
    for i in 0..config.ly {
        let c_in = if i == 0 { config.n } else { fs };
        for (b, cin) in [("block0", c_in), ("block1", fs)] {
            out.push((format!("layer{i}.{b}.kernel"), vec![s, cin, fs]));
            out.push((format!("layer{i}.{b}.bias"), vec![fs]));
            out.push((format!("layer{i}.{b}.gamma"), vec![fs]));
            out.push((format!("layer{i}.{b}.beta"), vec![fs]));
        }
        if i == 0 && config.needs_projection() {
            out.push(("layer0.projection".into(), vec![config.n, fs]));
        }
    }
    let width = if config.ly == 0 { config.n } else { fs };
    out.push(("decoder.weight".into(), vec![width, NUM_TAGS]));
    out.push(("decoder.bias".into(), vec![NUM_TAGS]));
    out.push(("crf.transitions".into(), vec![NUM_TAGS, NUM_TAGS]));
    out
}

/// Activations kept from [`Segmenter::forward`] for the backward pass.
#[derive(Debug)]
pub struct ForwardTape<T> {
    chars: Vec<usize>,
    encoder: EncoderTape<T>,
    encoded: Tensor<T>,
}

/// Configuration plus parameters: everything needed to score and decode.
#[derive(Clone, Debug, PartialEq)]
pub struct Segmenter<T> {
    pub config: ConvConfig,
    pub params: ModelParams<T>,
}

impl<T: Scalar> Segmenter<T> {
    pub fn new(config: ConvConfig, params: ModelParams<T>) -> Result<Self> {
        config.validate()?;
        let expected = expected_shapes(&config, params.embeddings.rows());
        let actual = params.named();
        if expected.len() != actual.len() {
            return Err(Error::Config(format!(
                "configuration expects {} tensors, parameters have {}",
                expected.len(),
                actual.len()
            )));
        }
        for ((en, es), (an, at)) in expected.iter().zip(&actual) {
            if en != an || es.as_slice() != at.shape() {
                return Err(Error::Dimension {
                    op: "parameter shape",
                    left: at.shape().to_vec(),
                    right: es.clone(),
                });
            }
        }
        Ok(Segmenter { config, params })
    }

    /// Per-position label scores for a sentence of vocabulary indices.
    pub fn forward(&self, chars: &[usize], mode: &mut Mode<'_>) -> Result<(Tensor<T>, ForwardTape<T>)> {
        if chars.is_empty() {
            return Err(Error::Domain("cannot score an empty sentence".into()));
        }
        let input = embed(chars, &self.params.embeddings)?;
        let (encoded, encoder) = encode(&input, &self.params.layers, &self.config, mode)?;
        let score = decode(&encoded, &self.params.decoder)?;
        let tape = ForwardTape {
            chars: chars.to_vec(),
            encoder,
            encoded,
        };
        Ok((score, tape))
    }

    pub fn scores(&self, chars: &[usize]) -> Result<Tensor<T>> {
        Ok(self.forward(chars, &mut Mode::Infer)?.0)
    }

    /// Back-propagates a score gradient, accumulating into `grads`.
    pub fn backward(&self, tape: ForwardTape<T>, grad_score: &Tensor<T>, grads: &mut ModelParams<T>) -> Result<()> {
        let g_encoded = decode_backward(&tape.encoded, &self.params.decoder, grad_score, &mut grads.decoder)?;
        let g_input = encode_backward(tape.encoder, &self.params.layers, &self.config, &g_encoded, &mut grads.layers)?;
        embed_backward(&tape.chars, &g_input, &mut grads.embeddings)
    }

    /// CRF negative log-likelihood of `gold`.
    pub fn loss(&self, chars: &[usize], gold: &[Tag], mode: &mut Mode<'_>) -> Result<T> {
        let (score, _) = self.forward(chars, mode)?;
        crf::nll_loss(&score, &self.params.transitions, gold)
    }

    /// Loss of one sentence; its gradient is added into `grads`.
    pub fn loss_and_gradient(
        &self,
        chars: &[usize],
        gold: &[Tag],
        mode: &mut Mode<'_>,
        grads: &mut ModelParams<T>,
    ) -> Result<T> {
        let (score, tape) = self.forward(chars, mode)?;
        let crf_grads = crf::loss_backward(&score, &self.params.transitions, gold)?;
        grads.transitions.add_assign(&crf_grads.transitions)?;
        self.backward(tape, &crf_grads.score, grads)?;
        Ok(crf_grads.loss)
    }

    /// Summed loss over the members of a padded batch; padding never reaches
    /// the model.
    pub fn batch_loss(&self, batch: &Batch, mode: &mut Mode<'_>) -> Result<T> {
        let mut total = T::zero();
        for i in 0..batch.len() {
            let (chars, gold) = batch.row(i);
            total += self.loss(chars, gold, mode)?;
        }
        Ok(total)
    }

    /// Summed loss over a batch, gradients accumulated into `grads`.
    pub fn batch_loss_and_gradient(&self, batch: &Batch, mode: &mut Mode<'_>, grads: &mut ModelParams<T>) -> Result<T> {
        let mut total = T::zero();
        for i in 0..batch.len() {
            let (chars, gold) = batch.row(i);
            total += self.loss_and_gradient(chars, gold, mode, grads)?;
        }
        Ok(total)
    }

    /// Viterbi labels at inference.
    pub fn predict(&self, chars: &[usize]) -> Result<Vec<Tag>> {
        let score = self.scores(chars)?;
        Ok(crf::viterbi(&score, &self.params.transitions)?.labels)
    }
}
