//! Chinese word segmentation with a dilated temporal convolutional encoder,
//! a dense label decoder and a linear-chain CRF head.
//!
//! Each character is tagged `B`, `M`, `E` or `S`. The encoder stacks hidden
//! layers of two convolutional blocks (dilated convolution, layer
//! normalization, dropout) joined by a ReLU residual; layer `i` is dilated by
//! `2^i`. The decoder maps every position to four raw scores, the CRF is
//! trained on the sequence negative log-likelihood, and inference decodes with
//! Viterbi.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`); training and
//! checkpoints use `f64`, exposed through the aliases below.

pub mod checkpoint;
pub mod config;
pub mod corpus;
pub mod crf;
pub mod error;
pub mod eval;
pub mod layers;
pub mod model;
pub mod optim;
pub mod scalar;
pub mod segment;
pub mod tensor;
pub mod train;

pub use crate::crf::{Tag, NUM_TAGS};
pub use crate::error::{Error, Result};
pub use crate::scalar::Scalar;

/// Double-precision tensor, the type used for training and checkpoints.
pub type Tensor = tensor::Tensor<f64>;
pub type Tensor32 = tensor::Tensor<f32>;
pub type ModelParams = model::ModelParams<f64>;
pub type Segmenter = model::Segmenter<f64>;
pub type Segmenter32 = model::Segmenter<f32>;
pub type AdamState = optim::AdamState<f64>;
