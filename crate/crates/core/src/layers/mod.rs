//! Encoder and decoder layers, each with a forward pass and a hand-written
//! backward pass.
//!
//! Activations are `[m × channels]` tensors: one row per character position.
//! Every forward function returns its output together with a tape holding
//! whatever the matching backward function needs. Backward functions take the
//! tape by value and accumulate parameter gradients into caller-owned buffers.

mod block;
mod conv;
mod decoder;
mod dropout;
mod embedding;
mod encoder;
mod norm;

use std::fmt;
use std::str::FromStr;

use rand::RngCore;

use crate::error::{Error, Result};

pub use block::{
    conv_block, conv_block_backward, hidden_layer, hidden_layer_backward, ConvBlockParams,
    ConvBlockTape, HiddenLayerParams, HiddenLayerTape,
};
pub use conv::{dilated_conv, dilated_conv_backward};
pub use decoder::{decode, decode_backward, DecoderParams};
pub use dropout::{dropout, DropoutMask};
pub use embedding::{embed, embed_backward};
pub use encoder::{encode, encode_backward, EncoderTape};
pub use norm::{layer_norm, layer_norm_backward, LayerNormCache};

/// Convolution stride. Only unit stride keeps one output per character.
pub const STRIDE: usize = 1;

/// Variance floor inside layer normalization.
pub const LAYER_NORM_EPS: f64 = 1e-5;

/// Which side of the current position the convolution taps read from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Scheme {
    /// Taps at `t, t + d, t + 2d, …`, zero padding after the last position.
    #[default]
    Future,
    /// Taps at `t, t − d, t − 2d, …`, zero padding before the first position.
    Past,
}

impl Scheme {
    /// Input position read by tap `i` for output position `t`, or `None`
    /// when the tap lands in zero padding.
    #[inline]
    pub fn tap(self, t: usize, i: usize, dilation: usize, len: usize) -> Option<usize> {
        let offset = i * dilation;
        match self {
            Scheme::Future => Some(t + offset).filter(|&j| j < len),
            Scheme::Past => t.checked_sub(offset),
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Future => "future",
            Scheme::Past => "past",
        })
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "future" => Ok(Scheme::Future),
            "past" => Ok(Scheme::Past),
            other => Err(Error::Config(format!(
                "unknown scheme `{other}` (expected `future` or `past`)"
            ))),
        }
    }
}

/// Whether a forward pass applies dropout.
pub enum Mode<'a> {
    Infer,
    /// Training mode draws dropout masks from the given stream.
    Train(&'a mut dyn RngCore),
}

impl Mode<'_> {
    pub fn is_train(&self) -> bool {
        matches!(self, Mode::Train(_))
    }
}

/// Shape hyper-parameters of the encoder.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvConfig {
    /// Embedding dimensions.
    pub n: usize,
    /// Filters per convolution (channel count of every hidden layer).
    pub fs: usize,
    /// Number of hidden layers; layer `i` uses dilation `2^i`.
    pub ly: usize,
    /// Kernel size.
    pub s: usize,
    /// Dropout rate inside each convolutional block.
    pub dp: f64,
    pub scheme: Scheme,
}

impl Default for ConvConfig {
    fn default() -> Self {
        ConvConfig {
            n: 100,
            fs: 100,
            ly: 4,
            s: 3,
            dp: 0.3,
            scheme: Scheme::Future,
        }
    }
}

impl ConvConfig {
    pub fn dilation(&self, layer: usize) -> usize {
        1 << layer
    }

    pub fn dilations(&self) -> Vec<usize> {
        (0..self.ly).map(|i| self.dilation(i)).collect()
    }

    /// Farthest input offset an encoder output can see: each hidden layer
    /// holds two blocks spanning `(s − 1)·d` positions apiece.
    pub fn receptive_field(&self) -> usize {
        self.dilations()
            .iter()
            .map(|d| 2 * (self.s - 1) * d)
            .sum()
    }

    /// Layer 0 needs a learned projection on its residual path when the
    /// embedding width differs from the filter count.
    pub fn needs_projection(&self) -> bool {
        self.ly > 0 && self.n != self.fs
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.fs == 0 {
            return Err(Error::Config("n and fs must be positive".into()));
        }
        if self.s == 0 {
            return Err(Error::Config("kernel size s must be positive".into()));
        }
        if self.ly >= 32 {
            return Err(Error::Config(format!("ly = {} is too deep", self.ly)));
        }
        if !(0.0..1.0).contains(&self.dp) {
            return Err(Error::Config(format!(
                "dropout rate dp = {} must lie in [0, 1)",
                self.dp
            )));
        }
        Ok(())
    }
}
