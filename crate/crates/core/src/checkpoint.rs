//! Binary checkpoint format.
//!
//! ```text
//! magic    "TCNCRF"
//! version  u8
//! config   u32 byte length + UTF-8 `key = value` text (training config and
//!          `state.*` lines for epoch, optimizer step and best dev F)
//! vocab    u32 byte length + UTF-8 non-reserved characters in index order
//! tensors  u32 count, then per tensor:
//!          u32 name length + UTF-8 name, u8 rank, rank × u64 extents,
//!          little-endian f64 values in row-major order
//! ```
//!
//! All integers are little-endian. Tensors are the model parameters followed
//! by the Adam first moments (`adam.m.*`) and second moments (`adam.v.*`).

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::config::TrainConfig;
use crate::corpus::Vocabulary;
use crate::error::{Error, Result};
use crate::layers::{ConvBlockParams, DecoderParams, HiddenLayerParams};
use crate::model::{expected_shapes, ModelParams, Segmenter};
use crate::optim::AdamState;
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 6] = b"TCNCRF";
pub const VERSION: u8 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub config: TrainConfig,
    pub vocab: Vocabulary,
    pub params: ModelParams<f64>,
    pub optimizer: AdamState<f64>,
    pub epoch: usize,
    pub best_dev_f: Option<f64>,
}

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }

    fn u32(&mut self, v: usize) {
        let v = u32::try_from(v).expect("block shorter than 4 GiB");
        self.0.extend_from_slice(&v.to_le_bytes());
    }

    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }

    fn text(&mut self, s: &str) {
        self.u32(s.len());
        self.0.extend_from_slice(s.as_bytes());
    }

    fn tensor(&mut self, name: &str, t: &Tensor<f64>) {
        self.text(name);
        self.u8(t.rank() as u8);
        for &e in t.shape() {
            self.u64(e as u64);
        }
        for v in t.data() {
            self.0.extend_from_slice(&v.to_le_bytes());
        }
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn fail<V>(&self, message: impl Into<String>) -> Result<V> {
        Err(Error::Checkpoint {
            offset: self.pos as u64,
            message: message.into(),
        })
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return self.fail(format!("truncated while reading {what}"));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u32(&mut self, what: &str) -> Result<usize> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes(b.try_into().expect("4 bytes")) as usize)
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        let b = self.take(8, what)?;
        Ok(u64::from_le_bytes(b.try_into().expect("8 bytes")))
    }

    fn text(&mut self, what: &str) -> Result<&'a str> {
        let len = self.u32(what)?;
        let start = self.pos;
        let b = self.take(len, what)?;
        std::str::from_utf8(b).map_err(|e| Error::Checkpoint {
            offset: (start + e.valid_up_to()) as u64,
            message: format!("{what} is not valid UTF-8"),
        })
    }

    fn tensor(&mut self, name: &str, shape: &[usize]) -> Result<Tensor<f64>> {
        let start = self.pos;
        let found = self.text("tensor name")?;
        if found != name {
            self.pos = start;
            return self.fail(format!("expected tensor `{name}`, found `{found}`"));
        }
        let rank = self.u8("tensor rank")? as usize;
        let mut extents = Vec::with_capacity(rank);
        for _ in 0..rank {
            extents.push(self.u64("tensor extent")? as usize);
        }
        if extents != shape {
            return self.fail(format!("tensor `{name}` has shape {extents:?}, configuration expects {shape:?}"));
        }
        let len: usize = shape.iter().product();
        let raw = self.take(len * 8, "tensor data")?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        Tensor::from_vec(extents, data)
    }
}

const STATE_EPOCH: &str = "state.epoch";
const STATE_STEP: &str = "state.adam_step";
const STATE_BEST: &str = "state.best_dev_f";

fn rebuild_params(config: &TrainConfig, mut tensors: std::vec::IntoIter<Tensor<f64>>) -> ModelParams<f64> {
    let mut next = || tensors.next().expect("tensor count checked");
    let embeddings = next();
    let mut layers = Vec::with_capacity(config.conv.ly);
    for i in 0..config.conv.ly {
        let mut block = || ConvBlockParams {
            kernel: next(),
            bias: next(),
            gamma: next(),
            beta: next(),
        };
        let first = block();
        let second = block();
        let projection = (i == 0 && config.conv.needs_projection()).then(&mut next);
        layers.push(HiddenLayerParams {
            first,
            second,
            projection,
        });
    }
    let decoder = DecoderParams {
        weight: next(),
        bias: next(),
    };
    ModelParams {
        embeddings,
        layers,
        decoder,
        transitions: next(),
    }
}

impl Checkpoint {
    pub fn segmenter(&self) -> Result<Segmenter<f64>> {
        Segmenter::new(self.config.conv.clone(), self.params.clone())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer(Vec::new());
        w.0.extend_from_slice(MAGIC);
        w.u8(VERSION);
        let mut text = self.config.to_text();
        let _ = writeln!(text, "{STATE_EPOCH} = {}", self.epoch);
        let _ = writeln!(text, "{STATE_STEP} = {}", self.optimizer.step);
        match self.best_dev_f {
            Some(f) => {
                let _ = writeln!(text, "{STATE_BEST} = {f}");
            }
            None => {
                let _ = writeln!(text, "{STATE_BEST} = none");
            }
        }
        w.text(&text);
        w.text(&self.vocab.chars().iter().collect::<String>());
        let named = self.params.named();
        w.u32(named.len() * 3);
        for (name, t) in &named {
            w.tensor(name, t);
        }
        for (prefix, moments) in [("adam.m.", &self.optimizer.first), ("adam.v.", &self.optimizer.second)] {
            for ((name, _), t) in named.iter().zip(moments) {
                w.tensor(&format!("{prefix}{name}"), t);
            }
        }
        w.0
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(MAGIC.len(), "magic")? != MAGIC {
            r.pos = 0;
            return r.fail("not a checkpoint (bad magic)");
        }
        let version = r.u8("version")?;
        if version != VERSION {
            r.pos -= 1;
            return r.fail(format!("unsupported checkpoint version {version} (supported: {VERSION})"));
        }
        let config_start = r.pos;
        let text = r.text("config block")?;
        let (mut epoch, mut step, mut best) = (None, None, None);
        let mut config_lines = String::new();
        for line in text.lines() {
            match line.split_once('=').map(|(k, v)| (k.trim(), v.trim())) {
                Some((STATE_EPOCH, v)) => epoch = v.parse::<usize>().ok(),
                Some((STATE_STEP, v)) => step = v.parse::<u64>().ok(),
                Some((STATE_BEST, "none")) => best = Some(None),
                Some((STATE_BEST, v)) => best = v.parse::<f64>().ok().map(Some),
                _ => {
                    config_lines.push_str(line);
                    config_lines.push('\n');
                }
            }
        }
        let config = TrainConfig::parse(&config_lines).map_err(|e| Error::Checkpoint {
            offset: config_start as u64,
            message: e.to_string(),
        })?;
        let (Some(epoch), Some(step), Some(best_dev_f)) = (epoch, step, best) else {
            r.pos = config_start;
            return r.fail("config block lacks training state");
        };
        let vocab = Vocabulary::from_chars(r.text("vocabulary block")?.chars());
        let expected = expected_shapes(&config.conv, vocab.len());
        let count_at = r.pos;
        let count = r.u32("tensor count")?;
        if count != expected.len() * 3 {
            r.pos = count_at;
            return r.fail(format!(
                "checkpoint holds {count} tensors, configuration expects {}",
                expected.len() * 3
            ));
        }
        let mut read_group = |prefix: &str| -> Result<Vec<Tensor<f64>>> {
            expected
                .iter()
                .map(|(name, shape)| r.tensor(&format!("{prefix}{name}"), shape))
                .collect()
        };
        let params = read_group("")?;
        let first = read_group("adam.m.")?;
        let second = read_group("adam.v.")?;
        if r.pos != bytes.len() {
            return r.fail("trailing bytes after last tensor");
        }
        Ok(Checkpoint {
            params: rebuild_params(&config, params.into_iter()),
            optimizer: AdamState { step, first, second },
            config,
            vocab,
            epoch,
            best_dev_f,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    /// Human-readable description: configuration, vocabulary size, tensor
    /// shapes, parameter count and best dev F.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "format version   {VERSION}");
        let _ = writeln!(out, "epoch            {}", self.epoch);
        let _ = writeln!(out, "optimizer steps  {}", self.optimizer.step);
        match self.best_dev_f {
            Some(f) => {
                let _ = writeln!(out, "best dev F       {f}");
            }
            None => {
                let _ = writeln!(out, "best dev F       none");
            }
        }
        let _ = writeln!(out, "vocabulary size  {}", self.vocab.len());
        let _ = writeln!(out, "\n[config]");
        out.push_str(&self.config.to_text());
        let _ = writeln!(out, "\n[tensors]");
        for (name, t) in self.params.named() {
            let _ = writeln!(out, "{name:<24} {:?} {}", t.shape(), t.len());
        }
        let _ = writeln!(out, "total parameters {}", self.params.parameter_count());
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::random_embeddings;
    use crate::layers::ConvConfig;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample(fs: usize) -> Checkpoint {
        let mut config = TrainConfig::default();
        config.conv = ConvConfig {
            n: 3,
            fs,
            ly: 2,
            ..ConvConfig::default()
        };
        let vocab = Vocabulary::from_chars("中国人a".chars());
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let emb = random_embeddings(vocab.len(), 3, &mut rng);
        let params = ModelParams::init(&config.conv, emb, &mut rng).unwrap();
        let optimizer = AdamState::new(params.named().iter().map(|(_, t)| t.shape()));
        Checkpoint {
            config,
            vocab,
            params,
            optimizer,
            epoch: 0,
            best_dev_f: None,
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        for fs in [3, 5] {
            let mut c = sample(fs);
            c.best_dev_f = Some(0.123_456_789_012_345_67);
            c.epoch = 7;
            c.optimizer.step = 42;
            c.optimizer.second[3].data_mut()[0] = 1e-300;
            let bytes = c.to_bytes();
            let back = Checkpoint::from_bytes(&bytes).unwrap();
            assert_eq!(back, c);
            assert_eq!(back.to_bytes(), bytes);
        }
    }

    #[test]
    fn header_layout() {
        let bytes = sample(3).to_bytes();
        assert_eq!(&bytes[..6], b"TCNCRF");
        assert_eq!(bytes[6], VERSION);
    }

    #[test]
    fn rejects_bad_version_and_magic() {
        let mut bytes = sample(3).to_bytes();
        bytes[6] = 9;
        let err = Checkpoint::from_bytes(&bytes).unwrap_err();
        assert!(matches!(err, Error::Checkpoint { offset: 6, .. }), "{err}");
        bytes[0] = b'X';
        assert!(Checkpoint::from_bytes(&bytes).is_err());
    }

    #[test]
    fn truncation_reports_offset() {
        let bytes = sample(3).to_bytes();
        let cut = bytes.len() - 5;
        match Checkpoint::from_bytes(&bytes[..cut]) {
            Err(Error::Checkpoint { offset, .. }) => assert!(offset as usize <= cut),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_shape_mismatch() {
        let c = sample(3);
        let mut bytes = c.to_bytes();
        // Point the config at a wider model than the stored tensors.
        let text = c.config.to_text();
        let pos = bytes.windows(6).position(|w| w == b"fs = 3").unwrap();
        bytes[pos + 5] = b'4';
        assert!(text.contains("fs = 3"));
        assert!(matches!(Checkpoint::from_bytes(&bytes), Err(Error::Checkpoint { .. })));
    }

    #[test]
    fn summary_counts_parameters() {
        let c = sample(3);
        let s = c.summary();
        assert!(s.contains("best dev F       none"));
        assert!(s.contains(&format!("total parameters {}", c.params.parameter_count())));
    }
}
