#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use tcn_cws::config::TrainConfig;
use tcn_cws::layers::{ConvConfig, Scheme};
use tcn_cws::tensor::Tensor;

pub const FIXTURE_SENTENCES: usize = 50;

/// Word lengths of the synthetic lexicon. Every character belongs to exactly
/// one word, so a sentence's segmentation is a function of its characters.
const WORD_LENGTHS: [usize; 16] = [1, 2, 3, 2, 1, 4, 2, 3, 1, 2, 2, 3, 1, 2, 4, 2];

pub fn lexicon() -> Vec<String> {
    let mut next = 0x4e00u32;
    WORD_LENGTHS
        .iter()
        .map(|&len| {
            (0..len)
                .map(|_| {
                    let c = char::from_u32(next).unwrap();
                    next += 7;
                    c
                })
                .collect()
        })
        .collect()
}

/// Fifty whitespace-segmented sentences of 3 to 8 words.
pub fn fixture_lines(seed: u64) -> Vec<String> {
    let words = lexicon();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..FIXTURE_SENTENCES)
        .map(|_| {
            let n = rng.gen_range(3..=8);
            (0..n).map(|_| words.choose(&mut rng).unwrap().as_str()).collect::<Vec<_>>().join(" ")
        })
        .collect()
}

pub fn write_lines(path: &Path, lines: &[String]) {
    let mut text = lines.join("\n");
    text.push('\n');
    fs::write(path, text).unwrap();
}

/// Writes the fixture into `dir` and returns its path.
pub fn write_fixture(dir: &Path) -> PathBuf {
    let path = dir.join("fixture.txt");
    write_lines(&path, &fixture_lines(7));
    path
}

/// Default hyper-parameters with the fixture as both training and dev data.
pub fn overfit_config(dir: &Path, scheme: Scheme) -> TrainConfig {
    let corpus = write_fixture(dir);
    let mut config = TrainConfig::default();
    config.conv.scheme = scheme;
    config.train = Some(corpus.clone());
    config.dev = Some(corpus);
    config.checkpoint_dir = dir.join("checkpoints");
    config
}

pub fn tiny_conv() -> ConvConfig {
    ConvConfig {
        n: 3,
        fs: 3,
        ly: 2,
        s: 3,
        dp: 0.0,
        scheme: Scheme::Future,
    }
}

pub fn normal_tensor(shape: &[usize], rng: &mut impl Rng) -> Tensor<f64> {
    let len = shape.iter().product();
    Tensor::from_vec(shape.to_vec(), (0..len).map(|_| rng.sample(StandardNormal)).collect()).unwrap()
}

/// Random CRF instance: `[m × 4]` scores and a `[4 × 4]` transition matrix.
pub fn crf_instance(m: usize, rng: &mut impl Rng) -> (Tensor<f64>, Tensor<f64>) {
    (normal_tensor(&[m, 4], rng), normal_tensor(&[4, 4], rng))
}

/// Whitespace-stripped character stream of a line.
pub fn stripped(line: &str) -> String {
    line.chars().filter(|c| !c.is_whitespace()).collect()
}
