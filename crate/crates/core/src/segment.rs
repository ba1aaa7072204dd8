//! Turning raw text into segmented text with a trained model.

use std::fs;
use std::path::Path;

use crate::checkpoint::Checkpoint;
use crate::corpus::{read_lines, segment_from_labels, Sentence, Vocabulary};
use crate::error::{Error, Result};
use crate::eval::{f1_score, EvalReport};
use crate::model::Segmenter;
use crate::scalar::Scalar;

/// Segments one line of raw text. Whitespace in the input is ignored; a
/// blank line yields an empty string. Words are joined by single spaces.
pub fn segment_line<T: Scalar>(model: &Segmenter<T>, vocab: &Vocabulary, line: &str) -> Result<String> {
    let Some(sentence) = Sentence::from_raw(line) else {
        return Ok(String::new());
    };
    segment_sentence(model, vocab, &sentence)
}

pub fn segment_sentence<T: Scalar>(model: &Segmenter<T>, vocab: &Vocabulary, sentence: &Sentence) -> Result<String> {
    let labels = model.predict(&vocab.encode(sentence))?;
    Ok(segment_from_labels(sentence.chars(), &labels)?.join(" "))
}

/// Segments every line of `input` into `output`, returning the number of
/// lines written.
pub fn segment_file(checkpoint: &Path, input: &Path, output: &Path) -> Result<usize> {
    let ckpt = Checkpoint::load(checkpoint)?;
    let model = ckpt.segmenter()?;
    let lines = read_lines(input)?;
    let mut out = String::new();
    for line in &lines {
        out.push_str(&segment_line(&model, &ckpt.vocab, line)?);
        out.push('\n');
    }
    fs::write(output, out).map_err(|e| Error::io(output, e))?;
    Ok(lines.len())
}

/// Scores a predicted segmentation file against a gold one.
pub fn eval_files(gold: &Path, pred: &Path) -> Result<EvalReport> {
    f1_score(&read_lines(gold)?, &read_lines(pred)?)
}
