//! Corpus ingestion and the glue between text and label sequences.
//!
//! Training corpora hold one sentence per line with words separated by runs of
//! whitespace (ASCII spaces, tabs, or the full-width space U+3000). Each word
//! becomes `S` when it has one character and `B M* E` otherwise.

use std::collections::HashMap;
use std::fs;
use std::io::BufRead;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::crf::Tag;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// A non-empty run of characters without whitespace.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Sentence {
    chars: Vec<char>,
}

impl Sentence {
    pub fn new(chars: Vec<char>) -> Result<Self> {
        if chars.is_empty() {
            return Err(Error::Domain("a sentence needs at least one character".into()));
        }
        if let Some(c) = chars.iter().find(|c| c.is_whitespace()) {
            return Err(Error::Domain(format!("sentence contains whitespace {c:?}")));
        }
        Ok(Sentence { chars })
    }

    /// Strips all whitespace from `line`; `None` when nothing is left.
    pub fn from_raw(line: &str) -> Option<Self> {
        let chars: Vec<char> = line.chars().filter(|c| !c.is_whitespace()).collect();
        (!chars.is_empty()).then_some(Sentence { chars })
    }

    pub fn chars(&self) -> &[char] {
        &self.chars
    }

    pub fn len(&self) -> usize {
        self.chars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chars.is_empty()
    }

    pub fn as_string(&self) -> String {
        self.chars.iter().collect()
    }
}

/// Gold or predicted labels, one per character.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct LabelSequence(pub Vec<Tag>);

impl LabelSequence {
    /// Labels for a sequence of word lengths.
    pub fn from_word_lengths(lengths: impl IntoIterator<Item = usize>) -> Self {
        let mut tags = Vec::new();
        for len in lengths {
            match len {
                0 => {}
                1 => tags.push(Tag::S),
                k => {
                    tags.push(Tag::B);
                    tags.extend(std::iter::repeat_n(Tag::M, k - 2));
                    tags.push(Tag::E);
                }
            }
        }
        LabelSequence(tags)
    }

    /// Whether the sequence parses as `(B M* E | S)+`.
    pub fn is_well_formed(&self) -> bool {
        let mut inside = false;
        for tag in &self.0 {
            inside = match (inside, tag) {
                (false, Tag::B) => true,
                (false, Tag::S) => false,
                (true, Tag::M) => true,
                (true, Tag::E) => false,
                _ => return false,
            };
        }
        !inside && !self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Splits a segmented line into words.
pub fn split_words(line: &str) -> impl Iterator<Item = &str> {
    line.split(char::is_whitespace).filter(|w| !w.is_empty())
}

/// Parses one segmented line; `None` for blank lines.
pub fn parse_segmented_line(line: &str) -> Option<(Sentence, LabelSequence)> {
    let words: Vec<&str> = split_words(line).collect();
    if words.is_empty() {
        return None;
    }
    let chars = words.iter().flat_map(|w| w.chars()).collect();
    let labels = LabelSequence::from_word_lengths(words.iter().map(|w| w.chars().count()));
    Some((Sentence { chars }, labels))
}

/// Reads UTF-8 lines (LF or CRLF), reporting invalid UTF-8 with its 1-based
/// line number.
pub fn read_lines(path: &Path) -> Result<Vec<String>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut lines = Vec::new();
    for (i, raw) in bytes.split(|&b| b == b'\n').enumerate() {
        let raw = raw.strip_suffix(b"\r").unwrap_or(raw);
        let line = std::str::from_utf8(raw).map_err(|e| Error::Ingestion {
            path: path.display().to_string(),
            line: i + 1,
            message: format!("invalid UTF-8: {e}"),
        })?;
        lines.push(line.to_string());
    }
    if bytes.ends_with(b"\n") {
        lines.pop();
    }
    Ok(lines)
}

/// Loads a whitespace-segmented corpus; blank lines are skipped.
pub fn load_corpus(path: &Path) -> Result<Vec<(Sentence, LabelSequence)>> {
    Ok(read_lines(path)?
        .iter()
        .filter_map(|l| parse_segmented_line(l))
        .collect())
}

/// Rebuilds words from per-character labels.
///
/// A new word starts at every `B` or `S`, and the current word closes after an
/// `E` or `S`. Any label sequence decodes, and the words always concatenate
/// back to the input characters.
pub fn segment_from_labels(chars: &[char], labels: &[Tag]) -> Result<Vec<String>> {
    if chars.len() != labels.len() {
        return Err(Error::Domain(format!(
            "{} characters but {} labels",
            chars.len(),
            labels.len()
        )));
    }
    let mut words = Vec::new();
    let mut current = String::new();
    for (&c, &tag) in chars.iter().zip(labels) {
        if tag.starts_word() && !current.is_empty() {
            words.push(std::mem::take(&mut current));
        }
        current.push(c);
        if tag.ends_word() {
            words.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        words.push(current);
    }
    Ok(words)
}

/// Character-to-index map. Index 0 is the unknown character and index 1 is
/// padding; the rest follow first occurrence in the training data.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    chars: Vec<char>,
    index: HashMap<char, usize>,
}

impl Vocabulary {
    pub const UNK: usize = 0;
    pub const PAD: usize = 1;
    pub const RESERVED: usize = 2;

    pub fn from_chars(chars: impl IntoIterator<Item = char>) -> Self {
        let mut v = Vocabulary {
            chars: Vec::new(),
            index: HashMap::new(),
        };
        for c in chars {
            if !v.index.contains_key(&c) {
                v.index.insert(c, Self::RESERVED + v.chars.len());
                v.chars.push(c);
            }
        }
        v
    }

    pub fn from_sentences<'a>(sentences: impl IntoIterator<Item = &'a Sentence>) -> Self {
        Self::from_chars(sentences.into_iter().flat_map(|s| s.chars().iter().copied()))
    }

    /// Total rows including the reserved entries.
    pub fn len(&self) -> usize {
        Self::RESERVED + self.chars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chars.is_empty()
    }

    /// Non-reserved characters in index order.
    pub fn chars(&self) -> &[char] {
        &self.chars
    }

    pub fn get(&self, c: char) -> Option<usize> {
        self.index.get(&c).copied()
    }

    pub fn index_of(&self, c: char) -> usize {
        self.get(c).unwrap_or(Self::UNK)
    }

    pub fn encode(&self, sentence: &Sentence) -> Vec<usize> {
        sentence.chars().iter().map(|&c| self.index_of(c)).collect()
    }
}

/// Embedding rows aligned with a [`Vocabulary`].
#[derive(Clone, Debug)]
pub struct EmbeddingTable<T> {
    pub table: Tensor<T>,
    pub hits: usize,
    /// Fraction of non-reserved vocabulary entries found in the file.
    pub hit_rate: f64,
}

/// Every row drawn from `uniform(−0.1, 0.1)`.
pub fn random_embeddings<T: Scalar>(rows: usize, n: usize, rng: &mut impl Rng) -> Tensor<T> {
    let data = (0..rows * n).map(|_| T::lit(rng.gen_range(-0.1..0.1))).collect();
    Tensor::from_vec([rows, n], data).expect("shape matches data")
}

/// Loads a text embedding file (header `V n`, then `token v1 … vn` rows).
///
/// Rows are copied for vocabulary hits; every other row, reserved entries
/// included, keeps its random initialization.
pub fn load_embeddings<T: Scalar>(
    path: &Path,
    vocab: &Vocabulary,
    n: usize,
    rng: &mut impl Rng,
) -> Result<EmbeddingTable<T>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let ingest = |line: usize, message: String| Error::Ingestion {
        path: path.display().to_string(),
        line,
        message,
    };
    let mut table = random_embeddings(vocab.len(), n, rng);
    let mut found = vec![false; vocab.len()];
    let mut lines = std::io::BufReader::new(file).split(b'\n');
    let header = match lines.next() {
        Some(h) => h.map_err(|e| Error::io(path, e))?,
        None => return Err(ingest(1, "missing `V n` header".into())),
    };
    let header = String::from_utf8(header).map_err(|e| ingest(1, format!("invalid UTF-8: {e}")))?;
    let dims: Vec<&str> = header.split_whitespace().collect();
    let file_n = match dims[..] {
        [v, d] if v.parse::<usize>().is_ok() => d.parse::<usize>().map_err(|_| ingest(1, format!("bad header `{header}`")))?,
        _ => return Err(ingest(1, format!("bad header `{header}`"))),
    };
    if file_n != n {
        return Err(Error::Config(format!(
            "embedding file {} has dimension {file_n} but the model expects n = {n}",
            path.display()
        )));
    }
    for (i, raw) in lines.enumerate() {
        let line_no = i + 2;
        let raw = raw.map_err(|e| Error::io(path, e))?;
        let line = std::str::from_utf8(&raw).map_err(|e| ingest(line_no, format!("invalid UTF-8: {e}")))?;
        let mut fields = line.split_whitespace();
        let Some(token) = fields.next() else { continue };
        let values = fields
            .map(|f| f.parse::<f64>())
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|e| ingest(line_no, format!("bad number: {e}")))?;
        if values.len() != n {
            return Err(ingest(line_no, format!("expected {n} values, found {}", values.len())));
        }
        let mut token_chars = token.chars();
        let (Some(c), None) = (token_chars.next(), token_chars.next()) else {
            continue;
        };
        if let Some(row) = vocab.get(c) {
            for (dst, v) in table.row_mut(row).iter_mut().zip(values) {
                *dst = T::lit(v);
            }
            found[row] = true;
        }
    }
    let hits = found.iter().filter(|&&f| f).count();
    let hit_rate = if vocab.is_empty() {
        0.0
    } else {
        hits as f64 / vocab.chars().len() as f64
    };
    Ok(EmbeddingTable { table, hits, hit_rate })
}

/// A sentence mapped to vocabulary indices, with its gold labels.
#[derive(Clone, Debug, PartialEq)]
pub struct Example {
    pub chars: Vec<usize>,
    pub labels: Vec<Tag>,
}

impl Example {
    pub fn new(vocab: &Vocabulary, sentence: &Sentence, labels: &LabelSequence) -> Result<Self> {
        if sentence.len() != labels.len() {
            return Err(Error::Domain("sentence and labels differ in length".into()));
        }
        Ok(Example {
            chars: vocab.encode(sentence),
            labels: labels.0.clone(),
        })
    }
}

/// Sentences padded to a common width.
///
/// Positions at or beyond `lengths[i]` hold [`Vocabulary::PAD`] and a
/// placeholder label; [`Batch::row`] never exposes them.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    pub width: usize,
    pub indices: Vec<usize>,
    pub labels: Vec<Tag>,
    pub lengths: Vec<usize>,
    /// Positions of the members in the source dataset.
    pub members: Vec<usize>,
}

impl Batch {
    pub fn from_examples(data: &[Example], members: Vec<usize>) -> Self {
        let width = members.iter().map(|&i| data[i].chars.len()).max().unwrap_or(0);
        let mut indices = Vec::with_capacity(members.len() * width);
        let mut labels = Vec::with_capacity(members.len() * width);
        let mut lengths = Vec::with_capacity(members.len());
        for &i in &members {
            let ex = &data[i];
            indices.extend_from_slice(&ex.chars);
            indices.extend(std::iter::repeat_n(Vocabulary::PAD, width - ex.chars.len()));
            labels.extend_from_slice(&ex.labels);
            labels.extend(std::iter::repeat_n(Tag::S, width - ex.labels.len()));
            lengths.push(ex.chars.len());
        }
        Batch {
            width,
            indices,
            labels,
            lengths,
            members,
        }
    }

    pub fn len(&self) -> usize {
        self.lengths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lengths.is_empty()
    }

    /// Unpadded characters and labels of member `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[Tag]) {
        let start = i * self.width;
        let end = start + self.lengths[i];
        (&self.indices[start..end], &self.labels[start..end])
    }
}

/// Stream identifier reserved for batch shuffling; epochs offset from it.
const SHUFFLE_STREAM: u64 = 1 << 32;

/// Splits `data` into batches of at most `bs` sentences.
///
/// The order is a deterministic shuffle keyed by `(seed, epoch)`. With
/// `sort_by_length`, the shuffled sentences are stably sorted by length before
/// chunking and the chunks are shuffled again, which keeps padding small.
pub fn make_batches(data: &[Example], bs: usize, seed: u64, epoch: u64, sort_by_length: bool) -> Result<Vec<Batch>> {
    if bs == 0 {
        return Err(Error::Config("batch size must be at least 1".into()));
    }
    if data.is_empty() {
        return Err(Error::Config("cannot batch an empty dataset".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(SHUFFLE_STREAM + epoch);
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(&mut rng);
    if sort_by_length {
        order.sort_by_key(|&i| data[i].chars.len());
    }
    let mut chunks: Vec<Vec<usize>> = order.chunks(bs).map(<[usize]>::to_vec).collect();
    if sort_by_length {
        chunks.shuffle(&mut rng);
    }
    Ok(chunks.into_iter().map(|c| Batch::from_examples(data, c)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::io::Write;

    fn tags(s: &str) -> Vec<Tag> {
        s.chars()
            .map(|c| match c {
                'B' => Tag::B,
                'M' => Tag::M,
                'E' => Tag::E,
                _ => Tag::S,
            })
            .collect()
    }

    #[test]
    fn bmes_from_words() {
        let (s, l) = parse_segmented_line("AB C").unwrap();
        assert_eq!(s.chars(), &['A', 'B', 'C']);
        assert_eq!(l.0, tags("BES"));
        let (_, l) = parse_segmented_line("ABC").unwrap();
        assert_eq!(l.0, tags("BME"));
        let (s, l) = parse_segmented_line("中国\t人民\u{3000}万岁  好").unwrap();
        assert_eq!(s.len(), 7);
        assert_eq!(l.0, tags("BEBEBES"));
        assert!(parse_segmented_line(" \t ").is_none());
    }

    #[test]
    fn segment_examples() {
        let chars: Vec<char> = "ABC".chars().collect();
        assert_eq!(segment_from_labels(&chars, &tags("BES")).unwrap(), ["AB", "C"]);
        assert_eq!(segment_from_labels(&chars, &tags("SSS")).unwrap(), ["A", "B", "C"]);
        assert_eq!(segment_from_labels(&chars, &tags("MME")).unwrap(), ["ABC"]);
        assert_eq!(segment_from_labels(&chars, &tags("BBM")).unwrap(), ["A", "BC"]);
        assert!(segment_from_labels(&chars, &tags("BE")).is_err());
    }

    #[test]
    fn well_formedness() {
        assert!(LabelSequence(tags("BMESBE")).is_well_formed());
        assert!(!LabelSequence(tags("BM")).is_well_formed());
        assert!(!LabelSequence(tags("ME")).is_well_formed());
        assert!(!LabelSequence(tags("SE")).is_well_formed());
    }

    #[test]
    fn load_corpus_handles_crlf_and_blank_lines() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all("AB C\r\n\r\nABC\n".as_bytes()).unwrap();
        let data = load_corpus(f.path()).unwrap();
        assert_eq!(data.len(), 2);
        assert_eq!(data[1].1 .0, tags("BME"));
    }

    #[test]
    fn malformed_utf8_reports_line() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(b"AB C\nok\n\xff\xfe\n").unwrap();
        match load_corpus(f.path()) {
            Err(Error::Ingestion { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn vocabulary_order_and_reserved() {
        let a = Sentence::from_raw("ba").unwrap();
        let b = Sentence::from_raw("cab").unwrap();
        let v = Vocabulary::from_sentences([&a, &b]);
        assert_eq!(v.chars(), &['b', 'a', 'c']);
        assert_eq!(v.len(), 5);
        assert_eq!(v.index_of('b'), 2);
        assert_eq!(v.index_of('z'), Vocabulary::UNK);
        assert_ne!(Vocabulary::UNK, Vocabulary::PAD);
        assert_eq!(v, Vocabulary::from_sentences([&a, &b]));
    }

    fn embedding_file(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn embeddings_full_hit() {
        let v = Vocabulary::from_chars(['中', '国']);
        let f = embedding_file("3 2\n</s> 0 0\n中 0.5 -1.25e-1\n国 3 4\n");
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let e = load_embeddings::<f64>(f.path(), &v, 2, &mut rng).unwrap();
        assert_eq!(e.hit_rate, 1.0);
        assert_eq!(e.table.row(2), &[0.5, -0.125]);
        assert_eq!(e.table.row(3), &[3.0, 4.0]);
        assert!(e.table.row(0).iter().all(|x| x.abs() < 0.1));
    }

    #[test]
    fn embeddings_miss_path() {
        let v = Vocabulary::from_chars(['a', 'b']);
        let f = embedding_file("1 2\nz 1 1\n");
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let e = load_embeddings::<f64>(f.path(), &v, 2, &mut rng).unwrap();
        assert_eq!(e.hit_rate, 0.0);
        assert!(e.table.data().iter().all(|x| x.abs() < 0.1));
    }

    #[test]
    fn embeddings_dimension_mismatch_is_config_error() {
        let v = Vocabulary::from_chars(['a']);
        let f = embedding_file("1 50\n");
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(load_embeddings::<f64>(f.path(), &v, 100, &mut rng), Err(Error::Config(_))));
    }

    #[test]
    fn embeddings_malformed_row() {
        let v = Vocabulary::from_chars(['a']);
        let f = embedding_file("2 2\na 1 1\nb 1 x\n");
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        match load_embeddings::<f64>(f.path(), &v, 2, &mut rng) {
            Err(Error::Ingestion { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    fn examples(lengths: &[usize]) -> Vec<Example> {
        lengths
            .iter()
            .map(|&n| Example {
                chars: vec![2; n],
                labels: vec![Tag::S; n],
            })
            .collect()
    }

    #[test]
    fn batch_sizes_and_determinism() {
        let data = examples(&[1, 2, 3, 4, 5]);
        let batches = make_batches(&data, 2, 7, 0, false).unwrap();
        assert_eq!(batches.iter().map(Batch::len).collect::<Vec<_>>(), [2, 2, 1]);
        assert_eq!(batches, make_batches(&data, 2, 7, 0, false).unwrap());
        let mut seen: Vec<usize> = batches.iter().flat_map(|b| b.members.clone()).collect();
        seen.sort();
        assert_eq!(seen, [0, 1, 2, 3, 4]);
        assert!(make_batches(&[], 2, 7, 0, false).is_err());
        assert!(make_batches(&data, 0, 7, 0, false).is_err());
    }

    #[test]
    fn padding_is_masked() {
        let data = examples(&[1, 3]);
        let b = Batch::from_examples(&data, vec![0, 1]);
        assert_eq!(b.width, 3);
        assert_eq!(&b.indices[..3], &[2, Vocabulary::PAD, Vocabulary::PAD]);
        assert_eq!(b.row(0).0, &[2]);
        assert_eq!(b.row(1).0.len(), 3);
    }

    #[test]
    fn length_bucketing_covers_everything() {
        let data = examples(&[5, 1, 4, 2, 3, 6, 1]);
        let batches = make_batches(&data, 3, 1, 2, true).unwrap();
        let mut seen: Vec<usize> = batches.iter().flat_map(|b| b.members.clone()).collect();
        seen.sort();
        assert_eq!(seen, (0..7).collect::<Vec<_>>());
    }

    fn word() -> impl Strategy<Value = String> {
        prop::collection::vec(prop::sample::select(vec!['中', '国', '人', '民', 'a', '1', '。']), 1..5)
            .prop_map(|c| c.into_iter().collect())
    }

    proptest! {
        #[test]
        fn round_trip_preserves_words(words in prop::collection::vec(word(), 1..12), sep in prop::sample::select(vec![" ", "  ", "\t", "\u{3000}"])) {
            let line = words.join(sep);
            let (s, labels) = parse_segmented_line(&line).unwrap();
            prop_assert!(labels.is_well_formed());
            let back = segment_from_labels(s.chars(), &labels.0).unwrap();
            prop_assert_eq!(back, words);
        }

        #[test]
        fn any_labels_are_lossless(idx in prop::collection::vec(0usize..4, 1..20)) {
            let chars: Vec<char> = (0..idx.len()).map(|i| char::from(b'a' + (i % 26) as u8)).collect();
            let labels: Vec<Tag> = idx.iter().map(|&i| Tag::ALL[i]).collect();
            let words = segment_from_labels(&chars, &labels).unwrap();
            prop_assert!(words.iter().all(|w| !w.is_empty()));
            prop_assert_eq!(words.concat(), chars.iter().collect::<String>());
        }
    }
}
