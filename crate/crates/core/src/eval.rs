//! Word-level precision, recall and F1 by span matching, plus throughput.

use std::collections::HashSet;
use std::fmt;
use std::time::{Duration, Instant};

use crate::corpus::split_words;
use crate::error::{Error, Result};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EvalReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub gold_words: usize,
    pub pred_words: usize,
    pub correct: usize,
    pub sentences_per_sec: Option<f64>,
}

impl EvalReport {
    pub fn from_counts(gold_words: usize, pred_words: usize, correct: usize) -> Self {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(correct, pred_words);
        let recall = ratio(correct, gold_words);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        EvalReport {
            precision,
            recall,
            f1,
            gold_words,
            pred_words,
            correct,
            sentences_per_sec: None,
        }
    }

    /// `P=<v> R=<v> F=<v> gold=<n> pred=<n> correct=<n>`
    pub fn machine_line(&self) -> String {
        format!(
            "P={} R={} F={} gold={} pred={} correct={}",
            self.precision, self.recall, self.f1, self.gold_words, self.pred_words, self.correct
        )
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "precision  {:.4}", self.precision)?;
        writeln!(f, "recall     {:.4}", self.recall)?;
        writeln!(f, "F1         {:.4}", self.f1)?;
        write!(
            f,
            "words      gold {}, predicted {}, correct {}",
            self.gold_words, self.pred_words, self.correct
        )?;
        if let Some(rate) = self.sentences_per_sec {
            write!(f, "\nspeed      {rate:.1} sentences/s")?;
        }
        Ok(())
    }
}

fn spans(line: &str) -> (Vec<(usize, usize)>, String) {
    let mut out = Vec::new();
    let mut stream = String::new();
    let mut start = 0;
    for word in split_words(line) {
        let len = word.chars().count();
        out.push((start, start + len));
        start += len;
        stream.push_str(word);
    }
    (out, stream)
}

/// Scores predicted segmentations against gold ones, line by line.
///
/// Words become character-offset spans; a predicted word is correct when the
/// same span appears in the gold line.
pub fn f1_score<G, P>(gold: &[G], pred: &[P]) -> Result<EvalReport>
where
    G: AsRef<str>,
    P: AsRef<str>,
{
    if gold.len() != pred.len() {
        return Err(Error::Evaluation {
            line: gold.len().min(pred.len()) + 1,
            message: format!("gold has {} lines but prediction has {}", gold.len(), pred.len()),
        });
    }
    let (mut g_total, mut p_total, mut correct) = (0, 0, 0);
    for (i, (g, p)) in gold.iter().zip(pred).enumerate() {
        let (g_spans, g_stream) = spans(g.as_ref());
        let (p_spans, p_stream) = spans(p.as_ref());
        if g_stream != p_stream {
            return Err(Error::Evaluation {
                line: i + 1,
                message: "gold and predicted characters differ".into(),
            });
        }
        let g_set: HashSet<_> = g_spans.iter().collect();
        correct += p_spans.iter().filter(|s| g_set.contains(s)).count();
        g_total += g_spans.len();
        p_total += p_spans.len();
    }
    Ok(EvalReport::from_counts(g_total, p_total, correct))
}

/// Sentences per second over a measured interval.
pub fn throughput(sentences: usize, elapsed: Duration) -> Result<f64> {
    let secs = elapsed.as_secs_f64();
    if secs <= 0.0 {
        return Err(Error::Measurement("elapsed time is zero".into()));
    }
    Ok(sentences as f64 / secs)
}

/// Wall-clock timer that can be paused around work that should not count,
/// such as data loading.
#[derive(Debug)]
pub struct Stopwatch {
    elapsed: Duration,
    running: Option<Instant>,
}

impl Default for Stopwatch {
    fn default() -> Self {
        Self::new()
    }
}

impl Stopwatch {
    pub fn new() -> Self {
        Stopwatch {
            elapsed: Duration::ZERO,
            running: None,
        }
    }

    pub fn start(&mut self) {
        if self.running.is_none() {
            self.running = Some(Instant::now());
        }
    }

    pub fn stop(&mut self) {
        if let Some(t) = self.running.take() {
            self.elapsed += t.elapsed();
        }
    }

    pub fn elapsed(&self) -> Duration {
        self.elapsed + self.running.map_or(Duration::ZERO, |t| t.elapsed())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identical_is_perfect() {
        let lines = ["AB C", "D EF G"];
        let r = f1_score(&lines, &lines).unwrap();
        assert_eq!((r.precision, r.recall, r.f1), (1.0, 1.0, 1.0));
    }

    #[test]
    fn hand_fixture() {
        let r = f1_score(&["AB C"], &["A B C"]).unwrap();
        assert_eq!((r.gold_words, r.pred_words, r.correct), (2, 3, 1));
        assert!((r.precision - 1.0 / 3.0).abs() < 1e-15);
        assert!((r.recall - 0.5).abs() < 1e-15);
        assert!((r.f1 - 0.4).abs() < 1e-15);
        assert_eq!(
            r.machine_line(),
            format!("P={} R=0.5 F={} gold=2 pred=3 correct=1", 1.0 / 3.0, r.f1)
        );
    }

    #[test]
    fn merged_prediction_scores_zero() {
        let r = f1_score(&["AB C D"], &["ABCD"]).unwrap();
        assert_eq!(r.correct, 0);
        assert_eq!(r.f1, 0.0);
    }

    #[test]
    fn repeated_words_count_by_position() {
        let r = f1_score(&["AB AB"], &["AB A B"]).unwrap();
        assert_eq!(r.correct, 1);
    }

    #[test]
    fn mismatch_names_line() {
        let err = f1_score(&["AB", "CD"], &["AB", "CE"]).unwrap_err();
        assert!(matches!(err, Error::Evaluation { line: 2, .. }));
        assert!(f1_score(&["AB"], &["AB", "C"]).is_err());
    }

    #[test]
    fn throughput_arithmetic() {
        assert_eq!(throughput(100, Duration::from_secs(2)).unwrap(), 50.0);
        assert!(throughput(1, Duration::ZERO).is_err());
    }

    #[test]
    fn stopwatch_pauses() {
        let mut s = Stopwatch::new();
        assert_eq!(s.elapsed(), Duration::ZERO);
        s.start();
        std::thread::sleep(Duration::from_millis(5));
        s.stop();
        let first = s.elapsed();
        std::thread::sleep(Duration::from_millis(5));
        assert_eq!(s.elapsed(), first);
        assert!(first >= Duration::from_millis(5));
    }

    fn segmentation() -> impl Strategy<Value = (String, String)> {
        // Same 8-character stream, two independent boundary masks.
        (prop::collection::vec(any::<bool>(), 7), prop::collection::vec(any::<bool>(), 7)).prop_map(|(a, b)| {
            let build = |cuts: Vec<bool>| {
                let mut s = String::new();
                for (i, c) in "ABCDEFGH".chars().enumerate() {
                    if i > 0 && cuts[i - 1] {
                        s.push(' ');
                    }
                    s.push(c);
                }
                s
            };
            (build(a), build(b))
        })
    }

    proptest! {
        #[test]
        fn bounds_and_swap_symmetry((g, p) in segmentation()) {
            let r = f1_score(&[&g], &[&p]).unwrap();
            let s = f1_score(&[&p], &[&g]).unwrap();
            prop_assert_eq!(r.precision, s.recall);
            prop_assert_eq!(r.recall, s.precision);
            for v in [r.precision, r.recall, r.f1] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
            if r.precision > 0.0 && r.recall > 0.0 {
                prop_assert!(r.f1 <= r.precision.max(r.recall) + 1e-15);
                prop_assert!(r.f1 >= r.precision.min(r.recall) - 1e-15);
            }
        }
    }
}
