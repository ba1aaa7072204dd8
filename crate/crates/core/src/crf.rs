//! Linear-chain CRF over the four segmentation labels.
//!
//! A path `y` over `m` positions scores
//! `Σ_t score[t][y_t] + Σ_{t≥2} M[y_{t−1}][y_t]`; there is no transition into
//! the first position and no start or stop vector. The log-partition comes
//! from the forward recursion
//!
//! ```text
//! α_1(l) = score_1(l)
//! α_t(l) = score_t(l) + logsumexp_{l'}(α_{t−1}(l') + M[l'][l])
//! log Z  = logsumexp_l(α_m(l))
//! ```
//!
//! and gradients are obtained by running that recursion in reverse, which
//! yields the exact posterior marginals without a separate backward table.

use std::fmt;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{logsumexp, Tensor};

/// Number of labels.
pub const NUM_TAGS: usize = 4;

/// Position of a character inside its word.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Tag {
    /// First character of a multi-character word.
    B = 0,
    /// Interior character.
    M = 1,
    /// Last character of a multi-character word.
    E = 2,
    /// Single-character word.
    S = 3,
}

impl Tag {
    pub const ALL: [Tag; NUM_TAGS] = [Tag::B, Tag::M, Tag::E, Tag::S];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Tag> {
        Self::ALL.get(i).copied()
    }

    /// Whether this label closes the current word.
    pub fn ends_word(self) -> bool {
        matches!(self, Tag::E | Tag::S)
    }

    /// Whether this label opens a new word.
    pub fn starts_word(self) -> bool {
        matches!(self, Tag::B | Tag::S)
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Tag::B => "B",
            Tag::M => "M",
            Tag::E => "E",
            Tag::S => "S",
        })
    }
}

fn check_inputs<T: Scalar>(score: &Tensor<T>, transitions: &Tensor<T>) -> Result<usize> {
    if score.rank() != 2 || score.cols() != NUM_TAGS {
        return Err(Error::Dimension {
            op: "crf score",
            left: score.shape().to_vec(),
            right: vec![score.rows(), NUM_TAGS],
        });
    }
    if transitions.shape() != [NUM_TAGS, NUM_TAGS] {
        return Err(Error::Dimension {
            op: "crf transitions",
            left: transitions.shape().to_vec(),
            right: vec![NUM_TAGS, NUM_TAGS],
        });
    }
    let m = score.rows();
    if m == 0 {
        return Err(Error::Domain("CRF over an empty sequence".into()));
    }
    Ok(m)
}

fn check_gold(m: usize, gold: &[Tag]) -> Result<()> {
    if gold.len() != m {
        return Err(Error::Domain(format!(
            "label sequence has length {} but scores cover {m} positions",
            gold.len()
        )));
    }
    Ok(())
}

/// Forward table `α` with one row per position.
#[derive(Clone, Debug)]
pub struct AlphaTable<T> {
    pub alpha: Tensor<T>,
}

impl<T: Scalar> AlphaTable<T> {
    pub fn log_partition(&self) -> T {
        logsumexp(self.alpha.row(self.alpha.rows() - 1)).expect("four labels")
    }
}

pub fn forward_alpha<T: Scalar>(score: &Tensor<T>, transitions: &Tensor<T>) -> Result<AlphaTable<T>> {
    let m = check_inputs(score, transitions)?;
    let mut alpha = Tensor::zeros([m, NUM_TAGS]);
    alpha.row_mut(0).copy_from_slice(score.row(0));
    let mut incoming = [T::zero(); NUM_TAGS];
    for t in 1..m {
        for l in 0..NUM_TAGS {
            for (k, slot) in incoming.iter_mut().enumerate() {
                *slot = alpha.get(t - 1, k) + transitions.get(k, l);
            }
            let value = score.get(t, l) + logsumexp(&incoming)?;
            alpha.set(t, l, value);
        }
    }
    Ok(AlphaTable { alpha })
}

/// Total score of one label path.
pub fn path_score<T: Scalar>(score: &Tensor<T>, transitions: &Tensor<T>, path: &[Tag]) -> Result<T> {
    let m = check_inputs(score, transitions)?;
    check_gold(m, path)?;
    let mut total = T::zero();
    // Same association order as `viterbi`, so the best path's score matches
    // bit for bit.
    for (t, tag) in path.iter().enumerate() {
        if t > 0 {
            total += transitions.get(path[t - 1].index(), tag.index());
        }
        total += score.get(t, tag.index());
    }
    Ok(total)
}

/// Negative log-likelihood of the gold path: `log Z − path_score(gold)`.
pub fn nll_loss<T: Scalar>(score: &Tensor<T>, transitions: &Tensor<T>, gold: &[Tag]) -> Result<T> {
    let alpha = forward_alpha(score, transitions)?;
    Ok(alpha.log_partition() - path_score(score, transitions, gold)?)
}

/// Loss value and its gradients with respect to the scores and transitions.
#[derive(Clone, Debug)]
pub struct CrfGradients<T> {
    pub loss: T,
    /// `[m × 4]`: posterior marginal minus the gold indicator.
    pub score: Tensor<T>,
    /// `[4 × 4]`: expected transition counts minus gold transition counts.
    pub transitions: Tensor<T>,
}

impl<T: Scalar> CrfGradients<T> {
    /// Posterior label marginals, recovered by adding the gold indicator back.
    pub fn marginals(&self, gold: &[Tag]) -> Tensor<T> {
        let mut p = self.score.clone();
        for (t, tag) in gold.iter().enumerate() {
            let v = p.get(t, tag.index()) + T::one();
            p.set(t, tag.index(), v);
        }
        p
    }
}

pub fn loss_backward<T: Scalar>(score: &Tensor<T>, transitions: &Tensor<T>, gold: &[Tag]) -> Result<CrfGradients<T>> {
    let table = forward_alpha(score, transitions)?;
    let m = score.rows();
    check_gold(m, gold)?;
    let alpha = &table.alpha;
    let log_z = table.log_partition();
    let gold_score = path_score(score, transitions, gold)?;

    let mut grad_score = Tensor::zeros([m, NUM_TAGS]);
    let mut grad_trans = Tensor::zeros([NUM_TAGS, NUM_TAGS]);

    // Adjoint of log Z with respect to α_m is softmax(α_m).
    let mut adj = [T::zero(); NUM_TAGS];
    for (l, a) in adj.iter_mut().enumerate() {
        *a = (alpha.get(m - 1, l) - log_z).exp();
    }
    for t in (1..m).rev() {
        let mut prev_adj = [T::zero(); NUM_TAGS];
        for l in 0..NUM_TAGS {
            grad_score.set(t, l, adj[l]);
            // α_t(l) − score_t(l) is the logsumexp over predecessors, so the
            // softmax weight of predecessor k is exp(α_{t−1}(k) + M[k][l] − that).
            let lse = alpha.get(t, l) - score.get(t, l);
            for (k, pa) in prev_adj.iter_mut().enumerate() {
                let w = (alpha.get(t - 1, k) + transitions.get(k, l) - lse).exp();
                let flow = adj[l] * w;
                *pa += flow;
                let g = grad_trans.get(k, l) + flow;
                grad_trans.set(k, l, g);
            }
        }
        adj = prev_adj;
    }
    grad_score.row_mut(0).copy_from_slice(&adj);

    for (t, tag) in gold.iter().enumerate() {
        let v = grad_score.get(t, tag.index()) - T::one();
        grad_score.set(t, tag.index(), v);
        if t > 0 {
            let k = gold[t - 1].index();
            let v = grad_trans.get(k, tag.index()) - T::one();
            grad_trans.set(k, tag.index(), v);
        }
    }

    Ok(CrfGradients {
        loss: log_z - gold_score,
        score: grad_score,
        transitions: grad_trans,
    })
}

/// Result of Viterbi decoding, including the dynamic-programming tables.
#[derive(Clone, Debug)]
pub struct ViterbiPath<T> {
    pub labels: Vec<Tag>,
    pub score: T,
    /// Best-path score ending in each label, per position.
    pub best: Tensor<T>,
    /// `backpointers[t][c]` is the best predecessor of label `c` at `t`;
    /// row 0 is unused.
    pub backpointers: Vec<[usize; NUM_TAGS]>,
}

fn argmax<T: Scalar>(values: impl IntoIterator<Item = T>) -> (usize, T) {
    // Strict comparison keeps the lowest index among ties.
    let mut iter = values.into_iter().enumerate();
    let (mut best_i, mut best_v) = iter.next().expect("non-empty");
    for (i, v) in iter {
        if v > best_v {
            best_i = i;
            best_v = v;
        }
    }
    (best_i, best_v)
}

/// Highest-scoring label path. Ties go to the lowest label index, both for
/// backpointers and for the final label.
pub fn viterbi<T: Scalar>(score: &Tensor<T>, transitions: &Tensor<T>) -> Result<ViterbiPath<T>> {
    let m = check_inputs(score, transitions)?;
    let mut best = Tensor::zeros([m, NUM_TAGS]);
    best.row_mut(0).copy_from_slice(score.row(0));
    let mut backpointers = vec![[0usize; NUM_TAGS]; m];
    for i in 1..m {
        for c in 0..NUM_TAGS {
            let (k, v) = argmax((0..NUM_TAGS).map(|k| best.get(i - 1, k) + transitions.get(k, c)));
            backpointers[i][c] = k;
            best.set(i, c, score.get(i, c) + v);
        }
    }
    let (last, total) = argmax(best.row(m - 1).iter().copied());
    let mut labels = vec![Tag::B; m];
    let mut w = last;
    for j in (0..m).rev() {
        labels[j] = Tag::ALL[w];
        w = backpointers[j][w];
    }
    Ok(ViterbiPath {
        labels,
        score: total,
        best,
        backpointers,
    })
}

/// Exhaustive enumeration of every label path, for testing.
#[derive(Clone, Debug)]
pub struct Enumeration<T> {
    pub log_partition: T,
    /// Lexicographically smallest among the maximum-score paths.
    pub best_path: Vec<Tag>,
    pub best_score: T,
    /// `[m × 4]` posterior marginals.
    pub marginals: Tensor<T>,
}

/// Largest sequence length [`brute_force`] will enumerate.
pub const BRUTE_FORCE_MAX_LEN: usize = 10;

pub fn brute_force<T: Scalar>(score: &Tensor<T>, transitions: &Tensor<T>) -> Result<Enumeration<T>> {
    let m = check_inputs(score, transitions)?;
    if m > BRUTE_FORCE_MAX_LEN {
        return Err(Error::Domain(format!(
            "refusing to enumerate {NUM_TAGS}^{m} paths (limit m = {BRUTE_FORCE_MAX_LEN})"
        )));
    }
    let count = NUM_TAGS.pow(m as u32);
    let mut scores = Vec::with_capacity(count);
    let mut path = vec![Tag::B; m];
    let mut best: Option<(T, Vec<Tag>)> = None;
    for code in 0..count {
        // Most significant digit first, so codes ascend lexicographically.
        let mut rest = code;
        for t in (0..m).rev() {
            path[t] = Tag::ALL[rest % NUM_TAGS];
            rest /= NUM_TAGS;
        }
        let s = path_score(score, transitions, &path)?;
        if best.as_ref().is_none_or(|(b, _)| s > *b) {
            best = Some((s, path.clone()));
        }
        scores.push((s, path.clone()));
    }
    let max = best.as_ref().map(|(b, _)| *b).expect("at least one path");
    let total = scores.iter().fold(T::zero(), |acc, (s, _)| acc + (*s - max).exp());
    let log_partition = max + total.ln();
    let mut marginals = Tensor::zeros([m, NUM_TAGS]);
    for (s, p) in &scores {
        let prob = (*s - log_partition).exp();
        for (t, tag) in p.iter().enumerate() {
            let v = marginals.get(t, tag.index()) + prob;
            marginals.set(t, tag.index(), v);
        }
    }
    let (best_score, best_path) = best.expect("at least one path");
    Ok(Enumeration {
        log_partition,
        best_path,
        best_score,
        marginals,
    })
}
