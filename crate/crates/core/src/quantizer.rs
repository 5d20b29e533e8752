//! Online quantization of scalar errors into a codebook.
//!
//! The first sample seeds the codebook. Every later sample is assigned to its
//! nearest existing word when that word is within the threshold (inclusive),
//! and otherwise becomes a new word itself. Cost is O(MN) for M final words.

use crate::criteria::{check_epsilon, ErrorVector};
use crate::error::{invalid, QmeeError, Result};

/// Code words with occupancy counts, in insertion order.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    words: Vec<f64>,
    counts: Vec<usize>,
    epsilon: f64,
}

impl Codebook {
    pub fn from_parts(words: Vec<f64>, counts: Vec<usize>, epsilon: f64) -> Result<Self> {
        if words.is_empty() {
            return Err(QmeeError::Empty("codebook"));
        }
        if words.len() != counts.len() {
            return Err(QmeeError::DimensionMismatch {
                context: "codebook words/counts",
                expected: words.len(),
                found: counts.len(),
            });
        }
        if counts.contains(&0) {
            return Err(invalid("counts", "every code word needs a positive count"));
        }
        if let Some(index) = words.iter().position(|w| !w.is_finite()) {
            return Err(QmeeError::NonFinite {
                what: "code words",
                index,
            });
        }
        check_epsilon(epsilon)?;
        Ok(Self { words, counts, epsilon })
    }

    /// A single word holding all `n` samples. With `word = 0` the quantized
    /// potential reduces to correntropy.
    pub fn pinned(word: f64, n: usize) -> Self {
        assert!(n > 0, "pinned codebook needs at least one sample");
        Self {
            words: vec![word],
            counts: vec![n],
            epsilon: f64::INFINITY,
        }
    }

    pub fn words(&self) -> &[f64] {
        &self.words
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn total_count(&self) -> usize {
        self.counts.iter().sum()
    }

    /// Occupancy fractions `M_m / N`.
    pub fn weights(&self) -> Vec<f64> {
        let n = self.total_count() as f64;
        self.counts.iter().map(|&m| m as f64 / n).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantizationResult {
    pub codebook: Codebook,
    /// Word index of every input sample.
    pub assignments: Vec<usize>,
}

impl QuantizationResult {
    /// `Q[e_j]` for every sample.
    pub fn quantized(&self) -> Vec<f64> {
        self.assignments.iter().map(|&m| self.codebook.words[m]).collect()
    }
}

/// Index and distance of the closest word. Equal distances resolve to the
/// earliest-inserted word.
pub fn nearest_word(x: f64, codebook: &Codebook) -> (usize, f64) {
    nearest_in(x, &codebook.words)
}

#[inline]
fn nearest_in(x: f64, words: &[f64]) -> (usize, f64) {
    let mut best = 0;
    let mut best_dist = (x - words[0]).abs();
    for (j, &w) in words.iter().enumerate().skip(1) {
        let d = (x - w).abs();
        if d < best_dist {
            best = j;
            best_dist = d;
        }
    }
    (best, best_dist)
}

/// Codebook only, for hot loops that have already validated their input.
pub(crate) fn quantize_values(e: &[f64], epsilon: f64) -> Codebook {
    let mut words = vec![e[0]];
    let mut counts = vec![1usize];
    for &x in &e[1..] {
        let (j, dist) = nearest_in(x, &words);
        if dist <= epsilon {
            counts[j] += 1;
        } else {
            words.push(x);
            counts.push(1);
        }
    }
    Codebook { words, counts, epsilon }
}

pub fn quantize_stream(errors: &ErrorVector, epsilon: f64) -> Result<QuantizationResult> {
    check_epsilon(epsilon)?;
    let e = errors.as_slice();
    let mut words = vec![e[0]];
    let mut counts = vec![1usize];
    let mut assignments = Vec::with_capacity(e.len());
    assignments.push(0);
    for &x in &e[1..] {
        let (j, dist) = nearest_in(x, &words);
        if dist <= epsilon {
            counts[j] += 1;
            assignments.push(j);
        } else {
            words.push(x);
            counts.push(1);
            assignments.push(words.len() - 1);
        }
    }
    Ok(QuantizationResult {
        codebook: Codebook { words, counts, epsilon },
        assignments,
    })
}
