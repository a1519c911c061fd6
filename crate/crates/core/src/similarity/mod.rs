//! Similarity kernels between answer and context sentences.

mod embedding;

pub use embedding::{
    Embedder, EmbeddingCache, EmbeddingProvider, HashingProvider, HttpEmbeddingProvider, ProviderMode,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::textproc::TokenSequence;

/// A sentence embedding. Finite values, fixed dimension per provider session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyInput("embedding vector"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(EmbeddingVector(values))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Cosine similarity of two embeddings, clamped to `[-1, 1]`.
pub fn cosine(u: &EmbeddingVector, v: &EmbeddingVector) -> Result<f64> {
    if u.dim() != v.dim() {
        return Err(Error::DimensionMismatch {
            left: u.dim(),
            right: v.dim(),
        });
    }
    let (nu, nv) = (u.norm(), v.norm());
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::ZeroVector);
    }
    let dot: f64 = u.0.iter().zip(&v.0).map(|(a, b)| a * b).sum();
    Ok((dot / (nu * nv)).clamp(-1.0, 1.0))
}

/// Matched index pairs `(i, j)` of a longest common subsequence, strictly
/// increasing in both coordinates.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignmentPath {
    pub pairs: Vec<(usize, usize)>,
}

impl AlignmentPath {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Maximal runs in which both indices advance by exactly one, returned
    /// as run lengths in path order.
    pub fn phrase_lengths(&self) -> Vec<usize> {
        let mut runs = Vec::new();
        let mut current = 0usize;
        let mut prev: Option<(usize, usize)> = None;
        for &(i, j) in &self.pairs {
            match prev {
                Some((pi, pj)) if i == pi + 1 && j == pj + 1 => current += 1,
                Some(_) => {
                    runs.push(current);
                    current = 1;
                }
                None => current = 1,
            }
            prev = Some((i, j));
        }
        if current > 0 {
            runs.push(current);
        }
        runs
    }
}

/// LCS alignment by dynamic programming over suffixes.
///
/// The backtrace walks forward from `(0, 0)`: take a match whenever the
/// tokens are equal, otherwise advance in `a` if that keeps the path
/// optimal, otherwise advance in `b`.
pub fn align_lcs(a: &TokenSequence, b: &TokenSequence) -> AlignmentPath {
    align_tokens(a.tokens(), b.tokens())
}

pub(crate) fn align_tokens<T: PartialEq>(a: &[T], b: &[T]) -> AlignmentPath {
    let (n, m) = (a.len(), b.len());
    if n == 0 || m == 0 {
        return AlignmentPath::default();
    }
    let width = m + 1;
    // table[i * width + j] = LCS length of a[i..] and b[j..]
    let mut table = vec![0u32; (n + 1) * width];
    for i in (0..n).rev() {
        for j in (0..m).rev() {
            table[i * width + j] = if a[i] == b[j] {
                table[(i + 1) * width + j + 1] + 1
            } else {
                table[(i + 1) * width + j].max(table[i * width + j + 1])
            };
        }
    }

    let mut pairs = Vec::with_capacity(table[0] as usize);
    let (mut i, mut j) = (0, 0);
    while i < n && j < m {
        if a[i] == b[j] {
            pairs.push((i, j));
            i += 1;
            j += 1;
        } else if table[(i + 1) * width + j] == table[i * width + j] {
            i += 1;
        } else {
            j += 1;
        }
    }
    AlignmentPath { pairs }
}

/// How the two phrase-length bounds (a fixed 4 and 30% of the shorter
/// sentence) combine into the qualification threshold.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhraseBound {
    /// A phrase qualifies when longer than the smaller bound.
    #[default]
    Min,
    /// A phrase qualifies when longer than the larger bound.
    Max,
}

impl PhraseBound {
    /// Phrase lengths strictly above this value qualify.
    pub fn threshold(self, shorter_len: usize) -> usize {
        // ceil(0.3 * n) in integer arithmetic; 0.3 * 10 is not 3.0 in f64.
        let proportional = (3 * shorter_len).div_ceil(10);
        match self {
            PhraseBound::Min => proportional.min(4),
            PhraseBound::Max => proportional.max(4),
        }
    }
}

/// Breakdown of one overlap-ratio computation.
#[derive(Debug, Clone, PartialEq)]
pub struct Overlap {
    pub ratio: f64,
    pub overlap_len: usize,
    pub shorter_len: usize,
    pub phrase_lengths: Vec<usize>,
    pub threshold: usize,
}

/// Sentence overlap ratio: tokens in qualifying LCS phrases divided by the
/// length of the shorter sentence.
pub fn overlap_ratio(a: &TokenSequence, b: &TokenSequence) -> Result<f64> {
    overlap_detail(a, b, PhraseBound::Min).map(|o| o.ratio)
}

/// [`overlap_ratio`] with an explicit phrase bound and the intermediate
/// quantities.
///
/// The pair is put in a canonical order (shorter first, then lexicographic)
/// before alignment, so the result does not depend on argument order.
pub fn overlap_detail(a: &TokenSequence, b: &TokenSequence, bound: PhraseBound) -> Result<Overlap> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyInput("overlap_ratio needs two nonempty token sequences"));
    }
    let (first, second) = if (a.len(), a.tokens()) <= (b.len(), b.tokens()) {
        (a, b)
    } else {
        (b, a)
    };
    let path = align_lcs(first, second);
    let shorter_len = first.len();
    let threshold = bound.threshold(shorter_len);
    let phrase_lengths = path.phrase_lengths();
    let overlap_len: usize = phrase_lengths.iter().filter(|&&l| l > threshold).sum();
    let ratio = (overlap_len as f64 / shorter_len as f64).clamp(0.0, 1.0);
    Ok(Overlap {
        ratio,
        overlap_len,
        shorter_len,
        phrase_lengths,
        threshold,
    })
}
