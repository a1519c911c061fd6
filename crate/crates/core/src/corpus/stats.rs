use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use super::{question_key, ExampleLabel, QaTriple, RetrievalMethod, Split};
use crate::error::Result;
use crate::textproc::tokenize;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub n_questions: usize,
    pub n_triples: usize,
    pub n_hallucinated: usize,
    pub n_not_hallucinated: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MethodStats {
    /// Percentage in `[0, 100]`.
    pub hallucinated_pct: f64,
    pub n_examples: usize,
    pub mean_context_tokens: f64,
    /// Sample standard deviation.
    pub sd_context_tokens: f64,
    /// Standard error of the mean.
    pub sem_context_tokens: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub per_split: BTreeMap<Split, SplitCounts>,
    /// Unique questions and totals over the whole dataset.
    pub total: SplitCounts,
    pub per_method: BTreeMap<RetrievalMethod, MethodStats>,
}

impl DatasetStats {
    pub fn compute(dataset: &[QaTriple]) -> Result<Self> {
        let (per_split, total) = split_counts(dataset)?;
        Ok(DatasetStats {
            per_split,
            total,
            per_method: method_stats(dataset)?,
        })
    }
}

fn count(triples: &[&QaTriple]) -> Result<SplitCounts> {
    let mut questions = HashSet::new();
    let mut c = SplitCounts::default();
    for t in triples {
        match t.gold_label()? {
            ExampleLabel::Hallucinated => c.n_hallucinated += 1,
            ExampleLabel::NotHallucinated => c.n_not_hallucinated += 1,
        }
        questions.insert(question_key(&t.question));
        c.n_triples += 1;
    }
    c.n_questions = questions.len();
    Ok(c)
}

/// Per-split and overall counts of unique questions, triples and labels.
/// Every triple must carry a gold example label.
pub fn split_counts(dataset: &[QaTriple]) -> Result<(BTreeMap<Split, SplitCounts>, SplitCounts)> {
    let mut per_split = BTreeMap::new();
    for split in Split::ALL {
        let members: Vec<&QaTriple> = dataset.iter().filter(|t| t.split == split).collect();
        if !members.is_empty() {
            per_split.insert(split, count(&members)?);
        }
    }
    let all: Vec<&QaTriple> = dataset.iter().collect();
    Ok((per_split, count(&all)?))
}

/// Hallucination rate and context length per retrieval method. Context
/// length is the [`tokenize`] count of the raw context.
pub fn method_stats(dataset: &[QaTriple]) -> Result<BTreeMap<RetrievalMethod, MethodStats>> {
    let mut out = BTreeMap::new();
    for method in RetrievalMethod::ALL {
        let members: Vec<&QaTriple> = dataset.iter().filter(|t| t.retrieval_method == method).collect();
        if members.is_empty() {
            continue;
        }
        let n = members.len();
        let mut hallucinated = 0usize;
        let mut lengths = Vec::with_capacity(n);
        for t in &members {
            if t.gold_label()? == ExampleLabel::Hallucinated {
                hallucinated += 1;
            }
            lengths.push(tokenize(&t.context_raw).len() as f64);
        }
        let mean = lengths.iter().sum::<f64>() / n as f64;
        let sd = if n > 1 {
            (lengths.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        out.insert(
            method,
            MethodStats {
                hallucinated_pct: 100.0 * hallucinated as f64 / n as f64,
                n_examples: n,
                mean_context_tokens: mean,
                sd_context_tokens: sd,
                sem_context_tokens: sd / (n as f64).sqrt(),
            },
        );
    }
    Ok(out)
}
