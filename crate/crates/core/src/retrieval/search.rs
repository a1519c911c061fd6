use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{sort_hits, Bm25Params, Level, MultiGranularityIndex, RetrievalHit};
use crate::error::{Error, Result};
use crate::similarity::{cosine, Embedder};

/// Retrieval knobs. Ensemble weights and the adaptive descent rule are
/// free parameters; the defaults are equal weights, `descent_threshold =
/// 0.5` and `selection_ratio = 0.5`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetrievalConfig {
    pub bm25: Bm25Params,
    /// Each retriever returns `over_retrieve * k` candidates before merging.
    pub over_retrieve: usize,
    pub sparse_weight: f64,
    pub dense_weight: f64,
    /// Adaptive search keeps a node whole when its normalized score reaches
    /// this value, and descends into its children otherwise.
    pub descent_threshold: f64,
    /// Children scoring at least this fraction of the best sibling are kept.
    pub selection_ratio: f64,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        RetrievalConfig {
            bm25: Bm25Params::default(),
            over_retrieve: 5,
            sparse_weight: 0.5,
            dense_weight: 0.5,
            descent_threshold: 0.5,
            selection_ratio: 0.5,
        }
    }
}

fn hit(index: &MultiGranularityIndex, unit: usize, score: f64) -> RetrievalHit {
    let u = index.unit(unit);
    RetrievalHit {
        node_id: u.node_id.clone(),
        level: u.level,
        score,
        text: u.text.clone(),
    }
}

fn top_k(index: &MultiGranularityIndex, scores: impl IntoIterator<Item = (usize, f64)>, k: usize) -> Vec<RetrievalHit> {
    let mut hits: Vec<RetrievalHit> = scores.into_iter().map(|(u, s)| hit(index, u, s)).collect();
    sort_hits(&mut hits);
    hits.truncate(k);
    hits
}

/// BM25 top-`k` over units of `level` (all levels for `None`). Units that
/// share no token with the query are not returned.
pub fn search_sparse(
    index: &MultiGranularityIndex,
    query: &str,
    k: usize,
    level: Option<Level>,
    params: Bm25Params,
) -> Vec<RetrievalHit> {
    if k == 0 {
        return Vec::new();
    }
    top_k(index, index.bm25_scores(query, level, params), k)
}

fn dense_scores(
    index: &MultiGranularityIndex,
    embedder: &Embedder,
    query: &str,
    level: Option<Level>,
) -> Result<BTreeMap<usize, f64>> {
    if !index.has_dense() {
        return Err(Error::DenseDisabled);
    }
    if index.dense_provider() != Some(embedder.identity()) {
        return Err(Error::CacheIdentity {
            path: "<index>".into(),
            expected: index.dense_provider().unwrap_or_default().to_string(),
            found: embedder.identity().to_string(),
        });
    }
    let q = embedder.embed_one(query)?;
    index
        .collection(level)
        .map(|u| {
            let v = index.dense_vector(u).expect("dense index covers every unit");
            Ok((u, cosine(&q, v)?))
        })
        .collect()
}

/// Exact cosine top-`k` between the query embedding and unit embeddings.
pub fn search_dense(
    index: &MultiGranularityIndex,
    embedder: &Embedder,
    query: &str,
    k: usize,
    level: Option<Level>,
) -> Result<Vec<RetrievalHit>> {
    if k == 0 {
        return Ok(Vec::new());
    }
    Ok(top_k(index, dense_scores(index, embedder, query, level)?, k))
}

/// Min-max normalization to `[0, 1]`; a constant list maps to all ones.
fn min_max(scores: &BTreeMap<usize, f64>) -> BTreeMap<usize, f64> {
    let (lo, hi) = scores.values().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| {
        (lo.min(*s), hi.max(*s))
    });
    scores
        .iter()
        .map(|(u, s)| {
            let n = if hi > lo { (s - lo) / (hi - lo) } else { 1.0 };
            (*u, n)
        })
        .collect()
}

fn keep_top(scores: BTreeMap<usize, f64>, index: &MultiGranularityIndex, n: usize) -> BTreeMap<usize, f64> {
    let mut v: Vec<(usize, f64)> = scores.into_iter().collect();
    v.sort_by(|a, b| {
        b.1.total_cmp(&a.1)
            .then_with(|| index.unit(a.0).node_id.cmp(&index.unit(b.0).node_id))
    });
    v.truncate(n);
    v.into_iter().collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleHits {
    pub hits: Vec<RetrievalHit>,
    /// Set when the index or embedder had no dense side and only sparse
    /// scores were used.
    pub sparse_only: bool,
}

/// Sparse/dense ensemble: both retrievers over-retrieve, their score lists
/// are min-max normalized, merged by weighted sum (a side that did not
/// return a unit contributes 0) and reranked to top-`k`.
pub fn search_ensemble(
    index: &MultiGranularityIndex,
    embedder: Option<&Embedder>,
    query: &str,
    k: usize,
    level: Option<Level>,
    config: &RetrievalConfig,
) -> Result<EnsembleHits> {
    if k == 0 {
        return Ok(EnsembleHits {
            hits: Vec::new(),
            sparse_only: false,
        });
    }
    let depth = k.saturating_mul(config.over_retrieve.max(1));
    let sparse = keep_top(index.bm25_scores(query, level, config.bm25), index, depth);
    let dense = match embedder {
        Some(e) if index.has_dense() => Some(keep_top(dense_scores(index, e, query, level)?, index, depth)),
        _ => None,
    };
    let sparse_only = dense.is_none();

    let mut merged: BTreeMap<usize, f64> = BTreeMap::new();
    for (u, s) in min_max(&sparse) {
        *merged.entry(u).or_default() += config.sparse_weight * s;
    }
    if let Some(dense) = &dense {
        for (u, s) in min_max(dense) {
            *merged.entry(u).or_default() += config.dense_weight * s;
        }
    }
    Ok(EnsembleHits {
        hits: top_k(index, merged, k),
        sparse_only,
    })
}

/// Ensemble scores for every unit of every level. BM25 uses each level's
/// own collection statistics; each retriever's scores are then min-max
/// normalized over all units together, so a document competes with its own
/// sections and paragraphs.
fn all_unit_scores(
    index: &MultiGranularityIndex,
    embedder: Option<&Embedder>,
    query: &str,
    config: &RetrievalConfig,
) -> Result<(Vec<f64>, bool)> {
    let n = index.units().len();
    let mut sparse: BTreeMap<usize, f64> = (0..n).map(|u| (u, 0.0)).collect();
    for level in [Level::Document, Level::Section, Level::Paragraph] {
        sparse.extend(index.bm25_scores(query, Some(level), config.bm25));
    }
    let sparse_max = sparse.values().cloned().fold(0.0, f64::max);

    let mut total = vec![0.0; n];
    if sparse_max > 0.0 {
        for (u, s) in min_max(&sparse) {
            total[u] += config.sparse_weight * s;
        }
    }
    let dense = match embedder {
        Some(e) if index.has_dense() => Some(dense_scores(index, e, query, None)?),
        _ => None,
    };
    let sparse_only = dense.is_none();
    if let Some(d) = dense {
        for (u, s) in min_max(&d) {
            total[u] += config.dense_weight * s;
        }
    }
    Ok((total, sparse_only))
}

/// Hierarchical descent per document.
///
/// A node whose score reaches `descent_threshold` (or a paragraph) is taken
/// whole. Otherwise its children scoring at least `selection_ratio` times
/// the best child are visited the same way. A document's hit text is its
/// selected units joined in document order, scored by their mean. Hits are
/// the top-`k` documents.
pub fn search_adaptive(
    index: &MultiGranularityIndex,
    embedder: Option<&Embedder>,
    query: &str,
    k: usize,
    config: &RetrievalConfig,
) -> Result<EnsembleHits> {
    let (scores, sparse_only) = all_unit_scores(index, embedder, query, config)?;
    let mut hits = Vec::new();
    for root in index.roots() {
        let mut selected = Vec::new();
        descend(index, &scores, root, config, &mut selected);
        if selected.is_empty() {
            continue;
        }
        selected.sort_unstable();
        let mean = selected.iter().map(|u| scores[*u]).sum::<f64>() / selected.len() as f64;
        let text = selected
            .iter()
            .map(|u| index.unit(*u).text.as_str())
            .collect::<Vec<_>>()
            .join("\n");
        let node_id = if selected.len() == 1 {
            index.unit(selected[0]).node_id.clone()
        } else {
            selected
                .iter()
                .map(|u| index.unit(*u).node_id.as_str())
                .collect::<Vec<_>>()
                .join("+")
        };
        let level = selected
            .iter()
            .map(|u| index.unit(*u).level)
            .min()
            .expect("nonempty selection");
        hits.push(RetrievalHit {
            node_id,
            level,
            score: mean,
            text,
        });
    }
    sort_hits(&mut hits);
    hits.truncate(k);
    Ok(EnsembleHits { hits, sparse_only })
}

fn descend(index: &MultiGranularityIndex, scores: &[f64], unit: usize, config: &RetrievalConfig, out: &mut Vec<usize>) {
    let children = &index.unit(unit).children;
    if scores[unit] >= config.descent_threshold || children.is_empty() {
        if scores[unit] > 0.0 {
            out.push(unit);
        }
        return;
    }
    let best = children.iter().map(|c| scores[*c as usize]).fold(0.0, f64::max);
    if best <= 0.0 {
        return;
    }
    for c in children {
        let c = *c as usize;
        if scores[c] >= config.selection_ratio * best {
            descend(index, scores, c, config, out);
        }
    }
}
