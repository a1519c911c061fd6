use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DocNode, Level};
use crate::error::{Error, Result};
use crate::similarity::{Embedder, EmbeddingVector};
use crate::textproc::tokenize;

pub const INDEX_FORMAT: &str = "groundcheck-index";
pub const INDEX_VERSION: u32 = 1;

/// BM25 parameters. Defaults follow the Lucene/Pyserini toolkit setting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Bm25Params { k1: 0.9, b: 0.4 }
    }
}

/// One indexed node. Units are stored in pre-order, so unit order is
/// document order and a subtree occupies a contiguous range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Unit {
    pub node_id: String,
    pub level: Level,
    pub text: String,
    pub len: u32,
    pub parent: Option<u32>,
    pub children: Vec<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Posting {
    pub unit: u32,
    pub tf: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct DenseVectors {
    provider: String,
    vectors: Vec<EmbeddingVector>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiGranularityIndex {
    format: String,
    version: u32,
    units: Vec<Unit>,
    roots: Vec<u32>,
    /// Term -> postings sorted by unit.
    postings: BTreeMap<String, Vec<Posting>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dense: Option<DenseVectors>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dense_error: Option<String>,
}

impl MultiGranularityIndex {
    /// Indexes every node of every tree. With an embedder, dense vectors are
    /// computed per unit; a provider failure leaves a sparse-only index and
    /// records the error.
    pub fn build(trees: &[DocNode], embedder: Option<&Embedder>) -> Result<Self> {
        if trees.is_empty() {
            return Err(Error::EmptyInput("no documents to index"));
        }
        let mut units = Vec::new();
        let mut roots = Vec::new();
        for tree in trees {
            roots.push(push_units(tree, None, &mut units));
        }

        let mut postings: BTreeMap<String, Vec<Posting>> = BTreeMap::new();
        for (uid, unit) in units.iter_mut().enumerate() {
            let toks = tokenize(&unit.text);
            unit.len = toks.len() as u32;
            let mut tf: BTreeMap<&str, u32> = BTreeMap::new();
            for t in toks.iter() {
                *tf.entry(t).or_default() += 1;
            }
            for (term, count) in tf {
                postings.entry(term.to_string()).or_default().push(Posting {
                    unit: uid as u32,
                    tf: count,
                });
            }
        }

        let mut index = MultiGranularityIndex {
            format: INDEX_FORMAT.to_string(),
            version: INDEX_VERSION,
            units,
            roots,
            postings,
            dense: None,
            dense_error: None,
        };
        if let Some(e) = embedder {
            let texts: Vec<String> = index.units.iter().map(|u| u.text.clone()).collect();
            match e.embed(&texts) {
                Ok(vectors) => {
                    index.dense = Some(DenseVectors {
                        provider: e.identity().to_string(),
                        vectors,
                    })
                }
                Err(err) => index.dense_error = Some(err.to_string()),
            }
        }
        Ok(index)
    }

    pub fn units(&self) -> &[Unit] {
        &self.units
    }

    pub fn unit(&self, id: usize) -> &Unit {
        &self.units[id]
    }

    pub fn roots(&self) -> impl Iterator<Item = usize> + '_ {
        self.roots.iter().map(|r| *r as usize)
    }

    pub fn postings(&self, term: &str) -> &[Posting] {
        self.postings.get(term).map_or(&[], Vec::as_slice)
    }

    pub fn vocabulary(&self) -> impl Iterator<Item = &str> {
        self.postings.keys().map(String::as_str)
    }

    pub fn unit_len(&self, id: usize) -> u32 {
        self.units[id].len
    }

    pub fn has_dense(&self) -> bool {
        self.dense.is_some()
    }

    /// Why dense vectors are missing, when a provider failed during build.
    pub fn dense_error(&self) -> Option<&str> {
        self.dense_error.as_deref()
    }

    pub fn dense_provider(&self) -> Option<&str> {
        self.dense.as_ref().map(|d| d.provider.as_str())
    }

    pub(crate) fn dense_vector(&self, id: usize) -> Option<&EmbeddingVector> {
        self.dense.as_ref().map(|d| &d.vectors[id])
    }

    /// Unit ids in the scoring collection for `level` (all units for
    /// `None`).
    pub fn collection(&self, level: Option<Level>) -> impl Iterator<Item = usize> + '_ {
        self.units
            .iter()
            .enumerate()
            .filter(move |(_, u)| level.is_none_or(|l| u.level == l))
            .map(|(i, _)| i)
    }

    /// BM25 scores of every unit in the `level` collection that matches at
    /// least one query token. Collection statistics (unit count, document
    /// frequency, mean length) are taken over that collection. Repeated
    /// query tokens contribute repeatedly.
    pub fn bm25_scores(&self, query: &str, level: Option<Level>, params: Bm25Params) -> BTreeMap<usize, f64> {
        let in_level = |u: usize| level.is_none_or(|l| self.units[u].level == l);
        let (n, total_len) = self
            .collection(level)
            .fold((0usize, 0u64), |(n, s), u| (n + 1, s + u64::from(self.units[u].len)));
        let mut scores = BTreeMap::new();
        if n == 0 {
            return scores;
        }
        let avgdl = (total_len as f64 / n as f64).max(f64::MIN_POSITIVE);
        for term in tokenize(query).iter() {
            let posts: Vec<&Posting> = self
                .postings(term)
                .iter()
                .filter(|p| in_level(p.unit as usize))
                .collect();
            if posts.is_empty() {
                continue;
            }
            let df = posts.len() as f64;
            let idf = (1.0 + (n as f64 - df + 0.5) / (df + 0.5)).ln();
            for p in posts {
                let tf = f64::from(p.tf);
                let dl = f64::from(self.units[p.unit as usize].len);
                let norm = params.k1 * (1.0 - params.b + params.b * dl / avgdl);
                *scores.entry(p.unit as usize).or_insert(0.0) += idf * tf * (params.k1 + 1.0) / (tf + norm);
            }
        }
        scores
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::write_atomic(path, &serde_json::to_vec(self)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let index: MultiGranularityIndex = serde_json::from_slice(&bytes)?;
        if index.format != INDEX_FORMAT {
            return Err(Error::IndexFormat(format!("not an index file: `{}`", index.format)));
        }
        if index.version != INDEX_VERSION {
            return Err(Error::IndexFormat(format!(
                "index version {} is not supported (expected {INDEX_VERSION})",
                index.version
            )));
        }
        Ok(index)
    }
}

fn push_units(node: &DocNode, parent: Option<u32>, units: &mut Vec<Unit>) -> u32 {
    let id = units.len() as u32;
    units.push(Unit {
        node_id: node.id.clone(),
        level: node.level,
        text: node.text.clone(),
        len: 0,
        parent,
        children: Vec::new(),
    });
    let children: Vec<u32> = node.children.iter().map(|c| push_units(c, Some(id), units)).collect();
    units[id as usize].children = children;
    id
}
