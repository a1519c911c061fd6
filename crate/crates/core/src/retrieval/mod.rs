//! Retrieval over a manual indexed at document, section and paragraph
//! granularity.

mod index;
mod manual;
mod search;

pub use index::{Bm25Params, MultiGranularityIndex, Posting, Unit, INDEX_FORMAT, INDEX_VERSION};
pub use manual::{ingest_manual, parse_manual, ManualFormat};
pub use search::{search_adaptive, search_dense, search_ensemble, search_sparse, EnsembleHits, RetrievalConfig};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Level {
    Document,
    Section,
    Paragraph,
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Level::Document => "document",
            Level::Section => "section",
            Level::Paragraph => "paragraph",
        })
    }
}

impl FromStr for Level {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "document" | "doc" => Ok(Level::Document),
            "section" | "sec" => Ok(Level::Section),
            "paragraph" | "para" => Ok(Level::Paragraph),
            other => Err(format!("unknown level `{other}`")),
        }
    }
}

/// One node of a manual. Paragraphs are leaves; a node with children has
/// the newline-joined text of its children.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocNode {
    pub id: String,
    pub level: Level,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
    pub text: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<DocNode>,
}

impl DocNode {
    /// Number of nodes in this subtree, itself included.
    pub fn node_count(&self) -> usize {
        1 + self.children.iter().map(DocNode::node_count).sum::<usize>()
    }

    /// Checks the level nesting and text-concatenation invariants.
    pub fn is_well_formed(&self) -> bool {
        let child_level = match self.level {
            Level::Document => Some(Level::Section),
            Level::Section => Some(Level::Paragraph),
            Level::Paragraph => None,
        };
        match child_level {
            None => self.children.is_empty(),
            Some(expected) => {
                self.children.iter().all(|c| c.level == expected && c.is_well_formed())
                    && (self.children.is_empty() || self.text == joined_text(&self.children))
            }
        }
    }
}

pub(crate) fn joined_text(children: &[DocNode]) -> String {
    children.iter().map(|c| c.text.as_str()).collect::<Vec<_>>().join("\n")
}

/// One search result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalHit {
    pub node_id: String,
    pub level: Level,
    pub score: f64,
    pub text: String,
}

/// Descending score, then ascending node id.
pub(crate) fn sort_hits(hits: &mut [RetrievalHit]) {
    hits.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.node_id.cmp(&b.node_id)));
}
