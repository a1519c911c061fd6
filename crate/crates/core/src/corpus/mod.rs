//! Annotated (question, context, answer) triples: loading, label rules and
//! dataset accounting.

mod adapter;
mod stats;

pub use adapter::{load_dataset, SchemaAdapter};
pub use stats::{method_stats, split_counts, DatasetStats, MethodStats, SplitCounts};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RetrievalMethod {
    Sparse,
    EnsembleTop1,
    EnsembleTop3,
    AdaptiveEnsemble,
}

impl RetrievalMethod {
    pub const ALL: [RetrievalMethod; 4] = [
        RetrievalMethod::Sparse,
        RetrievalMethod::EnsembleTop1,
        RetrievalMethod::EnsembleTop3,
        RetrievalMethod::AdaptiveEnsemble,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RetrievalMethod::Sparse => "Sparse",
            RetrievalMethod::EnsembleTop1 => "EnsembleTop1",
            RetrievalMethod::EnsembleTop3 => "EnsembleTop3",
            RetrievalMethod::AdaptiveEnsemble => "AdaptiveEnsemble",
        }
    }
}

impl fmt::Display for RetrievalMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RetrievalMethod {
    type Err = Error;

    /// Accepts the canonical names and the common spellings used in result
    /// files (`lucene`, `top-1 ensemble`, `A - Ensemble`, ...).
    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| c.is_alphanumeric())
            .collect::<String>()
            .to_lowercase();
        let method =
            match key.as_str() {
                "sparse" | "lucene" | "lucenesearch" | "bm25" | "tfidf" | "sparsesearch" => RetrievalMethod::Sparse,
                "ensembletop1" | "top1" | "top1ensemble" | "ensemble1" | "ensembletop1search"
                | "top1ensemblesearch" => RetrievalMethod::EnsembleTop1,
                "ensembletop3" | "top3" | "top3ensemble" | "ensemble3" | "ensembletop3search"
                | "top3ensemblesearch" => RetrievalMethod::EnsembleTop3,
                "adaptiveensemble" | "aensemble" | "adaptive" | "adaptiveensemblesearch" | "adaptivesearch" => {
                    RetrievalMethod::AdaptiveEnsemble
                }
                _ => return Err(Error::UnknownRetrievalMethod(s.to_string())),
            };
        Ok(method)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Dev, Split::Test];
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "Train",
            Split::Dev => "Dev",
            Split::Test => "Test",
        })
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "train" | "training" => Ok(Split::Train),
            "dev" | "development" | "val" | "valid" | "validation" => Ok(Split::Dev),
            "test" | "testing" => Ok(Split::Test),
            other => Err(format!("unknown split `{other}`")),
        }
    }
}

/// Sentence-level gold verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SentenceVerdict {
    Supported,
    Conflicted,
    Neither,
}

impl SentenceVerdict {
    pub const ALL: [SentenceVerdict; 3] = [
        SentenceVerdict::Supported,
        SentenceVerdict::Conflicted,
        SentenceVerdict::Neither,
    ];
}

impl fmt::Display for SentenceVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SentenceVerdict::Supported => "Supported",
            SentenceVerdict::Conflicted => "Conflicted",
            SentenceVerdict::Neither => "Neither",
        })
    }
}

impl FromStr for SentenceVerdict {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let key: String = s
            .chars()
            .filter(|c| c.is_alphanumeric())
            .collect::<String>()
            .to_lowercase();
        match key.as_str() {
            "supported" | "support" | "s" => Ok(SentenceVerdict::Supported),
            "conflicted" | "conflict" | "conflicting" | "c" => Ok(SentenceVerdict::Conflicted),
            "neither" | "neithersupportednorconflicted" | "n" | "unsupported" => Ok(SentenceVerdict::Neither),
            _ => Err(format!("unknown sentence label `{s}`")),
        }
    }
}

/// Example-level label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ExampleLabel {
    Hallucinated,
    NotHallucinated,
}

impl ExampleLabel {
    pub const ALL: [ExampleLabel; 2] = [ExampleLabel::Hallucinated, ExampleLabel::NotHallucinated];
}

impl fmt::Display for ExampleLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExampleLabel::Hallucinated => "Hallucinated",
            ExampleLabel::NotHallucinated => "NotHallucinated",
        })
    }
}

impl FromStr for ExampleLabel {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let key: String = s
            .chars()
            .filter(|c| c.is_alphanumeric())
            .collect::<String>()
            .to_lowercase();
        match key.as_str() {
            "hallucinated" | "hallucination" | "hal" | "1" | "true" | "yes" => Ok(ExampleLabel::Hallucinated),
            "nothallucinated" | "nonhallucinated" | "nhal" | "nothal" | "0" | "false" | "no" => {
                Ok(ExampleLabel::NotHallucinated)
            }
            _ => Err(format!("unknown example label `{s}`")),
        }
    }
}

/// One annotated example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaTriple {
    pub id: String,
    pub question: String,
    pub context_raw: String,
    pub context_sentences: Vec<String>,
    pub answer_raw: String,
    pub answer_sentences: Vec<String>,
    pub retrieval_method: RetrievalMethod,
    pub split: Split,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_sentence_labels: Option<Vec<SentenceVerdict>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_example_label: Option<ExampleLabel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answerable: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub does_not_answer: Option<bool>,
}

impl QaTriple {
    /// Checks the sentence-label length invariant.
    pub fn validate(&self) -> Result<()> {
        if let Some(labels) = &self.gold_sentence_labels {
            if labels.len() != self.answer_sentences.len() {
                return Err(Error::LabelLengthMismatch {
                    id: self.id.clone(),
                    labels: labels.len(),
                    sentences: self.answer_sentences.len(),
                });
            }
        }
        Ok(())
    }

    pub fn gold_label(&self) -> Result<ExampleLabel> {
        self.gold_example_label
            .ok_or_else(|| Error::MissingGoldLabel(self.id.clone()))
    }
}

/// Majority vote over one sentence's annotator verdicts.
///
/// Returns the verdict with strictly more than half of the votes and
/// `true`, or `(Neither, false)` when no verdict has a strict majority; such
/// sentences need expert adjudication.
pub fn aggregate_sentence_votes(votes: &[SentenceVerdict]) -> Result<(SentenceVerdict, bool)> {
    if votes.is_empty() {
        return Err(Error::EmptyInput("vote list"));
    }
    let winner = SentenceVerdict::ALL
        .into_iter()
        .find(|v| 2 * votes.iter().filter(|x| *x == v).count() > votes.len());
    Ok(match winner {
        Some(v) => (v, true),
        None => (SentenceVerdict::Neither, false),
    })
}

/// Example label from sentence labels.
///
/// Not hallucinated iff every sentence is supported, except that an
/// irrelevant context (`answerable = false`) paired with an answer that does
/// not decline (`does_not_answer = false`) is always hallucinated.
pub fn derive_example_label(
    sentence_labels: &[SentenceVerdict],
    answerable: Option<bool>,
    does_not_answer: Option<bool>,
) -> Result<ExampleLabel> {
    if sentence_labels.is_empty() {
        return Err(Error::EmptyInput("sentence label list"));
    }
    let override_fires = answerable == Some(false) && does_not_answer == Some(false);
    let all_supported = sentence_labels.iter().all(|l| *l == SentenceVerdict::Supported);
    Ok(if all_supported && !override_fires {
        ExampleLabel::NotHallucinated
    } else {
        ExampleLabel::Hallucinated
    })
}

/// Whitespace-normalized question text, the identity used for counting
/// unique questions.
pub fn question_key(question: &str) -> String {
    question.split_whitespace().collect::<Vec<_>>().join(" ")
}
