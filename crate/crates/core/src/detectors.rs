//! Hallucination detectors.
//!
//! The similarity detectors score every answer sentence against every
//! context sentence once ([`score_triple`]) and then apply thresholds
//! ([`decide`]). An answer sentence is supported when some context sentence
//! is similar enough; the answer is hallucinated when any sentence is not
//! supported. Because "some context sentence passes cosine OR overlap" is
//! the same as "max cosine passes OR max overlap passes", only the two
//! per-sentence maxima are kept, which also makes threshold sweeps cheap.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{ExampleLabel, QaTriple};
use crate::error::{Error, Result};
use crate::similarity::{cosine, overlap_detail, Embedder, PhraseBound};
use crate::textproc::{tokenize, TokenSequence};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DetectorMode {
    Cosine,
    Overlap,
    Hybrid,
    Keyword,
}

impl DetectorMode {
    pub fn needs_embeddings(self) -> bool {
        matches!(self, DetectorMode::Cosine | DetectorMode::Hybrid)
    }

    pub fn display_name(self) -> &'static str {
        match self {
            DetectorMode::Cosine => "Sim-cosine",
            DetectorMode::Overlap => "Sim-overlap",
            DetectorMode::Hybrid => "Sim-hybrid",
            DetectorMode::Keyword => "Keyword-match",
        }
    }
}

impl fmt::Display for DetectorMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DetectorMode::Cosine => "cosine",
            DetectorMode::Overlap => "overlap",
            DetectorMode::Hybrid => "hybrid",
            DetectorMode::Keyword => "keyword",
        })
    }
}

impl FromStr for DetectorMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "cosine" | "sim-cosine" => Ok(DetectorMode::Cosine),
            "overlap" | "sim-overlap" => Ok(DetectorMode::Overlap),
            "hybrid" | "sim-hybrid" => Ok(DetectorMode::Hybrid),
            "keyword" | "keyword-match" => Ok(DetectorMode::Keyword),
            other => Err(format!("unknown detector mode `{other}`")),
        }
    }
}

/// Decision thresholds. Every comparison against them is strict (`>`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Thresholds {
    pub t1_cosine: f64,
    pub t2_overlap: f64,
    pub t3_keyword: f64,
}

impl Default for Thresholds {
    /// The values tuned on the development split for the single-measure
    /// detectors.
    fn default() -> Self {
        Thresholds {
            t1_cosine: 0.6,
            t2_overlap: 0.1,
            t3_keyword: 0.2,
        }
    }
}

impl Thresholds {
    pub fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("t1_cosine", self.t1_cosine),
            ("t2_overlap", self.t2_overlap),
            ("t3_keyword", self.t3_keyword),
        ] {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::InvalidThreshold { name, value });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Measure {
    Cosine,
    Overlap,
}

/// Best context match for one answer sentence.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SentenceEvidence {
    /// Context sentence index and score with the highest cosine.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub best_cosine: Option<(usize, f64)>,
    /// Context sentence index and score with the highest overlap ratio.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub best_overlap: Option<(usize, f64)>,
    /// Which measure (checked cosine first) accepted the sentence, and the
    /// context sentence it matched.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub supported_by: Option<(usize, Measure)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeywordEvidence {
    pub keywords: Vec<String>,
    pub hallucinated: Vec<String>,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionResult {
    pub triple_id: String,
    pub mode: DetectorMode,
    pub example_label: ExampleLabel,
    pub unsupported_sentence_indices: BTreeSet<usize>,
    pub per_sentence_evidence: Vec<SentenceEvidence>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub keyword: Option<KeywordEvidence>,
}

/// Per-sentence maxima over the context for one triple.
#[derive(Debug, Clone, PartialEq)]
pub struct TripleScores {
    pub triple_id: String,
    pub sentences: Vec<SentenceEvidence>,
}

fn check_nonempty(triple: &QaTriple) -> Result<()> {
    if triple.answer_sentences.is_empty() {
        return Err(Error::EmptyInput("answer has no sentences"));
    }
    if triple.context_sentences.is_empty() {
        return Err(Error::EmptyInput("context has no sentences"));
    }
    Ok(())
}

fn argmax(scores: impl Iterator<Item = f64>) -> Option<(usize, f64)> {
    // Lowest index wins ties.
    scores.enumerate().fold(None, |best, (i, s)| match best {
        Some((_, b)) if s <= b => best,
        _ => Some((i, s)),
    })
}

fn max_overlap(sent: &TokenSequence, context: &[TokenSequence], bound: PhraseBound) -> Option<(usize, f64)> {
    argmax(context.iter().map(|c| {
        if sent.is_empty() || c.is_empty() {
            0.0
        } else {
            overlap_detail(sent, c, bound).map_or(0.0, |o| o.ratio)
        }
    }))
}

fn max_cosine(sent: &str, context: &[String], embedder: &Embedder) -> Result<Option<(usize, f64)>> {
    let u = embedder.embed_one(sent)?;
    let vs = embedder.embed(context)?;
    let scores = vs.iter().map(|v| cosine(&u, v)).collect::<Result<Vec<_>>>()?;
    Ok(argmax(scores.into_iter()))
}

/// True iff some context sentence has cosine similarity above `t1`.
pub fn sentence_supported_cosine(
    sent: &str,
    context_sentences: &[String],
    t1: f64,
    embedder: &Embedder,
) -> Result<bool> {
    if context_sentences.is_empty() {
        return Err(Error::EmptyInput("context has no sentences"));
    }
    Ok(max_cosine(sent, context_sentences, embedder)?.is_some_and(|(_, s)| s > t1))
}

/// True iff some context sentence has overlap ratio above `t2`.
pub fn sentence_supported_overlap(sent: &str, context_sentences: &[String], t2: f64) -> Result<bool> {
    if context_sentences.is_empty() {
        return Err(Error::EmptyInput("context has no sentences"));
    }
    let ctx: Vec<TokenSequence> = context_sentences.iter().map(|c| tokenize(c)).collect();
    Ok(max_overlap(&tokenize(sent), &ctx, PhraseBound::Min).is_some_and(|(_, s)| s > t2))
}

/// Computes the similarity maxima `mode` needs for every answer sentence.
pub fn score_triple(
    triple: &QaTriple,
    mode: DetectorMode,
    embedder: Option<&Embedder>,
    bound: PhraseBound,
) -> Result<TripleScores> {
    check_nonempty(triple)?;
    let use_cos = mode.needs_embeddings();
    let use_ov = matches!(mode, DetectorMode::Overlap | DetectorMode::Hybrid);
    let embedder = if use_cos {
        Some(embedder.ok_or(Error::NoProvider("cosine similarity needs an embedder"))?)
    } else {
        None
    };
    let ctx_tokens: Vec<TokenSequence> = if use_ov {
        triple.context_sentences.iter().map(|c| tokenize(c)).collect()
    } else {
        Vec::new()
    };

    let sentences = triple
        .answer_sentences
        .iter()
        .map(|sent| {
            let best_cosine = match embedder {
                Some(e) => max_cosine(sent, &triple.context_sentences, e)?,
                None => None,
            };
            let best_overlap = if use_ov {
                max_overlap(&tokenize(sent), &ctx_tokens, bound)
            } else {
                None
            };
            Ok(SentenceEvidence {
                best_cosine,
                best_overlap,
                supported_by: None,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TripleScores {
        triple_id: triple.id.clone(),
        sentences,
    })
}

/// Applies thresholds to precomputed scores, following the
/// cosine-then-overlap order of the hybrid rule.
pub fn decide(scores: &TripleScores, mode: DetectorMode, thresholds: &Thresholds) -> DetectionResult {
    let mut unsupported = BTreeSet::new();
    let evidence = scores
        .sentences
        .iter()
        .enumerate()
        .map(|(i, ev)| {
            let by_cos = ev
                .best_cosine
                .filter(|(_, s)| *s > thresholds.t1_cosine)
                .map(|(j, _)| (j, Measure::Cosine));
            let by_ov = ev
                .best_overlap
                .filter(|(_, s)| *s > thresholds.t2_overlap)
                .map(|(j, _)| (j, Measure::Overlap));
            let supported_by = match mode {
                DetectorMode::Cosine => by_cos,
                DetectorMode::Overlap => by_ov,
                DetectorMode::Hybrid => by_cos.or(by_ov),
                DetectorMode::Keyword => None,
            };
            if supported_by.is_none() {
                unsupported.insert(i);
            }
            SentenceEvidence {
                supported_by,
                ..ev.clone()
            }
        })
        .collect();
    DetectionResult {
        triple_id: scores.triple_id.clone(),
        mode,
        example_label: if unsupported.is_empty() {
            ExampleLabel::NotHallucinated
        } else {
            ExampleLabel::Hallucinated
        },
        unsupported_sentence_indices: unsupported,
        per_sentence_evidence: evidence,
        keyword: None,
    }
}

/// Sentence-similarity detection for one triple.
pub fn detect_similarity(
    triple: &QaTriple,
    mode: DetectorMode,
    thresholds: &Thresholds,
    embedder: Option<&Embedder>,
) -> Result<DetectionResult> {
    if mode == DetectorMode::Keyword {
        return Err(Error::EmptyInput("keyword mode needs keywords; use detect_keyword"));
    }
    thresholds.validate()?;
    let scores = score_triple(triple, mode, embedder, PhraseBound::Min)?;
    Ok(decide(&scores, mode, thresholds))
}

/// Embeds every answer and context sentence of `triples` in one provider
/// round trip, so later per-triple lookups are cache hits.
pub fn warm_embeddings(triples: &[QaTriple], embedder: &Embedder) -> Result<()> {
    let mut seen = HashSet::new();
    let texts: Vec<String> = triples
        .iter()
        .flat_map(|t| t.answer_sentences.iter().chain(&t.context_sentences))
        .filter(|s| seen.insert(s.as_str()))
        .cloned()
        .collect();
    embedder.embed(&texts).map(|_| ())
}

/// Scores many triples in parallel; output follows input order.
pub fn score_batch(
    triples: &[QaTriple],
    mode: DetectorMode,
    embedder: Option<&Embedder>,
    bound: PhraseBound,
) -> Result<Vec<TripleScores>> {
    if mode.needs_embeddings() {
        if let Some(e) = embedder {
            warm_embeddings(triples, e)?;
        }
    }
    triples
        .par_iter()
        .map(|t| score_triple(t, mode, embedder, bound))
        .collect()
}

/// Similarity detection over many triples, sorted by triple id.
pub fn detect_batch(
    triples: &[QaTriple],
    mode: DetectorMode,
    thresholds: &Thresholds,
    embedder: Option<&Embedder>,
) -> Result<Vec<DetectionResult>> {
    thresholds.validate()?;
    let mut out: Vec<DetectionResult> = score_batch(triples, mode, embedder, PhraseBound::Min)?
        .iter()
        .map(|s| decide(s, mode, thresholds))
        .collect();
    out.sort_by(|a, b| a.triple_id.cmp(&b.triple_id));
    Ok(out)
}

/// Keywords after shared normalization, empty ones dropped, duplicates
/// removed in first-occurrence order.
pub fn normalize_keywords(keywords: &[String]) -> Vec<TokenSequence> {
    let mut seen = HashSet::new();
    keywords
        .iter()
        .map(|k| tokenize(k))
        .filter(|k| !k.is_empty() && seen.insert(k.joined()))
        .collect()
}

/// Fraction of keywords absent from the context, with the absent ones.
pub fn keyword_ratio(triple: &QaTriple, keywords: &[String]) -> Result<KeywordEvidence> {
    let normalized = normalize_keywords(keywords);
    if normalized.is_empty() {
        return Err(Error::EmptyInput("keyword list"));
    }
    let context = if triple.context_raw.trim().is_empty() {
        tokenize(&triple.context_sentences.join(" "))
    } else {
        tokenize(&triple.context_raw)
    };
    let hallucinated: Vec<String> = normalized
        .iter()
        .filter(|k| !context.contains_run(k))
        .map(TokenSequence::joined)
        .collect();
    Ok(KeywordEvidence {
        ratio: hallucinated.len() as f64 / normalized.len() as f64,
        keywords: normalized.iter().map(TokenSequence::joined).collect(),
        hallucinated,
    })
}

/// Keyword-match detection: hallucinated when the fraction of keywords
/// missing from the context exceeds `t3`.
pub fn detect_keyword(triple: &QaTriple, keywords: &[String], t3: f64) -> Result<DetectionResult> {
    if !(0.0..=1.0).contains(&t3) {
        return Err(Error::InvalidThreshold {
            name: "t3_keyword",
            value: t3,
        });
    }
    let evidence = keyword_ratio(triple, keywords)?;
    Ok(decide_keyword(triple, evidence, t3))
}

pub(crate) fn decide_keyword(triple: &QaTriple, evidence: KeywordEvidence, t3: f64) -> DetectionResult {
    let missing: Vec<TokenSequence> = evidence
        .hallucinated
        .iter()
        .map(|k| TokenSequence::from_tokens(k.split(' ')))
        .collect();
    let unsupported = triple
        .answer_sentences
        .iter()
        .enumerate()
        .filter(|(_, s)| {
            let toks = tokenize(s);
            missing.iter().any(|k| toks.contains_run(k))
        })
        .map(|(i, _)| i)
        .collect();
    DetectionResult {
        triple_id: triple.id.clone(),
        mode: DetectorMode::Keyword,
        example_label: if evidence.ratio > t3 {
            ExampleLabel::Hallucinated
        } else {
            ExampleLabel::NotHallucinated
        },
        unsupported_sentence_indices: unsupported,
        per_sentence_evidence: Vec::new(),
        keyword: Some(evidence),
    }
}

/// Keyword evidence for batch runs, where an extractor may return nothing
/// usable. An empty keyword list has no absent keywords, so its ratio is 0.
pub(crate) fn keyword_evidence_lenient(triple: &QaTriple, keywords: &[String]) -> Result<KeywordEvidence> {
    if normalize_keywords(keywords).is_empty() {
        return Ok(KeywordEvidence {
            keywords: Vec::new(),
            hallucinated: Vec::new(),
            ratio: 0.0,
        });
    }
    keyword_ratio(triple, keywords)
}

/// Keyword-match detection over many triples, sorted by triple id.
/// `keywords` is keyed by triple id; a triple whose keyword list is empty
/// after normalization is judged not hallucinated.
pub fn detect_keyword_batch(
    triples: &[QaTriple],
    keywords: &BTreeMap<String, Vec<String>>,
    t3: f64,
) -> Result<Vec<DetectionResult>> {
    if !(0.0..=1.0).contains(&t3) {
        return Err(Error::InvalidThreshold {
            name: "t3_keyword",
            value: t3,
        });
    }
    let mut out = triples
        .par_iter()
        .map(|t| {
            let kws = keywords
                .get(&t.id)
                .ok_or_else(|| Error::MissingKeywords(t.id.clone()))?;
            Ok(decide_keyword(t, keyword_evidence_lenient(t, kws)?, t3))
        })
        .collect::<Result<Vec<_>>>()?;
    out.sort_by(|a, b| a.triple_id.cmp(&b.triple_id));
    Ok(out)
}
