use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::textproc::{normalize_token, tokenize};

/// English function words excluded from fallback keywords. Sorted.
pub const STOPWORDS: &[&str] = &[
    "a",
    "about",
    "above",
    "after",
    "again",
    "against",
    "all",
    "also",
    "am",
    "an",
    "and",
    "any",
    "are",
    "as",
    "at",
    "be",
    "because",
    "been",
    "before",
    "being",
    "below",
    "between",
    "both",
    "but",
    "by",
    "can",
    "could",
    "did",
    "do",
    "does",
    "doing",
    "down",
    "during",
    "each",
    "few",
    "for",
    "from",
    "further",
    "had",
    "has",
    "have",
    "having",
    "he",
    "her",
    "here",
    "hers",
    "herself",
    "him",
    "himself",
    "his",
    "how",
    "i",
    "if",
    "in",
    "into",
    "is",
    "it",
    "its",
    "itself",
    "just",
    "may",
    "me",
    "might",
    "more",
    "most",
    "must",
    "my",
    "myself",
    "no",
    "nor",
    "not",
    "now",
    "of",
    "off",
    "on",
    "once",
    "only",
    "or",
    "other",
    "our",
    "ours",
    "ourselves",
    "out",
    "over",
    "own",
    "s",
    "same",
    "shall",
    "she",
    "should",
    "so",
    "some",
    "such",
    "t",
    "than",
    "that",
    "the",
    "their",
    "theirs",
    "them",
    "themselves",
    "then",
    "there",
    "these",
    "they",
    "this",
    "those",
    "through",
    "to",
    "too",
    "under",
    "until",
    "up",
    "very",
    "was",
    "we",
    "were",
    "what",
    "when",
    "where",
    "which",
    "while",
    "who",
    "whom",
    "why",
    "will",
    "with",
    "would",
    "you",
    "your",
    "yours",
    "yourself",
    "yourselves",
];

fn is_stopword(token: &str) -> bool {
    STOPWORDS.binary_search(&token).is_ok()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FallbackKeywords {
    pub keywords: Vec<String>,
    /// Set when every token of the answer is a stopword.
    pub all_stopwords: bool,
}

fn is_capitalized(word: &str) -> bool {
    word.chars()
        .find(|c| c.is_alphanumeric())
        .is_some_and(char::is_uppercase)
}

fn ends_clause(word: &str) -> bool {
    let trimmed = word.trim_end_matches(['"', '\'', ')', ']', '\u{201d}', '\u{2019}']);
    trimmed.ends_with(['.', ',', ';', ':', '!', '?'])
}

/// Runs of two or more consecutive capitalized words, split at clause
/// punctuation, with stopwords trimmed from both ends.
fn capitalized_phrases(text: &str) -> Vec<String> {
    let mut phrases = Vec::new();
    let mut run: Vec<String> = Vec::new();
    let flush = |run: &mut Vec<String>, phrases: &mut Vec<String>| {
        let start = run.iter().position(|t| !is_stopword(t)).unwrap_or(run.len());
        let end = run.iter().rposition(|t| !is_stopword(t)).map_or(start, |e| e + 1);
        if end >= start + 2 {
            phrases.push(run[start..end].join(" "));
        }
        run.clear();
    };
    for word in text.split_whitespace() {
        if !is_capitalized(word) {
            flush(&mut run, &mut phrases);
            continue;
        }
        if let Some(t) = normalize_token(word) {
            run.push(t);
        }
        if ends_clause(word) {
            flush(&mut run, &mut phrases);
        }
    }
    flush(&mut run, &mut phrases);
    phrases
}

/// Deterministic keywords for an answer: its non-stopword tokens in
/// first-occurrence order, then its capitalized multi-word phrases.
pub fn fallback_keywords(answer: &str) -> FallbackKeywords {
    let tokens = tokenize(answer);
    let mut seen = HashSet::new();
    let mut keywords: Vec<String> = tokens
        .iter()
        .filter(|t| !is_stopword(t) && seen.insert(t.to_string()))
        .map(str::to_string)
        .collect();
    let all_stopwords = keywords.is_empty();
    for phrase in capitalized_phrases(answer) {
        if seen.insert(phrase.clone()) {
            keywords.push(phrase);
        }
    }
    FallbackKeywords {
        keywords,
        all_stopwords,
    }
}

/// Splits a model's keyword answer into items.
///
/// Items are separated by commas, semicolons or newlines. Bullets,
/// enumerators, a leading `Keywords:` label and surrounding quotes are
/// stripped; duplicates (after normalization) are dropped.
pub fn parse_keyword_response(text: &str) -> Vec<String> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for line in text.lines() {
        let mut line = line.trim();
        if let Some(idx) = line.find(':') {
            if line[..idx].trim().eq_ignore_ascii_case("keywords") {
                line = &line[idx + 1..];
            }
        }
        for item in line.split([',', ';']) {
            let item = strip_bullet(item.trim());
            let item = item
                .trim_matches(|c: char| c == '"' || c == '\'' || c == '`' || c == '*' || c.is_whitespace())
                .trim_end_matches('.');
            if item.is_empty() {
                continue;
            }
            let key = tokenize(item).joined();
            if !key.is_empty() && seen.insert(key) {
                out.push(item.to_string());
            }
        }
    }
    out
}

fn strip_bullet(item: &str) -> &str {
    let item = item.trim_start_matches(['-', '*', '\u{2022}', '\u{2013}']).trim_start();
    let digits = item.chars().take_while(char::is_ascii_digit).count();
    if digits > 0 {
        let rest = &item[digits..];
        if let Some(r) = rest.strip_prefix('.').or_else(|| rest.strip_prefix(')')) {
            if r.starts_with(char::is_whitespace) {
                return r.trim_start();
            }
        }
    }
    item
}
