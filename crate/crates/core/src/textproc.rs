//! Sentence segmentation and token normalization.
//!
//! Every component that counts or compares tokens (overlap ratio, keyword
//! containment, BM25 indexing, context-length statistics) goes through
//! [`tokenize`], so "token" has a single meaning across the crate.

use serde::{Deserialize, Serialize};

/// Words ending in `.` that do not terminate a sentence.
const ABBREVIATIONS: &[&str] = &[
    "e.g", "i.e", "eg", "ie", "mr", "mrs", "ms", "dr", "prof", "sr", "jr", "st", "vs", "approx", "fig", "figs", "no",
    "nos", "vol", "cf", "al", "inc", "ltd", "co", "corp", "dept", "est", "incl", "ref", "sec", "u.s", "a.m", "p.m",
];

/// Normalized tokens of one piece of text.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TokenSequence {
    tokens: Vec<String>,
    /// Character offsets `(start, end)` of each token in the source text,
    /// when the sequence was produced by [`tokenize`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    spans: Option<Vec<(usize, usize)>>,
}

impl TokenSequence {
    /// Builds a sequence from tokens that are already normalized. Tokens that
    /// normalize to nothing are dropped.
    pub fn from_tokens<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let tokens = tokens.into_iter().filter_map(|t| normalize_token(t.as_ref())).collect();
        TokenSequence { tokens, spans: None }
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn spans(&self) -> Option<&[(usize, usize)]> {
        self.spans.as_deref()
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(String::as_str)
    }

    /// Tokens joined by single spaces.
    pub fn joined(&self) -> String {
        self.tokens.join(" ")
    }

    /// True when `needle` occurs as a contiguous run inside `self`.
    /// An empty needle is never contained.
    pub fn contains_run(&self, needle: &TokenSequence) -> bool {
        let n = needle.len();
        n > 0 && n <= self.len() && self.tokens.windows(n).any(|w| w == needle.tokens())
    }
}

impl<'a> IntoIterator for &'a TokenSequence {
    type Item = &'a String;
    type IntoIter = std::slice::Iter<'a, String>;

    fn into_iter(self) -> Self::IntoIter {
        self.tokens.iter()
    }
}

fn is_edge_punct(c: char) -> bool {
    !c.is_alphanumeric()
}

/// Lowercases a raw token and strips non-alphanumeric characters from both
/// ends. Returns `None` when nothing is left.
pub fn normalize_token(raw: &str) -> Option<String> {
    let trimmed = raw.trim_matches(is_edge_punct);
    if trimmed.is_empty() {
        return None;
    }
    let lowered = trimmed.to_lowercase();
    // Lowercasing can expose edge punctuation for a handful of exotic
    // characters; strip again so normalization stays idempotent.
    let lowered = lowered.trim_matches(is_edge_punct);
    (!lowered.is_empty()).then(|| lowered.to_string())
}

/// Splits on whitespace, strips edge punctuation and lowercases.
/// Hyphenated words and numbers such as `5.5` stay whole.
pub fn tokenize(text: &str) -> TokenSequence {
    let mut tokens = Vec::new();
    let mut spans = Vec::new();
    let mut start: Option<usize> = None;
    let mut chunk = String::new();

    let mut flush = |start: usize, end: usize, chunk: &mut String| {
        if let Some(tok) = normalize_token(chunk) {
            // Offsets of the surviving core, not the raw chunk.
            let lead = chunk.chars().take_while(|c| is_edge_punct(*c)).count();
            let trail = chunk.chars().rev().take_while(|c| is_edge_punct(*c)).count();
            tokens.push(tok);
            spans.push((start + lead, end - trail));
        }
        chunk.clear();
    };

    let mut count = 0;
    for (idx, c) in text.chars().enumerate() {
        count = idx + 1;
        if c.is_whitespace() {
            if let Some(s) = start.take() {
                flush(s, idx, &mut chunk);
            }
        } else {
            start.get_or_insert(idx);
            chunk.push(c);
        }
    }
    if let Some(s) = start {
        flush(s, count, &mut chunk);
    }

    TokenSequence {
        tokens,
        spans: Some(spans),
    }
}

fn is_closer(c: char) -> bool {
    matches!(c, '"' | '\'' | ')' | ']' | '}' | '\u{201d}' | '\u{2019}')
}

fn is_opener(c: char) -> bool {
    matches!(c, '"' | '\'' | '(' | '[' | '\u{201c}' | '\u{2018}')
}

fn is_abbreviation(word: &str) -> bool {
    let w = word
        .trim_start_matches(|c: char| !c.is_alphanumeric())
        .trim_end_matches('.')
        .to_lowercase();
    ABBREVIATIONS.contains(&w.as_str())
}

/// Rule-based sentence segmentation.
///
/// Newlines always end a sentence. Otherwise a sentence ends after `.`, `!`
/// or `?` (plus any closing quotes or brackets) when the next non-space
/// character is an uppercase letter or a digit, unless the terminated word
/// is a known abbreviation.
pub fn split_sentences(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for line in text.split('\n') {
        split_line(line, &mut out);
    }
    out
}

fn split_line(line: &str, out: &mut Vec<String>) {
    let chars: Vec<(usize, char)> = line.char_indices().collect();
    let mut sent_start = 0usize;
    let mut i = 0usize;

    while i < chars.len() {
        let (_, c) = chars[i];
        if !matches!(c, '.' | '!' | '?') {
            i += 1;
            continue;
        }
        let punct_pos = i;
        let mut end = i + 1;
        while end < chars.len() && (matches!(chars[end].1, '.' | '!' | '?') || is_closer(chars[end].1)) {
            end += 1;
        }
        // Needs whitespace, then an uppercase letter or digit.
        let mut next = end;
        while next < chars.len() && chars[next].1.is_whitespace() {
            next += 1;
        }
        let has_gap = next > end;
        let mut probe = next;
        while probe < chars.len() && is_opener(chars[probe].1) {
            probe += 1;
        }
        let starts_new = probe < chars.len() && (chars[probe].1.is_uppercase() || chars[probe].1.is_ascii_digit());

        let guarded = c == '.' && {
            let word_start = chars[..punct_pos]
                .iter()
                .rposition(|(_, ch)| ch.is_whitespace())
                .map_or(0, |p| p + 1);
            let word: String = chars[word_start..=punct_pos].iter().map(|(_, ch)| ch).collect();
            is_abbreviation(&word)
        };

        if has_gap && starts_new && !guarded {
            let byte_end = chars.get(end).map_or(line.len(), |(b, _)| *b);
            push_trimmed(&line[sent_start..byte_end], out);
            sent_start = chars.get(next).map_or(line.len(), |(b, _)| *b);
            i = next;
        } else {
            i = end;
        }
    }
    push_trimmed(&line[sent_start..], out);
}

fn push_trimmed(s: &str, out: &mut Vec<String>) {
    let t = s.trim();
    if !t.is_empty() {
        out.push(t.to_string());
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        tokenize(s).tokens().to_vec()
    }

    #[test]
    fn two_terminated_sentences() {
        assert_eq!(
            split_sentences("Press the button. Wait 5 s."),
            vec!["Press the button.", "Wait 5 s."]
        );
    }

    #[test]
    fn empty_text_has_no_sentences() {
        assert!(split_sentences("").is_empty());
        assert!(split_sentences("  \n\n ").is_empty());
    }

    // Hand-segmented before the segmenter existed.
    #[test]
    fn hand_segmented_fixtures() {
        let cases: &[(&str, &[&str])] = &[
            ("e.g. the fob works. Done.", &["e.g. the fob works.", "Done."]),
            (
                "Use the key fob, e.g. Press unlock. Then open the door.",
                &["Use the key fob, e.g. Press unlock.", "Then open the door."],
            ),
            ("Is it on? Yes! It is.", &["Is it on?", "Yes!", "It is."]),
            (
                "Set it to 5.5 psi. 2 lights will flash.",
                &["Set it to 5.5 psi.", "2 lights will flash."],
            ),
            (
                "Say \"Hey Uconnect.\" The system responds.",
                &["Say \"Hey Uconnect.\"", "The system responds."],
            ),
            ("First line\nSecond line", &["First line", "Second line"]),
            ("It works. then it stops.", &["It works. then it stops."]),
            ("Contact Dr. Smith today.", &["Contact Dr. Smith today."]),
            (
                "Tow up to 7,700 lb (3 493 kg). Check the hitch.",
                &["Tow up to 7,700 lb (3 493 kg).", "Check the hitch."],
            ),
            ("Wait... What happened?", &["Wait...", "What happened?"]),
        ];
        for (input, expected) in cases {
            assert_eq!(&split_sentences(input), expected, "input: {input:?}");
        }
    }

    #[test]
    fn tokenize_strips_edges_and_lowercases() {
        assert_eq!(toks("Hey, Uconnect!"), ["hey", "uconnect"]);
        assert_eq!(toks("66 ft (20 m)"), ["66", "ft", "20", "m"]);
        assert_eq!(toks("four-wheel drive 5.5"), ["four-wheel", "drive", "5.5"]);
        assert!(toks(" -- ... ").is_empty());
    }

    #[test]
    fn spans_point_at_token_cores() {
        let seq = tokenize("Hey, (Uconnect)!");
        assert_eq!(seq.spans().unwrap(), &[(0, 3), (6, 14)]);
    }

    #[test]
    fn contains_run_is_contiguous() {
        let hay = tokenize("press the brake pedal firmly");
        assert!(hay.contains_run(&tokenize("Brake pedal")));
        assert!(!hay.contains_run(&tokenize("press pedal")));
        assert!(!hay.contains_run(&TokenSequence::default()));
    }

    proptest::proptest! {
        #[test]
        fn segmentation_never_yields_empty(s in "[A-Za-z .!?\n0-9]{0,80}") {
            for sent in split_sentences(&s) {
                proptest::prop_assert!(!sent.trim().is_empty());
            }
        }

        #[test]
        fn segmentation_preserves_content(s in "[A-Za-z .!?\n0-9]{0,80}") {
            let joined: String = split_sentences(&s).concat();
            let strip = |x: &str| x.chars().filter(|c| !c.is_whitespace()).collect::<String>();
            proptest::prop_assert_eq!(strip(&joined), strip(&s));
        }

        #[test]
        fn tokens_are_normalized(s in "\\PC{0,60}") {
            for t in tokenize(&s).tokens() {
                proptest::prop_assert!(!t.is_empty());
                proptest::prop_assert_eq!(t.to_lowercase(), t.clone());
                proptest::prop_assert_eq!(normalize_token(t), Some(t.clone()));
                proptest::prop_assert!(t.chars().next().unwrap().is_alphanumeric());
                proptest::prop_assert!(t.chars().last().unwrap().is_alphanumeric());
            }
        }

        #[test]
        fn tokenize_is_idempotent(s in "\\PC{0,60}") {
            let once = tokenize(&s);
            let twice = tokenize(&once.joined());
            proptest::prop_assert_eq!(once.tokens(), twice.tokens());
        }
    }
}
