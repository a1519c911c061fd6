//! Record schemas and the loader.
//!
//! `canonical` is this crate's own JSONL schema (the field names of
//! [`QaTriple`]). `release` accepts the field spellings found in published
//! result files, either as JSONL or CSV: keys are matched after lowercasing
//! and dropping non-alphanumerics, list-valued fields may be JSON arrays,
//! Python-style list literals or newline-separated text, and a missing split
//! is taken from the file name.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde_json::{Map, Value};

use super::{derive_example_label, ExampleLabel, QaTriple, RetrievalMethod, SentenceVerdict, Split};
use crate::error::{Error, Result};
use crate::textproc::split_sentences;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemaAdapter {
    Canonical,
    Release,
}

impl FromStr for SchemaAdapter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "canonical" => Ok(SchemaAdapter::Canonical),
            "release" | "delucionqa" => Ok(SchemaAdapter::Release),
            other => Err(Error::UnknownAdapter(other.to_string())),
        }
    }
}

const ID_KEYS: &[&str] = &["id", "exampleid", "tripleid", "sampleid", "uid", "qid"];
const QUESTION_KEYS: &[&str] = &["question", "query", "questiontext"];
const CONTEXT_KEYS: &[&str] = &[
    "contextraw",
    "context",
    "retrievalresult",
    "retrievedcontext",
    "contexttext",
    "passage",
];
const CONTEXT_SENT_KEYS: &[&str] = &["contextsentences", "contextsents"];
const ANSWER_KEYS: &[&str] = &["answerraw", "answer", "generatedanswer", "response"];
const ANSWER_SENT_KEYS: &[&str] = &["answersentences", "answersents", "sentences"];
const METHOD_KEYS: &[&str] = &[
    "retrievalmethod",
    "contexttype",
    "retrievalsetting",
    "retriever",
    "searchmethod",
    "method",
];
const SPLIT_KEYS: &[&str] = &["split", "subset", "partition"];
const SENT_LABEL_KEYS: &[&str] = &[
    "goldsentencelabels",
    "sentencelabels",
    "sentencelevellabels",
    "answersentencelabels",
    "labels",
];
const EXAMPLE_LABEL_KEYS: &[&str] = &[
    "goldexamplelabel",
    "label",
    "examplelabel",
    "finallabel",
    "hallucination",
    "hallucinated",
];
const ANSWERABLE_KEYS: &[&str] = &["answerable", "isanswerable"];
const DNA_KEYS: &[&str] = &["doesnotanswer", "doesntanswer", "refusal", "idk"];

/// Loads every record from `path` through `adapter`.
///
/// `path` may be a single file or a directory; directories are read in
/// file-name order, taking `*.jsonl`, `*.json` and `*.csv` files.
pub fn load_dataset(path: &Path, adapter: SchemaAdapter) -> Result<Vec<QaTriple>> {
    let meta = fs::metadata(path).map_err(|e| Error::io(path, e))?;
    if !meta.is_dir() {
        return load_file(path, adapter);
    }
    let mut files: Vec<PathBuf> = fs::read_dir(path)
        .map_err(|e| Error::io(path, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| matches!(p.extension().and_then(|e| e.to_str()), Some("jsonl" | "json" | "csv")))
        .collect();
    files.sort();
    let mut out = Vec::new();
    for f in files {
        out.extend(load_file(&f, adapter)?);
    }
    Ok(out)
}

fn load_file(path: &Path, adapter: SchemaAdapter) -> Result<Vec<QaTriple>> {
    let is_csv = path.extension().and_then(|e| e.to_str()) == Some("csv");
    let split_hint = split_from_name(path);
    let records = if is_csv {
        read_csv_records(path)?
    } else {
        read_jsonl_records(path)?
    };
    records
        .into_iter()
        .map(|(line, value)| {
            let bad = |message: String| Error::MalformedRecord {
                path: path.to_path_buf(),
                line,
                message,
            };
            let triple = match adapter {
                SchemaAdapter::Canonical => {
                    serde_json::from_value::<QaTriple>(value).map_err(|e| bad(e.to_string()))?
                }
                SchemaAdapter::Release => {
                    let obj = value.as_object().ok_or_else(|| bad("record is not an object".into()))?;
                    from_release(obj, split_hint, path, line).map_err(|e| match e {
                        Error::MalformedRecord { .. }
                        | Error::UnknownRetrievalMethod(_)
                        | Error::LabelLengthMismatch { .. } => e,
                        other => bad(other.to_string()),
                    })?
                }
            };
            triple.validate()?;
            Ok(triple)
        })
        .collect()
}

fn read_jsonl_records(path: &Path) -> Result<Vec<(usize, Value)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(line).map_err(|e| Error::MalformedRecord {
            path: path.to_path_buf(),
            line: idx + 1,
            message: e.to_string(),
        })?;
        out.push((idx + 1, value));
    }
    Ok(out)
}

fn read_csv_records(path: &Path) -> Result<Vec<(usize, Value)>> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(false)
        .from_path(path)
        .map_err(|e| Error::MalformedRecord {
            path: path.to_path_buf(),
            line: 1,
            message: e.to_string(),
        })?;
    let headers = reader
        .headers()
        .map_err(|e| Error::MalformedRecord {
            path: path.to_path_buf(),
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let mut out = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| Error::MalformedRecord {
            path: path.to_path_buf(),
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        let obj: Map<String, Value> = headers
            .iter()
            .zip(row.iter())
            .map(|(h, v)| (h.to_string(), Value::String(v.to_string())))
            .collect();
        out.push((line, Value::Object(obj)));
    }
    Ok(out)
}

fn split_from_name(path: &Path) -> Option<Split> {
    let stem = path.file_stem()?.to_str()?.to_ascii_lowercase();
    ["train", "dev", "val", "test"]
        .iter()
        .find(|k| stem.contains(*k))
        .and_then(|k| k.parse().ok())
}

fn norm_key(k: &str) -> String {
    k.chars()
        .filter(|c| c.is_alphanumeric())
        .collect::<String>()
        .to_lowercase()
}

struct Fields<'a> {
    map: Vec<(String, &'a Value)>,
}

impl<'a> Fields<'a> {
    fn new(obj: &'a Map<String, Value>) -> Self {
        Fields {
            map: obj.iter().map(|(k, v)| (norm_key(k), v)).collect(),
        }
    }

    /// First present, non-null, non-empty-string value among `keys`.
    fn get(&self, keys: &[&str]) -> Option<&'a Value> {
        keys.iter()
            .find_map(|k| self.map.iter().find(|(nk, v)| nk == k && !is_blank(v)).map(|(_, v)| *v))
    }

    fn text(&self, keys: &[&str]) -> Option<String> {
        self.get(keys).map(|v| match v {
            Value::String(s) => s.clone(),
            other => other.to_string(),
        })
    }
}

fn is_blank(v: &Value) -> bool {
    match v {
        Value::Null => true,
        Value::String(s) => s.trim().is_empty(),
        _ => false,
    }
}

fn from_release(obj: &Map<String, Value>, split_hint: Option<Split>, path: &Path, line: usize) -> Result<QaTriple> {
    let bad = |message: String| Error::MalformedRecord {
        path: path.to_path_buf(),
        line,
        message,
    };
    let f = Fields::new(obj);

    let id = f.text(ID_KEYS).unwrap_or_else(|| {
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("record");
        format!("{stem}-{line}")
    });
    let question = f.text(QUESTION_KEYS).ok_or_else(|| bad("missing question".into()))?;
    let context_raw = f.text(CONTEXT_KEYS).ok_or_else(|| bad("missing context".into()))?;
    let answer_raw = f.text(ANSWER_KEYS).ok_or_else(|| bad("missing answer".into()))?;

    let context_sentences = match f.get(CONTEXT_SENT_KEYS) {
        Some(v) => string_list(v).map_err(bad)?,
        None => split_sentences(&context_raw),
    };
    let answer_sentences = match f.get(ANSWER_SENT_KEYS) {
        Some(v) => string_list(v).map_err(bad)?,
        None => split_sentences(&answer_raw),
    };

    let method_raw = f
        .text(METHOD_KEYS)
        .ok_or_else(|| bad("missing retrieval method".into()))?;
    let retrieval_method: RetrievalMethod = method_raw.parse()?;

    let split = match f.text(SPLIT_KEYS) {
        Some(s) => s.parse().map_err(bad)?,
        None => split_hint.ok_or_else(|| bad("missing split and none in file name".into()))?,
    };

    let gold_sentence_labels = f
        .get(SENT_LABEL_KEYS)
        .map(|v| {
            string_list(v)?
                .iter()
                .map(|s| s.parse::<SentenceVerdict>())
                .collect::<std::result::Result<Vec<_>, _>>()
        })
        .transpose()
        .map_err(bad)?;

    let answerable = f.get(ANSWERABLE_KEYS).map(parse_bool).transpose().map_err(bad)?;
    let does_not_answer = f.get(DNA_KEYS).map(parse_bool).transpose().map_err(bad)?;

    let mut gold_example_label = f
        .get(EXAMPLE_LABEL_KEYS)
        .map(|v| match v {
            Value::Bool(b) => Ok(if *b {
                ExampleLabel::Hallucinated
            } else {
                ExampleLabel::NotHallucinated
            }),
            Value::String(s) => s.parse::<ExampleLabel>(),
            other => other.to_string().parse::<ExampleLabel>(),
        })
        .transpose()
        .map_err(bad)?;
    if gold_example_label.is_none() {
        if let Some(labels) = gold_sentence_labels.as_deref().filter(|l| !l.is_empty()) {
            gold_example_label = Some(derive_example_label(labels, answerable, does_not_answer)?);
        }
    }

    Ok(QaTriple {
        id,
        question,
        context_raw,
        context_sentences,
        answer_raw,
        answer_sentences,
        retrieval_method,
        split,
        gold_sentence_labels,
        gold_example_label,
        answerable,
        does_not_answer,
    })
}

fn parse_bool(v: &Value) -> std::result::Result<bool, String> {
    match v {
        Value::Bool(b) => Ok(*b),
        Value::Number(n) => Ok(n.as_f64() != Some(0.0)),
        Value::String(s) => match s.trim().to_ascii_lowercase().as_str() {
            "true" | "yes" | "1" | "y" | "t" => Ok(true),
            "false" | "no" | "0" | "n" | "f" => Ok(false),
            other => Err(format!("not a boolean: `{other}`")),
        },
        other => Err(format!("not a boolean: {other}")),
    }
}

/// A list of strings from a JSON array, a JSON or Python list literal held
/// in a string, or newline-separated text.
fn string_list(v: &Value) -> std::result::Result<Vec<String>, String> {
    match v {
        Value::Array(items) => items
            .iter()
            .map(|i| match i {
                Value::String(s) => Ok(s.clone()),
                other => Err(format!("list item is not a string: {other}")),
            })
            .collect(),
        Value::String(s) => {
            let t = s.trim();
            if t.starts_with('[') && t.ends_with(']') {
                if let Ok(Value::Array(items)) = serde_json::from_str::<Value>(t) {
                    return string_list(&Value::Array(items));
                }
                parse_python_list(t)
            } else {
                Ok(t.lines()
                    .map(str::trim)
                    .filter(|l| !l.is_empty())
                    .map(String::from)
                    .collect())
            }
        }
        other => Err(format!("expected a list, got {other}")),
    }
}

/// Parses `['a', "b's", 'c\'d']`.
fn parse_python_list(s: &str) -> std::result::Result<Vec<String>, String> {
    let inner = &s[1..s.len() - 1];
    let mut out = Vec::new();
    let mut chars = inner.chars().peekable();
    loop {
        while matches!(chars.peek(), Some(c) if c.is_whitespace() || *c == ',') {
            chars.next();
        }
        let Some(quote) = chars.next() else {
            return Ok(out);
        };
        if quote != '\'' && quote != '"' {
            return Err(format!("unquoted list item in `{s}`"));
        }
        let mut item = String::new();
        loop {
            match chars.next() {
                Some('\\') => match chars.next() {
                    Some('n') => item.push('\n'),
                    Some('t') => item.push('\t'),
                    Some(c) => item.push(c),
                    None => return Err("dangling escape".into()),
                },
                Some(c) if c == quote => break,
                Some(c) => item.push(c),
                None => return Err(format!("unterminated string in `{s}`")),
            }
        }
        out.push(item);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
        let p = dir.join(name);
        let mut f = fs::File::create(&p).unwrap();
        f.write_all(body.as_bytes()).unwrap();
        p
    }

    #[test]
    fn empty_file_is_empty_dataset() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "empty.jsonl", "");
        assert!(load_dataset(&p, SchemaAdapter::Canonical).unwrap().is_empty());
        assert!(load_dataset(&p, SchemaAdapter::Release).unwrap().is_empty());
    }

    #[test]
    fn canonical_record_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let rec = r#"{"id":"t1","question":"Q?","context_raw":"A. B.","context_sentences":["A.","B."],"answer_raw":"A.","answer_sentences":["A."],"retrieval_method":"Sparse","split":"Dev","gold_sentence_labels":["Supported"],"gold_example_label":"NotHallucinated"}"#;
        let p = write(dir.path(), "d.jsonl", &format!("{rec}\n"));
        let ds = load_dataset(&p, SchemaAdapter::Canonical).unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(ds[0].split, Split::Dev);
        assert_eq!(ds[0].gold_example_label, Some(ExampleLabel::NotHallucinated));
    }

    #[test]
    fn label_length_mismatch_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let rec = r#"{"question":"Q?","context":"Ctx.","answer":"One. Two. Three. Four.","method":"sparse","split":"test","sentence_labels":["supported","supported","neither"]}"#;
        let p = write(dir.path(), "d.jsonl", rec);
        match load_dataset(&p, SchemaAdapter::Release) {
            Err(Error::LabelLengthMismatch {
                labels: 3,
                sentences: 4,
                ..
            }) => {}
            other => panic!("expected mismatch, got {other:?}"),
        }
    }

    #[test]
    fn malformed_line_reports_its_number() {
        let dir = tempfile::tempdir().unwrap();
        let good = r#"{"question":"Q?","context":"C.","answer":"A.","method":"sparse","split":"dev"}"#;
        let p = write(dir.path(), "d.jsonl", &format!("{good}\n\n{{not json\n"));
        match load_dataset(&p, SchemaAdapter::Release) {
            Err(Error::MalformedRecord { line: 3, .. }) => {}
            other => panic!("expected line 3, got {other:?}"),
        }
    }

    #[test]
    fn unknown_method_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let rec = r#"{"question":"Q?","context":"C.","answer":"A.","method":"oracle","split":"dev"}"#;
        let p = write(dir.path(), "d.jsonl", rec);
        assert!(matches!(
            load_dataset(&p, SchemaAdapter::Release),
            Err(Error::UnknownRetrievalMethod(_))
        ));
    }

    #[test]
    fn release_csv_with_python_lists_and_split_from_name() {
        let dir = tempfile::tempdir().unwrap();
        let body = "Question,Context,Answer,Answer_sentences,Sentence_labels,Context Type,Answerable,Does_not_answer\n\
             Q1?,\"Ctx one. Ctx two.\",\"It's fine. Really.\",\"['It\\'s fine.', \"\"Really.\"\"]\",\"['supported', 'neither']\",Lucene,True,False\n";
        let p = write(dir.path(), "test.csv", body);
        let ds = load_dataset(&p, SchemaAdapter::Release).unwrap();
        assert_eq!(ds.len(), 1);
        let t = &ds[0];
        assert_eq!(t.split, Split::Test);
        assert_eq!(t.retrieval_method, RetrievalMethod::Sparse);
        assert_eq!(t.answer_sentences, vec!["It's fine.", "Really."]);
        assert_eq!(t.context_sentences, vec!["Ctx one.", "Ctx two."]);
        // Derived from the sentence labels.
        assert_eq!(t.gold_example_label, Some(ExampleLabel::Hallucinated));
        assert_eq!(t.answerable, Some(true));
    }

    #[test]
    fn directory_loads_all_files_in_name_order() {
        let dir = tempfile::tempdir().unwrap();
        let rec = |q: &str| {
            format!(
                r#"{{"question":"{q}","context":"C.","answer":"A.","method":"top-1 ensemble","label":"Not Hallucinated"}}"#
            )
        };
        write(dir.path(), "train.jsonl", &rec("a?"));
        write(dir.path(), "dev.jsonl", &rec("b?"));
        write(dir.path(), "notes.txt", "ignored");
        let ds = load_dataset(dir.path(), SchemaAdapter::Release).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds[0].split, Split::Dev);
        assert_eq!(ds[1].split, Split::Train);
    }

    #[test]
    fn adapter_ids() {
        assert_eq!("canonical".parse::<SchemaAdapter>().unwrap(), SchemaAdapter::Canonical);
        assert_eq!("release".parse::<SchemaAdapter>().unwrap(), SchemaAdapter::Release);
        assert!("xml".parse::<SchemaAdapter>().is_err());
    }
}
