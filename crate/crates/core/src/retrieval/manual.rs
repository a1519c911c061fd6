//! Manual ingestion into Document -> Section -> Paragraph trees.
//!
//! Accepted sources:
//! - HTML: `<h1>` opens a document, `<h2>`..`<h6>` open sections (deeper
//!   headings are flattened into sections titled `outer / inner`), `<p>` and
//!   `<li>` are paragraphs.
//! - Markdown: `#` opens a document, `##` and deeper open sections,
//!   blank-line separated blocks are paragraphs.
//! - JSON: either serialized [`DocNode`]s, or a pre-chunked list of
//!   `{"title", "sections": [{"title", "paragraphs": [..]}]}`.

use std::path::Path;

use serde::Deserialize;

use super::{joined_text, DocNode, Level};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ManualFormat {
    Html,
    Markdown,
    Json,
}

impl ManualFormat {
    pub fn from_path(path: &Path) -> Self {
        match path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase)
            .as_deref()
        {
            Some("html" | "htm" | "xhtml") => ManualFormat::Html,
            Some("json") => ManualFormat::Json,
            _ => ManualFormat::Markdown,
        }
    }
}

/// Reads and parses the manual at `source`.
pub fn ingest_manual(source: &Path) -> Result<Vec<DocNode>> {
    let text = std::fs::read_to_string(source).map_err(|e| Error::io(source, e))?;
    let stem = source.file_stem().and_then(|s| s.to_str()).unwrap_or("manual");
    parse_manual(&text, ManualFormat::from_path(source), stem)
}

/// Parses manual text. `default_title` names a document whose content
/// starts before any top-level heading.
pub fn parse_manual(text: &str, format: ManualFormat, default_title: &str) -> Result<Vec<DocNode>> {
    if text.trim().is_empty() {
        return Err(Error::Manual("empty document".into()));
    }
    let mut builder = Builder::new(default_title);
    match format {
        ManualFormat::Html => parse_html(text, &mut builder)?,
        ManualFormat::Markdown => parse_markdown(text, &mut builder),
        ManualFormat::Json => return parse_json(text),
    }
    builder.finish()
}

#[derive(Default)]
struct SectionDraft {
    title: Option<String>,
    paragraphs: Vec<String>,
}

struct DocDraft {
    title: Option<String>,
    sections: Vec<SectionDraft>,
}

struct Builder {
    default_title: String,
    docs: Vec<DocDraft>,
    /// Heading trail below the document level, for flattened titles.
    trail: Vec<(usize, String)>,
}

impl Builder {
    fn new(default_title: &str) -> Self {
        Builder {
            default_title: default_title.to_string(),
            docs: Vec::new(),
            trail: Vec::new(),
        }
    }

    fn open_document(&mut self, title: String) {
        self.trail.clear();
        self.docs.push(DocDraft {
            title: Some(title),
            sections: Vec::new(),
        });
    }

    fn open_section(&mut self, depth: usize, title: String) {
        self.trail.retain(|(d, _)| *d < depth);
        self.trail.push((depth, title));
        let full = self
            .trail
            .iter()
            .map(|(_, t)| t.as_str())
            .collect::<Vec<_>>()
            .join(" / ");
        self.current_doc().sections.push(SectionDraft {
            title: Some(full),
            paragraphs: Vec::new(),
        });
    }

    fn current_doc(&mut self) -> &mut DocDraft {
        if self.docs.is_empty() {
            self.docs.push(DocDraft {
                title: Some(self.default_title.clone()),
                sections: Vec::new(),
            });
        }
        self.docs.last_mut().expect("just pushed")
    }

    fn paragraph(&mut self, text: String) {
        let text = text.split_whitespace().collect::<Vec<_>>().join(" ");
        if text.is_empty() {
            return;
        }
        let doc = self.current_doc();
        if doc.sections.is_empty() {
            doc.sections.push(SectionDraft::default());
        }
        doc.sections.last_mut().expect("just pushed").paragraphs.push(text);
    }

    fn finish(self) -> Result<Vec<DocNode>> {
        let drafts = self
            .docs
            .into_iter()
            .map(|d| {
                let sections = d
                    .sections
                    .into_iter()
                    .filter(|s| !s.paragraphs.is_empty())
                    .map(|s| (s.title, s.paragraphs))
                    .collect::<Vec<_>>();
                (d.title, sections)
            })
            .filter(|(_, s)| !s.is_empty())
            .collect::<Vec<_>>();
        if drafts.is_empty() {
            return Err(Error::Manual("no paragraphs found".into()));
        }
        Ok(assemble(drafts))
    }
}

type Draft = (Option<String>, Vec<(Option<String>, Vec<String>)>);

/// Builds trees with ids `d{i}`, `d{i}.s{j}`, `d{i}.s{j}.p{k}`.
fn assemble(drafts: Vec<Draft>) -> Vec<DocNode> {
    drafts
        .into_iter()
        .enumerate()
        .map(|(di, (title, sections))| {
            let doc_id = format!("d{di}");
            let children: Vec<DocNode> = sections
                .into_iter()
                .enumerate()
                .map(|(si, (stitle, paras))| {
                    let sec_id = format!("{doc_id}.s{si}");
                    let paras: Vec<DocNode> = paras
                        .into_iter()
                        .enumerate()
                        .map(|(pi, text)| DocNode {
                            id: format!("{sec_id}.p{pi}"),
                            level: Level::Paragraph,
                            title: None,
                            text,
                            children: Vec::new(),
                        })
                        .collect();
                    DocNode {
                        id: sec_id,
                        level: Level::Section,
                        title: stitle,
                        text: joined_text(&paras),
                        children: paras,
                    }
                })
                .collect();
            DocNode {
                id: doc_id,
                level: Level::Document,
                title,
                text: joined_text(&children),
                children,
            }
        })
        .collect()
}

fn decode_entities(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut rest = s;
    while let Some(pos) = rest.find('&') {
        out.push_str(&rest[..pos]);
        let tail = &rest[pos..];
        let Some(end) = tail.find(';').filter(|e| *e <= 10) else {
            out.push('&');
            rest = &tail[1..];
            continue;
        };
        let entity = &tail[1..end];
        let decoded = match entity {
            "amp" => Some('&'),
            "lt" => Some('<'),
            "gt" => Some('>'),
            "quot" => Some('"'),
            "apos" => Some('\''),
            "nbsp" => Some(' '),
            e if e.starts_with("#x") || e.starts_with("#X") => {
                u32::from_str_radix(&e[2..], 16).ok().and_then(char::from_u32)
            }
            e if e.starts_with('#') => e[1..].parse().ok().and_then(char::from_u32),
            _ => None,
        };
        match decoded {
            Some(c) => {
                out.push(c);
                rest = &tail[end + 1..];
            }
            None => {
                out.push('&');
                rest = &tail[1..];
            }
        }
    }
    out.push_str(rest);
    out
}

#[derive(Clone, Copy, PartialEq)]
enum Block {
    Heading(usize),
    Para,
}

fn parse_html(text: &str, b: &mut Builder) -> Result<()> {
    let mut block: Option<Block> = None;
    let mut buf = String::new();
    let mut skip_depth = 0usize;
    let mut rest = text;

    let close = |block: &mut Option<Block>, buf: &mut String, b: &mut Builder| {
        let content = decode_entities(buf).split_whitespace().collect::<Vec<_>>().join(" ");
        match block.take() {
            Some(Block::Heading(1)) if !content.is_empty() => b.open_document(content),
            Some(Block::Heading(d)) if !content.is_empty() => b.open_section(d, content),
            Some(Block::Para) => b.paragraph(content),
            _ => {}
        }
        buf.clear();
    };

    while let Some(lt) = rest.find('<') {
        if skip_depth == 0 && block.is_some() {
            buf.push_str(&rest[..lt]);
        }
        let after = &rest[lt..];
        if after.starts_with("<!--") {
            let end = after.find("-->").map_or(after.len(), |e| e + 3);
            rest = &after[end..];
            continue;
        }
        let Some(gt) = after.find('>') else {
            return Err(Error::Manual("unterminated tag".into()));
        };
        let tag = &after[1..gt];
        rest = &after[gt + 1..];

        let closing = tag.starts_with('/');
        let name: String = tag
            .trim_start_matches('/')
            .chars()
            .take_while(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();

        match name.as_str() {
            "script" | "style" | "head" => {
                if closing {
                    skip_depth = skip_depth.saturating_sub(1);
                } else if !tag.ends_with('/') {
                    skip_depth += 1;
                }
            }
            "h1" | "h2" | "h3" | "h4" | "h5" | "h6" if skip_depth == 0 => {
                close(&mut block, &mut buf, b);
                if !closing {
                    let depth = name[1..].parse().expect("heading digit");
                    block = Some(Block::Heading(depth));
                }
            }
            "p" | "li" | "dd" | "td" | "pre" | "blockquote" if skip_depth == 0 => {
                close(&mut block, &mut buf, b);
                if !closing {
                    block = Some(Block::Para);
                }
            }
            "br" if block.is_some() => buf.push(' '),
            _ => {
                // Inline tags separate words only when they are block-ish.
                if matches!(name.as_str(), "div" | "section" | "ul" | "ol" | "table" | "tr") {
                    close(&mut block, &mut buf, b);
                }
            }
        }
    }
    if skip_depth == 0 && block.is_some() {
        buf.push_str(rest);
    }
    close(&mut block, &mut buf, b);
    Ok(())
}

fn parse_markdown(text: &str, b: &mut Builder) {
    let mut para = String::new();
    let flush = |para: &mut String, b: &mut Builder| {
        if !para.trim().is_empty() {
            b.paragraph(std::mem::take(para));
        }
        para.clear();
    };
    for line in text.lines() {
        let trimmed = line.trim();
        let hashes = trimmed.chars().take_while(|c| *c == '#').count();
        if hashes > 0 && trimmed[hashes..].starts_with(' ') {
            flush(&mut para, b);
            let title = trimmed[hashes..].trim().to_string();
            if hashes == 1 {
                b.open_document(title);
            } else {
                b.open_section(hashes, title);
            }
        } else if trimmed.is_empty() {
            flush(&mut para, b);
        } else {
            if !para.is_empty() {
                para.push(' ');
            }
            para.push_str(trimmed);
        }
    }
    flush(&mut para, b);
}

#[derive(Deserialize)]
#[serde(untagged)]
enum JsonManual {
    Trees(Vec<DocNode>),
    Tree(DocNode),
    Chunked(Vec<ChunkedDoc>),
}

#[derive(Deserialize)]
struct ChunkedDoc {
    #[serde(default)]
    title: Option<String>,
    sections: Vec<ChunkedSection>,
}

#[derive(Deserialize)]
struct ChunkedSection {
    #[serde(default)]
    title: Option<String>,
    paragraphs: Vec<String>,
}

fn parse_json(text: &str) -> Result<Vec<DocNode>> {
    let parsed: JsonManual = serde_json::from_str(text).map_err(|e| Error::Manual(format!("json: {e}")))?;
    let trees = match parsed {
        JsonManual::Tree(t) => vec![t],
        JsonManual::Trees(ts) => ts,
        JsonManual::Chunked(docs) => {
            let drafts: Vec<Draft> = docs
                .into_iter()
                .map(|d| {
                    let secs = d
                        .sections
                        .into_iter()
                        .map(|s| {
                            let paras = s
                                .paragraphs
                                .into_iter()
                                .map(|p| p.split_whitespace().collect::<Vec<_>>().join(" "))
                                .filter(|p| !p.is_empty())
                                .collect::<Vec<_>>();
                            (s.title, paras)
                        })
                        .filter(|(_, p)| !p.is_empty())
                        .collect::<Vec<_>>();
                    (d.title, secs)
                })
                .filter(|(_, s)| !s.is_empty())
                .collect();
            assemble(drafts)
        }
    };
    if trees.is_empty() {
        return Err(Error::Manual("no documents".into()));
    }
    if let Some(bad) = trees.iter().find(|t| t.level != Level::Document || !t.is_well_formed()) {
        return Err(Error::Manual(format!("tree `{}` is not well formed", bad.id)));
    }
    Ok(trees)
}
