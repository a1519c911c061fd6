use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use groundcheck::corpus::{load_dataset, DatasetStats, SchemaAdapter};
use groundcheck::detectors::{detect_batch, detect_keyword_batch, DetectionResult, DetectorMode};
use groundcheck::evaluation::{
    agreement_report, classification_report, krippendorff_alpha, render_table, tune_thresholds, AgreementReport,
    TableRow,
};
use groundcheck::llm::{build_keyword_prompt, fallback_keywords, parse_keyword_response, ChatClient, HttpChatProvider};
use groundcheck::retrieval::{
    ingest_manual, search_adaptive, search_dense, search_ensemble, search_sparse, MultiGranularityIndex, RetrievalHit,
};
use groundcheck::similarity::{Embedder, EmbeddingProvider, HashingProvider, HttpEmbeddingProvider};
use groundcheck::{EvalReport, ProviderMode, QaTriple, SentenceVerdict, Split};

use crate::config::{EmbeddingBackend, RunConfig};
use crate::manifest::ManifestBuilder;
use crate::{
    ChatArgs, Cli, Command, DatasetArgs, DetectorArgs, EmbeddingArgs, KeywordSource, SearchMethod, UsageError,
};

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

pub fn run(cli: Cli) -> Result<()> {
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    if let Some(dir) = cli.out_dir {
        cfg.output_dir = dir;
    }
    match cli.command {
        Command::Ingest { manual } => ingest(cfg, &manual),
        Command::Index { manual, embedding } => index(cfg, &manual, &embedding),
        Command::Search {
            index,
            query,
            method,
            k,
            level,
            embedding,
        } => {
            if let Some(k) = k {
                cfg.retrieval.k = k;
            }
            search(cfg, &index, &query, method, level, &embedding)
        }
        Command::Detect {
            dataset,
            detector,
            embedding,
        } => detect(cfg, &dataset, &detector, &embedding),
        Command::Tune {
            dataset,
            detector,
            embedding,
            grid,
        } => tune(cfg, &dataset, &detector, &embedding, grid),
        Command::Eval {
            detections,
            dataset,
            name,
        } => eval(cfg, &detections, &dataset, name),
        Command::Stats { dataset } => stats(cfg, &dataset),
        Command::Agreement {
            reference,
            candidate,
            annotations,
        } => agreement(cfg, reference.as_deref(), candidate.as_deref(), annotations.as_deref()),
        Command::ExtractKeywords { dataset, source, chat } => extract_keywords(cfg, &dataset, source, &chat),
        Command::Report { inputs } => report(cfg, &inputs),
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    groundcheck::write_atomic(path, &bytes).with_context(|| format!("writing {}", path.display()))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    groundcheck::write_atomic(path, text.as_bytes()).with_context(|| format!("writing {}", path.display()))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_slice(&bytes).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn require_file(path: &Path) -> Result<()> {
    if !path.exists() {
        return Err(usage(format!("{} does not exist", path.display())));
    }
    Ok(())
}

// ---------------------------------------------------------------- dataset

fn apply_dataset(cfg: &mut RunConfig, args: &DatasetArgs) {
    if let Some(p) = &args.dataset {
        cfg.dataset.path = Some(p.clone());
    }
    if let Some(a) = &args.adapter {
        cfg.dataset.adapter = a.clone();
    }
}

fn load_triples(cfg: &RunConfig, split: Option<Split>, manifest: &mut ManifestBuilder) -> Result<Vec<QaTriple>> {
    let path = cfg
        .dataset
        .path
        .as_ref()
        .ok_or_else(|| usage("no dataset given (use --dataset or [dataset] path)"))?;
    let adapter: SchemaAdapter = cfg.dataset.adapter.parse()?;
    manifest.input(path)?;
    let mut triples = load_dataset(path, adapter).with_context(|| format!("loading {}", path.display()))?;
    if let Some(s) = split {
        triples.retain(|t| t.split == s);
    }
    if triples.is_empty() {
        return Err(usage("the dataset selection is empty"));
    }
    Ok(triples)
}

// -------------------------------------------------------------- embedding

fn apply_embedding(cfg: &mut RunConfig, args: &EmbeddingArgs) {
    let e = &mut cfg.embedding;
    if let Some(b) = args.embedder {
        e.backend = b;
    }
    if let Some(m) = args.embedding_mode {
        e.mode = m;
    }
    if let Some(p) = &args.embedding_cache {
        e.cache = Some(p.clone());
    }
    if let Some(u) = &args.embedding_endpoint {
        e.endpoint = Some(u.clone());
    }
    if let Some(i) = &args.embedding_identity {
        e.identity = Some(i.clone());
    }
}

fn api_key(var: Option<&str>) -> Result<Option<String>> {
    match var {
        None => Ok(None),
        Some(v) => std::env::var(v)
            .map(Some)
            .map_err(|_| usage(format!("environment variable {v} is not set"))),
    }
}

fn build_embedder(cfg: &RunConfig, manifest: &mut ManifestBuilder) -> Result<Option<Embedder>> {
    let e = &cfg.embedding;
    let (provider, identity): (Option<Box<dyn EmbeddingProvider>>, String) = match e.backend {
        EmbeddingBackend::None => return Ok(None),
        EmbeddingBackend::Hashing => {
            let p = HashingProvider::new(e.hashing_dim);
            let id = p.identity().to_string();
            (Some(Box::new(p)), id)
        }
        EmbeddingBackend::Http => {
            let identity = e
                .identity
                .clone()
                .ok_or_else(|| usage("the http embedder needs an identity (model name)"))?;
            let provider: Option<Box<dyn EmbeddingProvider>> = match &e.endpoint {
                Some(url) => Some(Box::new(
                    HttpEmbeddingProvider::new(url.clone(), identity.clone())
                        .with_api_key(api_key(e.api_key_env.as_deref())?)
                        .with_batch_size(e.batch_size),
                )),
                None if e.mode == ProviderMode::Replay => None,
                None => return Err(usage("the http embedder needs an endpoint outside replay mode")),
            };
            (provider, identity)
        }
    };
    match &e.cache {
        Some(path) => {
            if path.exists() {
                manifest.input(path)?;
            }
            Ok(Some(Embedder::with_cache(provider, &identity, e.mode, path.clone())?))
        }
        None if e.mode == ProviderMode::Live => {
            let provider = provider.ok_or_else(|| usage("no embedding provider configured"))?;
            Ok(Some(Embedder::live(provider)))
        }
        None => Err(usage(format!("embedding mode {:?} needs a cache file", e.mode))),
    }
}

// ---------------------------------------------------------------- manuals

fn ingest(cfg: RunConfig, manual: &Path) -> Result<()> {
    cfg.validate()?;
    require_file(manual)?;
    let mut m = ManifestBuilder::start("ingest");
    m.input(manual)?;
    let trees = ingest_manual(manual)?;
    let out = cfg.output_dir.join("trees.json");
    write_json(&out, &trees)?;
    m.output(&out);
    m.write(&cfg, &cfg.output_dir)?;
    let nodes: usize = trees.iter().map(|t| t.node_count()).sum();
    println!("{} documents, {nodes} nodes -> {}", trees.len(), out.display());
    Ok(())
}

fn index(mut cfg: RunConfig, manual: &Path, embedding: &EmbeddingArgs) -> Result<()> {
    apply_embedding(&mut cfg, embedding);
    cfg.validate()?;
    require_file(manual)?;
    let mut m = ManifestBuilder::start("index");
    m.input(manual)?;
    let trees = ingest_manual(manual)?;
    let embedder = build_embedder(&cfg, &mut m)?;
    let idx = MultiGranularityIndex::build(&trees, embedder.as_ref())?;
    if let Some(e) = &embedder {
        e.save()?;
    }
    let out = cfg.output_dir.join("index.json");
    idx.save(&out)?;
    m.output(&out);
    m.write(&cfg, &cfg.output_dir)?;
    println!("{} units indexed -> {}", idx.units().len(), out.display());
    if let Some(err) = idx.dense_error() {
        eprintln!("warning: dense vectors unavailable, index is sparse-only: {err}");
    }
    Ok(())
}

#[derive(Serialize)]
struct SearchOutput<'a> {
    query: &'a str,
    method: &'a str,
    sparse_only: bool,
    hits: Vec<RetrievalHit>,
}

fn search(
    mut cfg: RunConfig,
    index_path: &Path,
    query: &str,
    method: SearchMethod,
    level: Option<groundcheck::retrieval::Level>,
    embedding: &EmbeddingArgs,
) -> Result<()> {
    apply_embedding(&mut cfg, embedding);
    cfg.validate()?;
    require_file(index_path)?;
    let mut m = ManifestBuilder::start("search");
    m.input(index_path)?;
    let idx = MultiGranularityIndex::load(index_path)?;
    let embedder = build_embedder(&cfg, &mut m)?;
    let rc = cfg.retrieval.to_config();
    let k = cfg.retrieval.k;
    let (hits, sparse_only, name) = match method {
        SearchMethod::Sparse => (search_sparse(&idx, query, k, level, rc.bm25), true, "sparse"),
        SearchMethod::Dense => {
            let e = embedder
                .as_ref()
                .ok_or_else(|| usage("dense search needs an embedder"))?;
            (search_dense(&idx, e, query, k, level)?, false, "dense")
        }
        SearchMethod::Ensemble => {
            let r = search_ensemble(&idx, embedder.as_ref(), query, k, level, &rc)?;
            (r.hits, r.sparse_only, "ensemble")
        }
        SearchMethod::Adaptive => {
            let r = search_adaptive(&idx, embedder.as_ref(), query, k, &rc)?;
            (r.hits, r.sparse_only, "adaptive")
        }
    };
    if let Some(e) = &embedder {
        e.save()?;
    }
    if sparse_only && matches!(method, SearchMethod::Ensemble | SearchMethod::Adaptive) {
        eprintln!("warning: no dense vectors available, results use sparse scores only");
    }
    for (i, h) in hits.iter().enumerate() {
        println!("{:>2}. {:.4}  {} [{}]", i + 1, h.score, h.node_id, h.level);
        for line in h.text.lines() {
            println!("      {line}");
        }
    }
    let out = cfg.output_dir.join("search.json");
    write_json(
        &out,
        &SearchOutput {
            query,
            method: name,
            sparse_only,
            hits,
        },
    )?;
    m.output(&out);
    m.write(&cfg, &cfg.output_dir)?;
    Ok(())
}

// -------------------------------------------------------------- detection

fn apply_detector(cfg: &mut RunConfig, args: &DetectorArgs) {
    let d = &mut cfg.detector;
    if let Some(mode) = args.mode {
        d.mode = mode;
    }
    if let Some(t) = args.t1 {
        d.thresholds.t1_cosine = t;
    }
    if let Some(t) = args.t2 {
        d.thresholds.t2_overlap = t;
    }
    if let Some(t) = args.t3 {
        d.thresholds.t3_keyword = t;
    }
}

/// `extract-keywords` output, or a bare id -> list map.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum KeywordEntry {
    Full {
        keywords: Vec<String>,
        #[serde(default)]
        source: String,
        #[serde(default)]
        all_stopwords: bool,
    },
    Bare(Vec<String>),
}

impl KeywordEntry {
    fn into_keywords(self) -> Vec<String> {
        match self {
            KeywordEntry::Full { keywords, .. } | KeywordEntry::Bare(keywords) => keywords,
        }
    }
}

fn keywords_for(
    triples: &[QaTriple],
    file: Option<&Path>,
    manifest: &mut ManifestBuilder,
) -> Result<BTreeMap<String, Vec<String>>> {
    match file {
        Some(path) => {
            require_file(path)?;
            manifest.input(path)?;
            let raw: BTreeMap<String, KeywordEntry> = read_json(path)?;
            Ok(raw.into_iter().map(|(k, v)| (k, v.into_keywords())).collect())
        }
        None => Ok(triples
            .iter()
            .map(|t| (t.id.clone(), fallback_keywords(&t.answer_raw).keywords))
            .collect()),
    }
}

fn detect(mut cfg: RunConfig, dataset: &DatasetArgs, detector: &DetectorArgs, embedding: &EmbeddingArgs) -> Result<()> {
    apply_dataset(&mut cfg, dataset);
    apply_detector(&mut cfg, detector);
    apply_embedding(&mut cfg, embedding);
    cfg.validate()?;
    let mode = cfg.detector.mode;
    let th = cfg.detector.thresholds;
    let mut m = ManifestBuilder::start("detect");
    let triples = load_triples(&cfg, dataset.split, &mut m)?;
    let results = if mode == DetectorMode::Keyword {
        let kws = keywords_for(&triples, detector.keywords.as_deref(), &mut m)?;
        detect_keyword_batch(&triples, &kws, th.t3_keyword)?
    } else {
        let embedder = build_embedder(&cfg, &mut m)?;
        if mode.needs_embeddings() && embedder.is_none() {
            return Err(usage(format!("{mode} detection needs an embedder (--embedder)")));
        }
        let r = detect_batch(&triples, mode, &th, embedder.as_ref())?;
        if let Some(e) = &embedder {
            e.save()?;
        }
        r
    };
    let mut body = String::new();
    for r in &results {
        body.push_str(&serde_json::to_string(r)?);
        body.push('\n');
    }
    let out = cfg.output_dir.join("detections.jsonl");
    write_text(&out, &body)?;
    m.output(&out);
    m.write(&cfg, &cfg.output_dir)?;
    let flagged = results
        .iter()
        .filter(|r| r.example_label == groundcheck::ExampleLabel::Hallucinated)
        .count();
    println!(
        "{}: {flagged} of {} answers flagged as hallucinated -> {}",
        mode.display_name(),
        results.len(),
        out.display()
    );
    Ok(())
}

fn tune(
    mut cfg: RunConfig,
    dataset: &DatasetArgs,
    detector: &DetectorArgs,
    embedding: &EmbeddingArgs,
    grid: Option<Vec<f64>>,
) -> Result<()> {
    apply_dataset(&mut cfg, dataset);
    apply_detector(&mut cfg, detector);
    apply_embedding(&mut cfg, embedding);
    cfg.validate()?;
    let mode = cfg.detector.mode;
    let grid = grid.unwrap_or_else(|| (1..10).map(|i| f64::from(i) / 10.0).collect());
    let mut m = ManifestBuilder::start("tune");
    let triples = load_triples(&cfg, dataset.split, &mut m)?;
    let result = if mode == DetectorMode::Keyword {
        let kws = keywords_for(&triples, detector.keywords.as_deref(), &mut m)?;
        tune_thresholds(mode, &triples, &grid, None, Some(&kws))?
    } else {
        let embedder = build_embedder(&cfg, &mut m)?;
        if mode.needs_embeddings() && embedder.is_none() {
            return Err(usage(format!("{mode} tuning needs an embedder (--embedder)")));
        }
        let r = tune_thresholds(mode, &triples, &grid, embedder.as_ref(), None)?;
        if let Some(e) = &embedder {
            e.save()?;
        }
        r
    };
    let out = cfg.output_dir.join("tuning.json");
    write_json(&out, &result)?;
    m.output(&out);
    m.write(&cfg, &cfg.output_dir)?;
    for p in &result.surface {
        let t = p.thresholds;
        let point = match mode {
            DetectorMode::Cosine => format!("t1={:.2}", t.t1_cosine),
            DetectorMode::Overlap => format!("t2={:.2}", t.t2_overlap),
            DetectorMode::Keyword => format!("t3={:.2}", t.t3_keyword),
            DetectorMode::Hybrid => format!("t1={:.2} t2={:.2}", t.t1_cosine, t.t2_overlap),
        };
        println!("{point}  macro F1 {:.2}", 100.0 * p.macro_f1);
    }
    let t = result.thresholds;
    println!(
        "best: t1={:.2} t2={:.2} t3={:.2} (macro F1 {:.2}) -> {}",
        t.t1_cosine,
        t.t2_overlap,
        t.t3_keyword,
        100.0 * result.macro_f1,
        out.display()
    );
    Ok(())
}

// ------------------------------------------------------------- evaluation

#[derive(Debug, Serialize, Deserialize)]
struct EvalOutput {
    name: String,
    mode: DetectorMode,
    per_split: BTreeMap<Split, EvalReport>,
    overall: EvalReport,
}

fn read_detections(path: &Path) -> Result<Vec<DetectionResult>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| usage(format!("{}:{}: {e}", path.display(), i + 1))))
        .collect()
}

fn eval(mut cfg: RunConfig, detections: &Path, dataset: &DatasetArgs, name: Option<String>) -> Result<()> {
    apply_dataset(&mut cfg, dataset);
    cfg.validate()?;
    require_file(detections)?;
    let mut m = ManifestBuilder::start("eval");
    m.input(detections)?;
    let results = read_detections(detections)?;
    let Some(first) = results.first() else {
        return Err(usage("no detection records"));
    };
    let mode = first.mode;
    if results.iter().any(|r| r.mode != mode) {
        return Err(usage("detection records mix detector modes"));
    }
    let triples = load_triples(&cfg, dataset.split, &mut m)?;
    let by_id: BTreeMap<&str, &QaTriple> = triples.iter().map(|t| (t.id.as_str(), t)).collect();

    let mut grouped: BTreeMap<Split, (Vec<_>, Vec<_>)> = BTreeMap::new();
    let (mut all_pred, mut all_gold) = (Vec::new(), Vec::new());
    for r in &results {
        let Some(t) = by_id.get(r.triple_id.as_str()) else {
            if dataset.split.is_some() {
                continue;
            }
            bail!("triple `{}` is not in the dataset", r.triple_id);
        };
        let gold = t.gold_label()?;
        let entry = grouped.entry(t.split).or_default();
        entry.0.push(r.example_label);
        entry.1.push(gold);
        all_pred.push(r.example_label);
        all_gold.push(gold);
    }
    let per_split = grouped
        .into_iter()
        .map(|(s, (p, g))| Ok((s, classification_report(&p, &g)?)))
        .collect::<Result<BTreeMap<_, _>>>()?;
    let overall = classification_report(&all_pred, &all_gold)?;
    let output = EvalOutput {
        name: name.unwrap_or_else(|| mode.display_name().to_string()),
        mode,
        per_split,
        overall,
    };
    let table = render_table(&[TableRow {
        name: output.name.clone(),
        per_split: output.per_split.clone(),
    }]);
    let out = cfg.output_dir.join("eval.json");
    write_json(&out, &output)?;
    let out_txt = cfg.output_dir.join("eval.txt");
    write_text(&out_txt, &table)?;
    m.output(&out);
    m.output(&out_txt);
    m.write(&cfg, &cfg.output_dir)?;
    print!("{table}");
    Ok(())
}

fn report(cfg: RunConfig, inputs: &[PathBuf]) -> Result<()> {
    let mut m = ManifestBuilder::start("report");
    let mut rows = Vec::new();
    for p in inputs {
        require_file(p)?;
        m.input(p)?;
        let e: EvalOutput = read_json(p)?;
        // The identity reported overall must be the mean of the class F1s.
        for r in e.per_split.values().chain([&e.overall]) {
            let mean = (r.f1(groundcheck::ExampleLabel::Hallucinated)
                + r.f1(groundcheck::ExampleLabel::NotHallucinated))
                / 2.0;
            if (mean - r.macro_f1).abs() > 1e-12 {
                bail!("{}: macro F1 is not the mean of the class F1 values", p.display());
            }
        }
        rows.push(TableRow {
            name: e.name,
            per_split: e.per_split,
        });
    }
    let table = render_table(&rows);
    let out = cfg.output_dir.join("report.txt");
    write_text(&out, &table)?;
    m.output(&out);
    m.write(&cfg, &cfg.output_dir)?;
    print!("{table}");
    Ok(())
}

fn stats_table(s: &DatasetStats) -> String {
    let mut t = String::new();
    let _ = writeln!(
        t,
        "{:<8}{:>11}{:>9}{:>14}{:>18}",
        "Split", "Questions", "Triples", "Hallucinated", "Not hallucinated"
    );
    let rows = s
        .per_split
        .iter()
        .map(|(k, v)| (k.to_string(), v))
        .chain([("Total".to_string(), &s.total)]);
    for (name, c) in rows {
        let _ = writeln!(
            t,
            "{:<8}{:>11}{:>9}{:>14}{:>18}",
            name, c.n_questions, c.n_triples, c.n_hallucinated, c.n_not_hallucinated
        );
    }
    t.push('\n');
    let _ = writeln!(
        t,
        "{:<18}{:>15}{:>7}{:>16}{:>9}{:>9}",
        "Method", "Hallucinated %", "N", "Context tokens", "SEM", "SD"
    );
    for (method, ms) in &s.per_method {
        let _ = writeln!(
            t,
            "{:<18}{:>15.1}{:>7}{:>16.1}{:>9.1}{:>9.1}",
            method.as_str(),
            ms.hallucinated_pct,
            ms.n_examples,
            ms.mean_context_tokens,
            ms.sem_context_tokens,
            ms.sd_context_tokens
        );
    }
    t
}

fn stats(mut cfg: RunConfig, dataset: &DatasetArgs) -> Result<()> {
    apply_dataset(&mut cfg, dataset);
    cfg.validate()?;
    let mut m = ManifestBuilder::start("stats");
    let triples = load_triples(&cfg, dataset.split, &mut m)?;
    let s = DatasetStats::compute(&triples)?;
    let table = stats_table(&s);
    let out = cfg.output_dir.join("stats.json");
    write_json(&out, &s)?;
    let out_txt = cfg.output_dir.join("stats.txt");
    write_text(&out_txt, &table)?;
    m.output(&out);
    m.output(&out_txt);
    m.write(&cfg, &cfg.output_dir)?;
    print!("{table}");
    Ok(())
}

#[derive(Serialize)]
struct AgreementOutput {
    #[serde(skip_serializing_if = "Option::is_none")]
    sentence_labels: Option<AgreementReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    krippendorff_alpha: Option<f64>,
}

fn parse_labels(path: &Path) -> Result<BTreeMap<String, Vec<SentenceVerdict>>> {
    let raw: BTreeMap<String, Vec<String>> = read_json(path)?;
    raw.into_iter()
        .map(|(id, labels)| {
            let parsed = labels
                .iter()
                .map(|l| l.parse::<SentenceVerdict>().map_err(usage))
                .collect::<Result<Vec<_>>>()?;
            Ok((id, parsed))
        })
        .collect()
}

fn agreement(
    cfg: RunConfig,
    reference: Option<&Path>,
    candidate: Option<&Path>,
    annotations: Option<&Path>,
) -> Result<()> {
    if reference.is_none() && annotations.is_none() {
        return Err(usage("give --reference and --candidate, or --annotations"));
    }
    let mut m = ManifestBuilder::start("agreement");
    let mut output = AgreementOutput {
        sentence_labels: None,
        krippendorff_alpha: None,
    };
    if let (Some(r), Some(c)) = (reference, candidate) {
        require_file(r)?;
        require_file(c)?;
        m.input(r)?;
        m.input(c)?;
        let (r, c) = (parse_labels(r)?, parse_labels(c)?);
        if r.keys().ne(c.keys()) {
            return Err(usage("reference and candidate cover different triple ids"));
        }
        let (mut ref_all, mut cand_all) = (Vec::new(), Vec::new());
        for (id, labels) in &r {
            let other = &c[id];
            if labels.len() != other.len() {
                return Err(usage(format!(
                    "triple `{id}`: {} vs {} labels",
                    labels.len(),
                    other.len()
                )));
            }
            ref_all.extend_from_slice(labels);
            cand_all.extend_from_slice(other);
        }
        let rep = agreement_report(&ref_all, &cand_all)?;
        for (label, metrics) in &rep.per_label {
            println!(
                "{label:<11} precision {:>6.2}  recall {:>6.2}  F1 {:>6.2}",
                100.0 * metrics.precision,
                100.0 * metrics.recall,
                100.0 * metrics.f1
            );
        }
        for label in &rep.omitted {
            println!("{label:<11} absent from both labellings");
        }
        output.sentence_labels = Some(rep);
    }
    if let Some(a) = annotations {
        require_file(a)?;
        m.input(a)?;
        let matrix: Vec<Vec<Option<String>>> = read_json(a)?;
        let alpha = krippendorff_alpha(&matrix)?;
        println!("Krippendorff's alpha (nominal): {:.4}", alpha);
        output.krippendorff_alpha = Some(alpha);
    }
    let out = cfg.output_dir.join("agreement.json");
    write_json(&out, &output)?;
    m.output(&out);
    m.write(&cfg, &cfg.output_dir)?;
    Ok(())
}

// --------------------------------------------------------------- keywords

fn apply_chat(cfg: &mut RunConfig, args: &ChatArgs) {
    let c = &mut cfg.chat;
    if let Some(mode) = args.chat_mode {
        c.mode = mode;
    }
    if let Some(u) = &args.chat_endpoint {
        c.endpoint = Some(u.clone());
    }
    if let Some(d) = &args.chat_cache {
        c.cache_dir = d.clone();
    }
    if let Some(model) = &args.model {
        c.model = model.clone();
    }
}

fn extract_keywords(mut cfg: RunConfig, dataset: &DatasetArgs, source: KeywordSource, chat: &ChatArgs) -> Result<()> {
    apply_dataset(&mut cfg, dataset);
    apply_chat(&mut cfg, chat);
    cfg.validate()?;
    let mut m = ManifestBuilder::start("extract-keywords");
    let triples = load_triples(&cfg, dataset.split, &mut m)?;
    let entries: BTreeMap<String, KeywordEntry> = match source {
        KeywordSource::Fallback => triples
            .iter()
            .map(|t| {
                let f = fallback_keywords(&t.answer_raw);
                (
                    t.id.clone(),
                    KeywordEntry::Full {
                        keywords: f.keywords,
                        source: "fallback".into(),
                        all_stopwords: f.all_stopwords,
                    },
                )
            })
            .collect(),
        KeywordSource::Llm => {
            let c = &cfg.chat;
            let provider = match &c.endpoint {
                Some(url) => Some(Box::new(
                    HttpChatProvider::new(url.clone())
                        .with_api_key(api_key(c.api_key_env.as_deref())?)
                        .with_params(c.params.clone())
                        .with_rate_limit(c.rate_limit),
                ) as Box<dyn groundcheck::llm::ChatProvider>),
                None if c.mode == ProviderMode::Replay => None,
                None => return Err(usage("llm keywords need a chat endpoint outside replay mode")),
            };
            let client = ChatClient::new(provider, c.model.clone(), c.mode, c.cache_dir.clone())?;
            triples
                .par_iter()
                .map(|t| {
                    let text = client.chat(&build_keyword_prompt(&t.answer_raw)?)?;
                    Ok((
                        t.id.clone(),
                        KeywordEntry::Full {
                            keywords: parse_keyword_response(&text),
                            source: format!("llm:{}", c.model),
                            all_stopwords: false,
                        },
                    ))
                })
                .collect::<Result<_>>()?
        }
    };
    let empty = entries
        .values()
        .filter(|e| matches!(e, KeywordEntry::Full { keywords, .. } if keywords.is_empty()))
        .count();
    let out = cfg.output_dir.join("keywords.json");
    write_json(&out, &entries)?;
    m.output(&out);
    m.write(&cfg, &cfg.output_dir)?;
    println!(
        "keywords for {} triples ({empty} empty) -> {}",
        entries.len(),
        out.display()
    );
    Ok(())
}
