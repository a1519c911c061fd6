//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero when any criterion fails. Criteria that need the annotated
//! release report FAIL with a BLOCKED note when it cannot be found.
//!
//! Dataset lookup: `GROUNDCHECK_DATASET` (schema from `GROUNDCHECK_ADAPTER`,
//! default `release`), else `<workspace>/data/delucionqa`.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use groundcheck::corpus::{derive_example_label, load_dataset, DatasetStats, SchemaAdapter};
use groundcheck::detectors::{detect_batch, detect_keyword_batch};
use groundcheck::evaluation::{classification_report, tune_thresholds};
use groundcheck::llm::{build_answer_prompt, build_keyword_prompt, fallback_keywords};
use groundcheck::retrieval::{
    ingest_manual, search_adaptive, search_dense, search_ensemble, search_sparse, Bm25Params, Level,
    MultiGranularityIndex, RetrievalConfig,
};
use groundcheck::similarity::{align_lcs, overlap_ratio, HashingProvider};
use groundcheck::textproc::tokenize;
use groundcheck::{
    DetectorMode, Embedder, Error, ExampleLabel, ProviderMode, QaTriple, RetrievalMethod, SentenceVerdict, Split,
    Thresholds, TokenSequence,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn core_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

fn fixture(name: &str) -> PathBuf {
    core_dir().join("tests/fixtures").join(name)
}

fn blocked(what: &str) -> String {
    format!("BLOCKED: {what}")
}

fn dataset_path() -> Option<(PathBuf, SchemaAdapter)> {
    let adapter = std::env::var("GROUNDCHECK_ADAPTER")
        .ok()
        .and_then(|a| a.parse().ok())
        .unwrap_or(SchemaAdapter::Release);
    let path = std::env::var_os("GROUNDCHECK_DATASET")
        .map(PathBuf::from)
        .unwrap_or_else(|| core_dir().join("../../data/delucionqa"));
    path.exists().then_some((path, adapter))
}

fn load_official() -> Result<Vec<QaTriple>, String> {
    let Some((path, adapter)) = dataset_path() else {
        return Err(blocked(
            "annotated release not found; set GROUNDCHECK_DATASET or place it under data/delucionqa",
        ));
    };
    load_dataset(&path, adapter).map_err(|e| format!("loading {}: {e}", path.display()))
}

fn split_of(data: &[QaTriple], split: Split) -> Vec<QaTriple> {
    data.iter().filter(|t| t.split == split).cloned().collect()
}

fn hashing_embedder() -> Embedder {
    Embedder::live(Box::new(HashingProvider::new(512)))
}

fn macro_f1(mode: DetectorMode, triples: &[QaTriple], th: &Thresholds, emb: Option<&Embedder>) -> Result<f64, String> {
    let det = detect_batch(triples, mode, th, emb).map_err(|e| e.to_string())?;
    report_macro(
        triples,
        &det.iter().map(|d| (d.triple_id.clone(), d.example_label)).collect(),
    )
}

fn report_macro(triples: &[QaTriple], pred: &BTreeMap<String, ExampleLabel>) -> Result<f64, String> {
    let mut p = Vec::new();
    let mut g = Vec::new();
    for t in triples {
        p.push(*pred.get(&t.id).ok_or_else(|| format!("no prediction for {}", t.id))?);
        g.push(t.gold_label().map_err(|e| e.to_string())?);
    }
    let r = classification_report(&p, &g).map_err(|e| e.to_string())?;
    let mean = (r.f1(ExampleLabel::Hallucinated) + r.f1(ExampleLabel::NotHallucinated)) / 2.0;
    if (mean - r.macro_f1).abs() > 1e-12 {
        return Err(format!("macro F1 {} differs from class mean {mean}", r.macro_f1));
    }
    Ok(100.0 * r.macro_f1)
}

fn within_time(start: Instant, limit: Duration) -> Result<(), String> {
    let took = start.elapsed();
    if took > limit {
        Err(format!("took {took:.2?}, limit {limit:?}"))
    } else {
        Ok(())
    }
}

// ---------------------------------------------------------------- 1

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let data = load_official()?;
    let stats = DatasetStats::compute(&data).map_err(|e| e.to_string())?;
    let mut problems = Vec::new();
    let expected = [
        (Split::Train, (513, 1151, 392, 759)),
        (Split::Dev, (100, 216, 94, 122)),
        (Split::Test, (300, 671, 252, 419)),
    ];
    for (split, want) in expected {
        let c = stats.per_split.get(&split).copied().unwrap_or_default();
        let got = (c.n_questions, c.n_triples, c.n_hallucinated, c.n_not_hallucinated);
        if got != want {
            problems.push(format!("{split:?} {got:?} != {want:?}"));
        }
    }
    let t = stats.total;
    if (t.n_questions, t.n_triples, t.n_hallucinated, t.n_not_hallucinated) != (913, 2038, 738, 1300) {
        problems.push(format!("totals {t:?}"));
    }
    let per_method = [
        (RetrievalMethod::Sparse, 39.2, 190.9),
        (RetrievalMethod::EnsembleTop1, 28.9, 162.3),
        (RetrievalMethod::EnsembleTop3, 23.2, 421.2),
        (RetrievalMethod::AdaptiveEnsemble, 45.6, 232.5),
    ];
    for (m, pct, tokens) in per_method {
        let s = stats.per_method.get(&m).copied().unwrap_or_default();
        if (s.hallucinated_pct - pct).abs() > 0.1 {
            problems.push(format!("{m:?} hallucinated {:.2}% vs {pct}%", s.hallucinated_pct));
        }
        if (s.mean_context_tokens - tokens).abs() > 0.15 * tokens {
            problems.push(format!("{m:?} context tokens {:.1} vs {tokens}", s.mean_context_tokens));
        }
    }
    within_time(start, Duration::from_secs(10))?;
    if problems.is_empty() {
        Ok("split counts, totals and per-method statistics match".into())
    } else {
        Err(problems.join("; "))
    }
}

// ---------------------------------------------------------------- 2

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let data = load_official()?;
    let th = Thresholds {
        t2_overlap: 0.1,
        ..Thresholds::default()
    };
    let test = macro_f1(DetectorMode::Overlap, &split_of(&data, Split::Test), &th, None)?;
    let dev = macro_f1(DetectorMode::Overlap, &split_of(&data, Split::Dev), &th, None)?;
    within_time(start, Duration::from_secs(60))?;
    let detail = format!("Test {test:.2} (target 71.09), Dev {dev:.2} (target 76.84)");
    if (test - 71.09).abs() <= 5.0 && (dev - 76.84).abs() <= 5.0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// ---------------------------------------------------------------- 3

fn criterion_3() -> Outcome {
    let th = Thresholds {
        t1_cosine: 0.6,
        ..Thresholds::default()
    };
    if let (Some(cache), Ok(data)) = (std::env::var_os("GROUNDCHECK_EMBEDDING_CACHE"), load_official()) {
        let emb = Embedder::with_cache(
            None,
            "sentence-transformers/all-MiniLM-L6-v2",
            ProviderMode::Replay,
            PathBuf::from(cache),
        )
        .map_err(|e| e.to_string())?;
        let test = macro_f1(DetectorMode::Cosine, &split_of(&data, Split::Test), &th, Some(&emb))?;
        let detail = format!("recorded-embedding replay: Test {test:.2} (target 69.45)");
        return if (test - 69.45).abs() <= 5.0 {
            Ok(detail)
        } else {
            Err(detail)
        };
    }

    let triples = load_dataset(&fixture("hand_corpus.jsonl"), SchemaAdapter::Canonical).map_err(|e| e.to_string())?;
    if triples.len() != 50 {
        return Err(format!("hand corpus has {} triples, expected 50", triples.len()));
    }
    let emb = Embedder::with_cache(
        None,
        "hashing-v2/dim=512",
        ProviderMode::Replay,
        fixture("hand_corpus_embeddings.json"),
    )
    .map_err(|e| e.to_string())?;
    let det = detect_batch(&triples, DetectorMode::Cosine, &th, Some(&emb)).map_err(|e| e.to_string())?;
    let by_id: BTreeMap<&str, _> = det.iter().map(|d| (d.triple_id.as_str(), d)).collect();
    let (mut right, mut total) = (0usize, 0usize);
    for t in &triples {
        let gold = t
            .gold_sentence_labels
            .as_ref()
            .ok_or("hand corpus lacks sentence labels")?;
        let d = by_id[t.id.as_str()];
        for (i, g) in gold.iter().enumerate() {
            let predicted_supported = !d.unsupported_sentence_indices.contains(&i);
            right += usize::from(predicted_supported == (*g == SentenceVerdict::Supported));
            total += 1;
        }
    }
    let acc = 100.0 * right as f64 / total as f64;
    let detail = format!(
        "substitute (no recorded fixture for the reference model): hand corpus sentence accuracy \
         {acc:.2}% over {total} sentences, need >= 95%"
    );
    if acc >= 95.0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// ---------------------------------------------------------------- 4

fn criterion_4() -> Outcome {
    let data = load_official()?;
    let test = split_of(&data, Split::Test);
    let overlap = macro_f1(
        DetectorMode::Overlap,
        &test,
        &Thresholds {
            t2_overlap: 0.1,
            ..Thresholds::default()
        },
        None,
    )?;
    let keywords: BTreeMap<String, Vec<String>> = test
        .iter()
        .map(|t| (t.id.clone(), fallback_keywords(&t.answer_raw).keywords))
        .collect();
    let det = detect_keyword_batch(&test, &keywords, 0.2).map_err(|e| e.to_string())?;
    let keyword = report_macro(
        &test,
        &det.iter().map(|d| (d.triple_id.clone(), d.example_label)).collect(),
    )?;
    let detail = format!("keyword {keyword:.2} vs overlap {overlap:.2}");
    if keyword <= overlap - 10.0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// ---------------------------------------------------------------- 5

/// Reference per-class and overall F1 (percent) per detector, for the
/// train, dev and test splits.
const REFERENCE: [(&str, [[f64; 3]; 3]); 4] = [
    (
        "Sim-cosine",
        [[63.18, 74.73, 70.03], [72.45, 77.12, 74.78], [63.84, 73.55, 69.45]],
    ),
    (
        "Sim-overlap",
        [[68.47, 82.72, 75.59], [73.51, 80.16, 76.84], [63.89, 78.28, 71.09]],
    ),
    (
        "Sim-hybrid",
        [[68.73, 83.16, 75.94], [73.51, 80.16, 76.84], [63.33, 78.29, 70.81]],
    ),
    (
        "Keyword-match",
        [[30.25, 77.47, 53.86], [31.58, 69.57, 50.57], [31.23, 74.31, 52.77]],
    ),
];

fn criterion_5() -> Outcome {
    let mut bad = Vec::new();
    for (name, splits) in REFERENCE {
        for (split, [hal, nhal, overall]) in ["Train", "Dev", "Test"].iter().zip(splits) {
            let mean = (hal + nhal) / 2.0;
            if (mean - overall).abs() > 0.01 + 1e-9 {
                bad.push(format!(
                    "{name} {split}: ({hal} + {nhal})/2 = {mean:.3} vs reported {overall}"
                ));
            }
        }
    }

    // Internal identity on many random labellings, degenerate ones included.
    let mut rng = StdRng::seed_from_u64(5);
    for _ in 0..2000 {
        let n = rng.random_range(1..40);
        let mut draw = |p: f64| {
            (0..n)
                .map(|_| {
                    if rng.random_bool(p) {
                        ExampleLabel::Hallucinated
                    } else {
                        ExampleLabel::NotHallucinated
                    }
                })
                .collect::<Vec<_>>()
        };
        let (pa, pb) = (f64::from(n % 3) / 2.0, 0.4);
        let pred = draw(pa);
        let gold = draw(pb);
        let r = classification_report(&pred, &gold).map_err(|e| e.to_string())?;
        let mean = (r.f1(ExampleLabel::Hallucinated) + r.f1(ExampleLabel::NotHallucinated)) / 2.0;
        if (mean - r.macro_f1).abs() > 1e-12 {
            bad.push(format!("internal report: macro {} vs class mean {mean}", r.macro_f1));
            break;
        }
    }
    if bad.is_empty() {
        Ok("all 12 reference rows and 2000 internal reports satisfy the identity".into())
    } else {
        Err(format!("reference table violates the identity: {}", bad.join("; ")))
    }
}

// ---------------------------------------------------------------- 6

/// Longest common subsequence length by exhaustive enumeration of every
/// strictly increasing chain of matching index pairs.
fn exhaustive_len(a: &[String], b: &[String]) -> usize {
    fn walk(a: &[String], b: &[String], from: (usize, usize), len: usize, best: &mut usize) {
        *best = (*best).max(len);
        for i in from.0..a.len() {
            for j in from.1..b.len() {
                if a[i] == b[j] {
                    walk(a, b, (i + 1, j + 1), len + 1, best);
                }
            }
        }
    }
    let mut best = 0;
    walk(a, b, (0, 0), 0, &mut best);
    best
}

/// Upper bound on the common subsequence length of two sequences: the
/// multiset intersection size.
fn multiset_bound(a: &[String], b: &[String]) -> usize {
    let mut counts: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for t in a {
        counts.entry(t).or_default().0 += 1;
    }
    for t in b {
        counts.entry(t).or_default().1 += 1;
    }
    counts.values().map(|(x, y)| x.min(y)).sum()
}

/// The same enumeration with branch-and-bound pruning, for pairs too long
/// to enumerate in full.
fn pruned_len(a: &[String], b: &[String]) -> usize {
    fn walk(a: &[String], b: &[String], from: (usize, usize), len: usize, best: &mut usize) {
        *best = (*best).max(len);
        if len + multiset_bound(&a[from.0..], &b[from.1..]) <= *best {
            return;
        }
        for i in from.0..a.len() {
            for j in from.1..b.len() {
                if a[i] == b[j] {
                    walk(a, b, (i + 1, j + 1), len + 1, best);
                }
            }
        }
    }
    let mut best = 0;
    walk(a, b, (0, 0), 0, &mut best);
    best
}

/// The alignment fixed by the tie-break rule (take a match, else advance in
/// `a` when that keeps the remaining LCS length, else advance in `b`),
/// traced with suffix lengths from `lcs_len` instead of a DP table.
fn rule_trace(a: &[String], b: &[String], lcs_len: fn(&[String], &[String]) -> usize) -> Vec<(usize, usize)> {
    let (mut i, mut j) = (0, 0);
    let mut pairs = Vec::new();
    while i < a.len() && j < b.len() {
        if a[i] == b[j] {
            pairs.push((i, j));
            i += 1;
            j += 1;
        } else if lcs_len(&a[i + 1..], &b[j..]) == lcs_len(&a[i..], &b[j..]) {
            i += 1;
        } else {
            j += 1;
        }
    }
    pairs
}

fn ceil_three_tenths(n: usize) -> usize {
    let mut c = 0;
    while 10 * c < 3 * n {
        c += 1;
    }
    c
}

/// Overlap ratio from an independently found alignment: diagonal runs
/// longer than the smaller of 4 and ceil(0.3 * shorter length) count.
fn brute_overlap(x: &[String], y: &[String], exhaustive: bool) -> f64 {
    let (a, b) = if (x.len(), x) <= (y.len(), y) { (x, y) } else { (y, x) };
    let path = rule_trace(a, b, if exhaustive { exhaustive_len } else { pruned_len });
    let bound = 4.min(ceil_three_tenths(a.len()));
    let mut runs = Vec::new();
    for (k, p) in path.iter().enumerate() {
        if k > 0 && path[k - 1].0 + 1 == p.0 && path[k - 1].1 + 1 == p.1 {
            *runs.last_mut().unwrap() += 1;
        } else {
            runs.push(1usize);
        }
    }
    let qualifying: usize = runs.iter().filter(|&&r| r > bound).sum();
    qualifying as f64 / a.len() as f64
}

fn random_tokens(rng: &mut StdRng, len: usize, alphabet: usize) -> Vec<String> {
    (0..len)
        .map(|_| format!("w{}", rng.random_range(0..alphabet)))
        .collect()
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let mut rng = StdRng::seed_from_u64(6);
    let seq = |v: &[String]| TokenSequence::from_tokens(v.iter().cloned());

    let lcs_pairs = 1200;
    for n in 0..lcs_pairs {
        let la = rng.random_range(0..=8);
        let lb = rng.random_range(0..=8);
        let a = random_tokens(&mut rng, la, 4);
        let b = random_tokens(&mut rng, lb, 4);
        let best_len = exhaustive_len(&a, &b);
        let want = rule_trace(&a, &b, exhaustive_len);
        let got = align_lcs(&seq(&a), &seq(&b));
        let valid = got.pairs.iter().all(|&(i, j)| a[i] == b[j])
            && got.pairs.windows(2).all(|w| w[0].0 < w[1].0 && w[0].1 < w[1].1);
        if !valid || got.len() != best_len || got.pairs != want {
            return Err(format!(
                "pair {n}: {a:?} / {b:?}: align_lcs {:?}, maximum length {best_len}, rule trace {want:?}",
                got.pairs
            ));
        }
    }

    let mut overlap_pairs = 0;
    let mut long_pairs = 0;
    for n in 0..260 {
        let (a, b, exhaustive) = if n < 200 {
            let la = rng.random_range(1..=8);
            let lb = rng.random_range(1..=8);
            (random_tokens(&mut rng, la, 4), random_tokens(&mut rng, lb, 4), true)
        } else {
            // Long pairs with a planted shared run, so the fixed bound of 4
            // decides which phrases count.
            let la = rng.random_range(14..=18);
            let lb = rng.random_range(14..=18);
            let mut a = random_tokens(&mut rng, la, 12);
            let b = random_tokens(&mut rng, lb, 12);
            let run = rng.random_range(3..=7).min(la).min(lb);
            let (sa, sb) = (rng.random_range(0..=la - run), rng.random_range(0..=lb - run));
            a[sa..sa + run].clone_from_slice(&b[sb..sb + run]);
            long_pairs += 1;
            (a, b, false)
        };
        let want = brute_overlap(&a, &b, exhaustive);
        let got = overlap_ratio(&seq(&a), &seq(&b)).map_err(|e| e.to_string())?;
        if (got - want).abs() > 1e-12 {
            return Err(format!("overlap pair {n}: {a:?} / {b:?}: got {got}, oracle {want}"));
        }
        overlap_pairs += 1;
    }
    within_time(start, Duration::from_secs(30))?;
    Ok(format!(
        "{lcs_pairs} LCS pairs and {overlap_pairs} overlap pairs ({long_pairs} long) agree in {:.2?}",
        start.elapsed()
    ))
}

// ---------------------------------------------------------------- 7

fn criterion_7() -> Outcome {
    use SentenceVerdict::*;
    let verdicts = [Supported, Conflicted, Neither];
    let flags = [None, Some(true), Some(false)];
    let mut lists: Vec<Vec<SentenceVerdict>> = vec![vec![]];
    let mut all = Vec::new();
    for _ in 0..4 {
        lists = lists
            .iter()
            .flat_map(|l| {
                verdicts.iter().map(move |v| {
                    let mut l = l.clone();
                    l.push(*v);
                    l
                })
            })
            .collect();
        all.extend(lists.iter().cloned());
    }
    let mut checked = 0;
    for labels in &all {
        for answerable in flags {
            for dna in flags {
                let bad = labels.iter().filter(|l| matches!(l, Neither | Conflicted)).count();
                let irrelevant_and_answered = answerable == Some(false) && dna == Some(false);
                let want = if bad == 0 && !irrelevant_and_answered {
                    ExampleLabel::NotHallucinated
                } else {
                    ExampleLabel::Hallucinated
                };
                let got = derive_example_label(labels, answerable, dna).map_err(|e| e.to_string())?;
                if got != want {
                    return Err(format!("{labels:?} answerable={answerable:?} dna={dna:?}: {got:?}"));
                }
                checked += 1;
            }
        }
    }
    if derive_example_label(&[], None, None).is_ok() {
        return Err("empty label list accepted".into());
    }
    Ok(format!(
        "{} label lists x 9 flag combinations = {checked} cases agree",
        all.len()
    ))
}

// ---------------------------------------------------------------- 8

fn brute_bm25(index: &MultiGranularityIndex, query: &str, level: Option<Level>, p: Bm25Params) -> Vec<(String, f64)> {
    let docs: Vec<(String, Vec<String>)> = index
        .units()
        .iter()
        .filter(|u| level.is_none_or(|l| u.level == l))
        .map(|u| (u.node_id.clone(), tokenize(&u.text).tokens().to_vec()))
        .collect();
    let n = docs.len() as f64;
    let avgdl = docs.iter().map(|d| d.1.len()).sum::<usize>() as f64 / n;
    let mut out = Vec::new();
    for (id, toks) in &docs {
        let mut score = 0.0;
        let mut matched = false;
        for q in tokenize(query).tokens() {
            let tf = toks.iter().filter(|t| *t == q).count() as f64;
            if tf == 0.0 {
                continue;
            }
            matched = true;
            let df = docs.iter().filter(|d| d.1.contains(q)).count() as f64;
            let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
            score += idf * tf * (p.k1 + 1.0) / (tf + p.k1 * (1.0 - p.b + p.b * toks.len() as f64 / avgdl));
        }
        if matched {
            out.push((id.clone(), score));
        }
    }
    out.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    out
}

fn criterion_8() -> Outcome {
    let emb = hashing_embedder();
    let trees = ingest_manual(&fixture("toy_manual.md")).map_err(|e| e.to_string())?;
    let index = MultiGranularityIndex::build(&trees, Some(&emb)).map_err(|e| e.to_string())?;
    if index.units().len() != 20 {
        return Err(format!("toy manual has {} units, expected 20", index.units().len()));
    }
    let vocab: Vec<String> = index.vocabulary().map(str::to_string).collect();
    let mut rng = StdRng::seed_from_u64(8);
    let queries: Vec<String> = (0..100)
        .map(|_| {
            let n = rng.random_range(1..=4);
            let mut words: Vec<String> = (0..n)
                .map(|_| vocab[rng.random_range(0..vocab.len())].clone())
                .collect();
            if rng.random_bool(0.2) {
                words.push("zzunseen".into());
            }
            words.join(" ")
        })
        .collect();

    let params = Bm25Params::default();
    let levels = [
        None,
        Some(Level::Document),
        Some(Level::Section),
        Some(Level::Paragraph),
    ];
    for q in &queries {
        for level in levels {
            let want = brute_bm25(&index, q, level, params);
            let got = search_sparse(&index, q, 1000, level, params);
            if got.len() != want.len()
                || got
                    .iter()
                    .zip(&want)
                    .any(|(g, w)| g.node_id != w.0 || (g.score - w.1).abs() > 1e-12)
            {
                return Err(format!("sparse mismatch for `{q}` at {level:?}"));
            }
        }
    }

    let cfg = RetrievalConfig::default();
    let k = 3;
    let depth = k * cfg.over_retrieve;
    for q in &queries {
        let hits =
            search_ensemble(&index, Some(&emb), q, k, Some(Level::Paragraph), &cfg).map_err(|e| e.to_string())?;
        if hits.sparse_only || hits.hits.len() > k {
            return Err(format!(
                "ensemble for `{q}` returned {} hits, sparse_only={}",
                hits.hits.len(),
                hits.sparse_only
            ));
        }
        let mut union: BTreeSet<String> = search_sparse(&index, q, depth, Some(Level::Paragraph), params)
            .into_iter()
            .map(|h| h.node_id)
            .collect();
        union.extend(
            search_dense(&index, &emb, q, depth, Some(Level::Paragraph))
                .map_err(|e| e.to_string())?
                .into_iter()
                .map(|h| h.node_id),
        );
        if let Some(h) = hits.hits.iter().find(|h| !union.contains(&h.node_id)) {
            return Err(format!(
                "ensemble hit {} for `{q}` is in neither top-{depth} list",
                h.node_id
            ));
        }
    }

    let trees = ingest_manual(&fixture("five_docs.md")).map_err(|e| e.to_string())?;
    if trees.len() != 5 {
        return Err(format!("five-document fixture parsed into {} documents", trees.len()));
    }
    let index = MultiGranularityIndex::build(&trees, Some(&emb)).map_err(|e| e.to_string())?;
    let res =
        search_adaptive(&index, Some(&emb), "How do I recalibrate the compass?", 3, &cfg).map_err(|e| e.to_string())?;
    let top = res.hits.first().ok_or("adaptive search returned nothing")?;
    if top.node_id != "d2.s1.p5" {
        return Err(format!("adaptive top hit is {}, expected d2.s1.p5", top.node_id));
    }
    if let Some(extra) = res
        .hits
        .iter()
        .skip(1)
        .flat_map(|h| h.node_id.split('+'))
        .find(|id| id.starts_with("d2"))
    {
        return Err(format!(
            "adaptive search also returned {extra} from the planted document"
        ));
    }
    Ok(format!(
        "BM25 exact on {} queries x 4 collections; ensemble within the union on {} queries; adaptive returns d2.s1.p5 alone",
        queries.len(),
        queries.len()
    ))
}

// ---------------------------------------------------------------- 9

fn tuning_check(dev: &[QaTriple]) -> Result<String, String> {
    let grid: Vec<f64> = (1..10).map(|i| f64::from(i) / 10.0).collect();
    let runs = (0..3)
        .map(|_| tune_thresholds(DetectorMode::Overlap, dev, &grid, None, None).map_err(|e| e.to_string()))
        .collect::<Result<Vec<_>, _>>()?;
    if runs.iter().any(|r| r != &runs[0]) {
        return Err("tuning runs differ".into());
    }
    let r = &runs[0];
    let th = |t: f64| Thresholds {
        t2_overlap: t,
        ..Thresholds::default()
    };
    for p in &grid {
        let f = macro_f1(DetectorMode::Overlap, dev, &th(*p), None)? / 100.0;
        if f > r.macro_f1 + 1e-12 {
            return Err(format!("T2={p} reaches {f}, above the returned optimum {}", r.macro_f1));
        }
    }
    Ok(format!(
        "3 identical runs, argmax T2={} with macro F1 {:.2}, verified against all {} grid points",
        r.thresholds.t2_overlap,
        100.0 * r.macro_f1,
        grid.len()
    ))
}

fn criterion_9() -> Outcome {
    match load_official() {
        Ok(data) => tuning_check(&split_of(&data, Split::Dev)),
        Err(e) => {
            let hand =
                load_dataset(&fixture("hand_corpus.jsonl"), SchemaAdapter::Canonical).map_err(|e| e.to_string())?;
            let supplementary = match tuning_check(&hand) {
                Ok(s) => format!("supplementary hand-corpus run passed: {s}"),
                Err(s) => format!("supplementary hand-corpus run failed: {s}"),
            };
            Err(format!("{e}; {supplementary}"))
        }
    }
}

// ---------------------------------------------------------------- 10

fn criterion_10() -> Outcome {
    let golden = core_dir().join("tests/golden");
    let question = "How do I pair my phone?";
    let context = "Press the phone button. Follow the voice prompts.";
    let cases = [
        (
            "prompt_sparse.json",
            build_answer_prompt(RetrievalMethod::Sparse, question, context),
        ),
        (
            "prompt_ensemble_top1.json",
            build_answer_prompt(RetrievalMethod::EnsembleTop1, question, context),
        ),
        (
            "prompt_ensemble_top3.json",
            build_answer_prompt(RetrievalMethod::EnsembleTop3, question, context),
        ),
        (
            "prompt_adaptive_ensemble.json",
            build_answer_prompt(RetrievalMethod::AdaptiveEnsemble, question, context),
        ),
        (
            "prompt_keyword.json",
            build_keyword_prompt("Press the phone button, then follow the prompts."),
        ),
    ];
    for (file, bundle) in cases {
        let bundle = bundle.map_err(|e| format!("{file}: {e}"))?;
        let want = std::fs::read(golden.join(file)).map_err(|e| format!("{file}: {e}"))?;
        let got = format!("{}\n", bundle.to_messages_json());
        if got.as_bytes() != want.as_slice() {
            return Err(format!("{file} differs from the generated prompt:\n{got}"));
        }
    }
    let long = read(&fixture("context_41_sentences.txt"))?;
    match build_answer_prompt(RetrievalMethod::Sparse, question, long.trim()) {
        Err(Error::ContextTooLong(41)) => {}
        other => return Err(format!("41-sentence context not rejected as expected: {other:?}")),
    }
    Ok("5 golden prompts byte-identical; 41-sentence context rejected".into())
}

fn read(p: &Path) -> Result<String, String> {
    std::fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("dataset accounting", criterion_1),
        ("Sim-overlap reproduction", criterion_2),
        ("Sim-cosine reproduction", criterion_3),
        ("keyword below overlap", criterion_4),
        ("macro-F1 arithmetic", criterion_5),
        ("LCS and overlap oracles", criterion_6),
        ("label aggregation", criterion_7),
        ("retrieval oracles", criterion_8),
        ("tuning determinism", criterion_9),
        ("prompt golden files", criterion_10),
    ];
    let mut failed = 0;
    for (n, (name, run)) in criteria.iter().enumerate() {
        match run() {
            Ok(detail) => println!("PASS [{}] {name}: {detail}", n + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL [{}] {name}: {detail}", n + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
