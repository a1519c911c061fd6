use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::classification_report;
use crate::corpus::{ExampleLabel, QaTriple};
use crate::detectors::{decide, keyword_evidence_lenient, score_batch, DetectorMode, Thresholds, TripleScores};
use crate::error::{Error, Result};
use crate::similarity::{Embedder, PhraseBound};

/// Threshold-independent scores for a tuning run.
#[derive(Debug, Clone, PartialEq)]
pub enum TuningInput {
    /// Per-sentence maxima for each triple.
    Similarity(Vec<TripleScores>),
    /// Missing-keyword ratio for each triple.
    Keyword(Vec<f64>),
}

impl TuningInput {
    fn len(&self) -> usize {
        match self {
            TuningInput::Similarity(s) => s.len(),
            TuningInput::Keyword(r) => r.len(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub thresholds: Thresholds,
    pub macro_f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningResult {
    pub mode: DetectorMode,
    pub thresholds: Thresholds,
    pub macro_f1: f64,
    /// Every evaluated point in lexicographic threshold order.
    pub surface: Vec<GridPoint>,
}

fn clean_grid(grid: &[f64]) -> Result<Vec<f64>> {
    if grid.is_empty() {
        return Err(Error::EmptyInput("threshold grid"));
    }
    if let Some(bad) = grid.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::InvalidThreshold {
            name: "grid",
            value: *bad,
        });
    }
    let mut g = grid.to_vec();
    g.sort_by(f64::total_cmp);
    g.dedup();
    Ok(g)
}

fn candidates(mode: DetectorMode, grid: &[f64]) -> Vec<Thresholds> {
    let base = Thresholds::default();
    match mode {
        DetectorMode::Cosine => grid.iter().map(|t| Thresholds { t1_cosine: *t, ..base }).collect(),
        DetectorMode::Overlap => grid.iter().map(|t| Thresholds { t2_overlap: *t, ..base }).collect(),
        DetectorMode::Keyword => grid.iter().map(|t| Thresholds { t3_keyword: *t, ..base }).collect(),
        DetectorMode::Hybrid => grid
            .iter()
            .flat_map(|t1| {
                grid.iter().map(move |t2| Thresholds {
                    t1_cosine: *t1,
                    t2_overlap: *t2,
                    ..base
                })
            })
            .collect(),
    }
}

fn predict(mode: DetectorMode, input: &TuningInput, th: &Thresholds) -> Vec<ExampleLabel> {
    match input {
        TuningInput::Similarity(scores) => scores.iter().map(|s| decide(s, mode, th).example_label).collect(),
        TuningInput::Keyword(ratios) => ratios
            .iter()
            .map(|r| {
                if *r > th.t3_keyword {
                    ExampleLabel::Hallucinated
                } else {
                    ExampleLabel::NotHallucinated
                }
            })
            .collect(),
    }
}

/// Exhaustive grid search over precomputed scores, maximizing macro F1.
///
/// Ties go to the lowest threshold, compared lexicographically as
/// `(t1, t2)` for the hybrid detector.
pub fn tune_from_scores(
    mode: DetectorMode,
    input: &TuningInput,
    gold: &[ExampleLabel],
    grid: &[f64],
) -> Result<TuningResult> {
    let keyword_input = matches!(input, TuningInput::Keyword(_));
    if keyword_input != (mode == DetectorMode::Keyword) {
        return Err(Error::EmptyInput("tuning input does not match the detector mode"));
    }
    if input.len() != gold.len() {
        return Err(Error::LengthMismatch {
            left: input.len(),
            right: gold.len(),
        });
    }
    if gold.is_empty() {
        return Err(Error::EmptyInput("development set"));
    }
    let grid = clean_grid(grid)?;
    let surface = candidates(mode, &grid)
        .into_par_iter()
        .map(|th| {
            let report = classification_report(&predict(mode, input, &th), gold)?;
            Ok(GridPoint {
                thresholds: th,
                macro_f1: report.macro_f1,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let best = surface
        .iter()
        .fold(None::<&GridPoint>, |best, p| match best {
            Some(b) if p.macro_f1 <= b.macro_f1 => Some(b),
            _ => Some(p),
        })
        .copied()
        .expect("grid is nonempty");
    Ok(TuningResult {
        mode,
        thresholds: best.thresholds,
        macro_f1: best.macro_f1,
        surface,
    })
}

/// Tunes a detector's thresholds on labelled development triples.
///
/// Similarity modes score each triple once and sweep the grid over the
/// cached maxima; the keyword mode needs `keywords` keyed by triple id.
pub fn tune_thresholds(
    mode: DetectorMode,
    dev: &[QaTriple],
    grid: &[f64],
    embedder: Option<&Embedder>,
    keywords: Option<&BTreeMap<String, Vec<String>>>,
) -> Result<TuningResult> {
    if dev.is_empty() {
        return Err(Error::EmptyInput("development set"));
    }
    let gold = dev.iter().map(QaTriple::gold_label).collect::<Result<Vec<_>>>()?;
    let input = if mode == DetectorMode::Keyword {
        let keywords = keywords.ok_or(Error::EmptyInput("keyword mode needs extracted keywords"))?;
        let ratios = dev
            .par_iter()
            .map(|t| {
                let kws = keywords
                    .get(&t.id)
                    .ok_or_else(|| Error::MissingKeywords(t.id.clone()))?;
                Ok(keyword_evidence_lenient(t, kws)?.ratio)
            })
            .collect::<Result<Vec<_>>>()?;
        TuningInput::Keyword(ratios)
    } else {
        TuningInput::Similarity(score_batch(dev, mode, embedder, PhraseBound::Min)?)
    };
    tune_from_scores(mode, &input, &gold, grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detectors::SentenceEvidence;
    use ExampleLabel::{Hallucinated as H, NotHallucinated as N};

    fn overlap_scores(values: &[f64]) -> TuningInput {
        TuningInput::Similarity(
            values
                .iter()
                .enumerate()
                .map(|(i, v)| TripleScores {
                    triple_id: i.to_string(),
                    sentences: vec![SentenceEvidence {
                        best_overlap: Some((0, *v)),
                        ..SentenceEvidence::default()
                    }],
                })
                .collect(),
        )
    }

    #[test]
    fn single_point_grid() {
        let r = tune_from_scores(DetectorMode::Overlap, &overlap_scores(&[0.2, 0.9]), &[H, N], &[0.5]).unwrap();
        assert_eq!(r.thresholds.t2_overlap, 0.5);
        assert_eq!(r.surface.len(), 1);
        assert_eq!(r.macro_f1, 1.0);
    }

    #[test]
    fn flat_surface_picks_lowest() {
        let grid = [0.3, 0.1, 0.2];
        let r = tune_from_scores(
            DetectorMode::Keyword,
            &TuningInput::Keyword(vec![1.0, 1.0]),
            &[H, N],
            &grid,
        )
        .unwrap();
        assert_eq!(r.thresholds.t3_keyword, 0.1);
        assert!(r.surface.iter().all(|p| p.macro_f1 == r.macro_f1));
        assert_eq!(
            r.surface.iter().map(|p| p.thresholds.t3_keyword).collect::<Vec<_>>(),
            vec![0.1, 0.2, 0.3]
        );
    }

    #[test]
    fn finds_separating_threshold() {
        let grid: Vec<f64> = (1..10).map(|i| f64::from(i) / 10.0).collect();
        let input = overlap_scores(&[0.05, 0.25, 0.45, 0.55, 0.85]);
        let r = tune_from_scores(DetectorMode::Overlap, &input, &[H, H, H, N, N], &grid).unwrap();
        assert_eq!(r.thresholds.t2_overlap, 0.5);
        assert_eq!(r.macro_f1, 1.0);
        assert!(r.surface.iter().all(|p| p.macro_f1 <= r.macro_f1));
    }

    #[test]
    fn hybrid_surface_is_two_dimensional() {
        let grid: Vec<f64> = (1..10).map(|i| f64::from(i) / 10.0).collect();
        let input = TuningInput::Similarity(vec![TripleScores {
            triple_id: "t".into(),
            sentences: vec![SentenceEvidence {
                best_cosine: Some((0, 0.5)),
                best_overlap: Some((0, 0.5)),
                supported_by: None,
            }],
        }]);
        let r = tune_from_scores(DetectorMode::Hybrid, &input, &[N], &grid).unwrap();
        assert_eq!(r.surface.len(), 81);
        assert_eq!((r.thresholds.t1_cosine, r.thresholds.t2_overlap), (0.1, 0.1));
    }

    #[test]
    fn errors() {
        let input = overlap_scores(&[0.2]);
        assert!(tune_from_scores(DetectorMode::Overlap, &input, &[H], &[]).is_err());
        assert!(tune_from_scores(DetectorMode::Overlap, &input, &[H], &[1.5]).is_err());
        assert!(tune_from_scores(DetectorMode::Overlap, &input, &[H, N], &[0.5]).is_err());
        assert!(tune_from_scores(DetectorMode::Keyword, &input, &[H], &[0.5]).is_err());
        assert!(tune_thresholds(DetectorMode::Overlap, &[], &[0.5], None, None).is_err());
    }
}
