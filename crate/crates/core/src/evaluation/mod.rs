//! Classification metrics, annotator agreement and threshold tuning.

mod table;
mod tuning;

pub use table::{render_table, TableRow};
pub use tuning::{tune_from_scores, tune_thresholds, GridPoint, TuningInput, TuningResult};

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::corpus::{ExampleLabel, SentenceVerdict};
use crate::error::{Error, Result};

/// Precision, recall and F1 for one class, each in `[0, 1]`.
///
/// A zero denominator yields 0 and sets `degenerate`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Gold occurrences of the class.
    pub support: usize,
    pub degenerate: bool,
}

fn ratio(num: usize, den: usize) -> (f64, bool) {
    if den == 0 {
        (0.0, true)
    } else {
        (num as f64 / den as f64, false)
    }
}

fn class_metrics(tp: usize, predicted: usize, support: usize) -> ClassMetrics {
    let (precision, dp) = ratio(tp, predicted);
    let (recall, dr) = ratio(tp, support);
    let (f1, df) = if precision + recall > 0.0 {
        (2.0 * precision * recall / (precision + recall), false)
    } else {
        (0.0, true)
    };
    ClassMetrics {
        precision,
        recall,
        f1,
        support,
        degenerate: dp || dr || df,
    }
}

/// Binary hallucination-detection report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_class: BTreeMap<ExampleLabel, ClassMetrics>,
    pub macro_f1: f64,
    /// `confusion[gold][predicted]`, indexed in [`ExampleLabel::ALL`] order.
    pub confusion: [[usize; 2]; 2],
    pub n: usize,
}

impl EvalReport {
    pub fn f1(&self, label: ExampleLabel) -> f64 {
        self.per_class[&label].f1
    }

    /// Classes whose metrics hit a zero denominator.
    pub fn degenerate_classes(&self) -> Vec<ExampleLabel> {
        self.per_class
            .iter()
            .filter(|(_, m)| m.degenerate)
            .map(|(l, _)| *l)
            .collect()
    }
}

fn label_index(l: ExampleLabel) -> usize {
    match l {
        ExampleLabel::Hallucinated => 0,
        ExampleLabel::NotHallucinated => 1,
    }
}

fn check_lengths(left: usize, right: usize) -> Result<()> {
    if left != right {
        return Err(Error::LengthMismatch { left, right });
    }
    if left == 0 {
        return Err(Error::EmptyInput("label lists"));
    }
    Ok(())
}

/// Per-class precision/recall/F1 and their unweighted mean.
pub fn classification_report(predictions: &[ExampleLabel], gold: &[ExampleLabel]) -> Result<EvalReport> {
    check_lengths(predictions.len(), gold.len())?;
    let mut confusion = [[0usize; 2]; 2];
    for (p, g) in predictions.iter().zip(gold) {
        confusion[label_index(*g)][label_index(*p)] += 1;
    }
    let per_class: BTreeMap<ExampleLabel, ClassMetrics> = ExampleLabel::ALL
        .iter()
        .map(|l| {
            let i = label_index(*l);
            let tp = confusion[i][i];
            let predicted = confusion[0][i] + confusion[1][i];
            let support = confusion[i][0] + confusion[i][1];
            (*l, class_metrics(tp, predicted, support))
        })
        .collect();
    let macro_f1 = per_class.values().map(|m| m.f1).sum::<f64>() / 2.0;
    Ok(EvalReport {
        per_class,
        macro_f1,
        confusion,
        n: gold.len(),
    })
}

/// Sentence-label agreement of a candidate labelling against a reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub per_label: BTreeMap<SentenceVerdict, ClassMetrics>,
    /// Labels that occur in neither list; their metrics are undefined.
    pub omitted: Vec<SentenceVerdict>,
    pub n: usize,
}

/// Per-label precision/recall/F1 with `reference` as ground truth.
pub fn agreement_report(reference: &[SentenceVerdict], candidate: &[SentenceVerdict]) -> Result<AgreementReport> {
    check_lengths(reference.len(), candidate.len())?;
    let present: BTreeSet<SentenceVerdict> = reference.iter().chain(candidate).copied().collect();
    let mut per_label = BTreeMap::new();
    let mut omitted = Vec::new();
    for label in SentenceVerdict::ALL {
        if !present.contains(&label) {
            omitted.push(label);
            continue;
        }
        let tp = reference
            .iter()
            .zip(candidate)
            .filter(|(r, c)| **r == label && **c == label)
            .count();
        let predicted = candidate.iter().filter(|c| **c == label).count();
        let support = reference.iter().filter(|r| **r == label).count();
        per_label.insert(label, class_metrics(tp, predicted, support));
    }
    Ok(AgreementReport {
        per_label,
        omitted,
        n: reference.len(),
    })
}

/// Krippendorff's alpha for nominal data.
///
/// `annotations[a][i]` is annotator `a`'s label for item `i`, `None` when
/// missing. Items with fewer than two ratings are not pairable and are
/// ignored. Errors when fewer than two items are pairable, or when the
/// pairable ratings use a single label (expected disagreement is zero).
pub fn krippendorff_alpha<T: Ord + Clone>(annotations: &[Vec<Option<T>>]) -> Result<f64> {
    let items = annotations.iter().map(Vec::len).max().unwrap_or(0);
    if annotations.iter().any(|row| row.len() != items) {
        return Err(Error::EmptyInput("annotation rows differ in length"));
    }
    // Coincidence matrix: each ordered pair of ratings within an item adds
    // 1 / (m - 1), m being the item's rating count.
    let mut coincidence: BTreeMap<(T, T), f64> = BTreeMap::new();
    let mut pairable = 0;
    for i in 0..items {
        let values: Vec<&T> = annotations.iter().filter_map(|row| row[i].as_ref()).collect();
        let m = values.len();
        if m < 2 {
            continue;
        }
        pairable += 1;
        let w = 1.0 / (m - 1) as f64;
        for (x, a) in values.iter().enumerate() {
            for (y, b) in values.iter().enumerate() {
                if x != y {
                    *coincidence.entry(((*a).clone(), (*b).clone())).or_default() += w;
                }
            }
        }
    }
    if pairable < 2 {
        return Err(Error::Undefined(
            "alpha needs at least two items with two or more ratings",
        ));
    }
    let mut marginals: BTreeMap<&T, f64> = BTreeMap::new();
    let mut observed = 0.0;
    for ((a, b), o) in &coincidence {
        *marginals.entry(a).or_default() += o;
        if a != b {
            observed += o;
        }
    }
    let n: f64 = marginals.values().sum();
    let sum_sq: f64 = marginals.values().map(|m| m * m).sum();
    let expected = n * n - sum_sq;
    if expected <= 0.0 {
        return Err(Error::Undefined("alpha is undefined when only one label value occurs"));
    }
    Ok(1.0 - (n - 1.0) * observed / expected)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use ExampleLabel::{Hallucinated as H, NotHallucinated as N};

    #[test]
    fn perfect_predictions() {
        let gold = [H, N, N, H, N];
        let r = classification_report(&gold, &gold).unwrap();
        assert_eq!(r.f1(H), 1.0);
        assert_eq!(r.f1(N), 1.0);
        assert_eq!(r.macro_f1, 1.0);
        assert!(r.degenerate_classes().is_empty());
    }

    #[test]
    fn all_one_class_predictions_by_counting() {
        let gold = [H, H, H, N, N, N, N, N, N, N];
        let pred = [H; 10];
        let r = classification_report(&pred, &gold).unwrap();
        assert_eq!(r.confusion, [[3, 0], [7, 0]]);
        let h = r.per_class[&H];
        assert_eq!(h.precision, 0.3);
        assert_eq!(h.recall, 1.0);
        assert!((h.f1 - 2.0 * 0.3 / 1.3).abs() < 1e-15);
        let n = r.per_class[&N];
        assert_eq!(n.f1, 0.0);
        assert!(n.degenerate);
        assert_eq!(r.degenerate_classes(), vec![N]);
        assert!((r.macro_f1 - h.f1 / 2.0).abs() < 1e-15);
    }

    #[test]
    fn class_absent_from_gold_is_degenerate() {
        let r = classification_report(&[N, N], &[N, N]).unwrap();
        assert_eq!(r.f1(H), 0.0);
        assert!(r.per_class[&H].degenerate);
        assert_eq!(r.macro_f1, 0.5);
    }

    #[test]
    fn report_errors() {
        assert!(matches!(
            classification_report(&[H], &[H, N]),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(matches!(classification_report(&[], &[]), Err(Error::EmptyInput(_))));
    }

    proptest! {
        #[test]
        fn report_invariants(pairs in proptest::collection::vec((any::<bool>(), any::<bool>()), 1..60), seed in any::<u64>()) {
            let lab = |b: bool| if b { H } else { N };
            let pred: Vec<_> = pairs.iter().map(|p| lab(p.0)).collect();
            let gold: Vec<_> = pairs.iter().map(|p| lab(p.1)).collect();
            let r = classification_report(&pred, &gold).unwrap();
            prop_assert_eq!(r.confusion.iter().flatten().sum::<usize>(), r.n);
            let (a, b) = (r.f1(H), r.f1(N));
            prop_assert!(r.macro_f1 >= a.min(b) - 1e-15 && r.macro_f1 <= a.max(b) + 1e-15);
            prop_assert_eq!(r.macro_f1, (a + b) / 2.0);

            // Simultaneous permutation leaves the report unchanged.
            let mut idx: Vec<usize> = (0..pairs.len()).collect();
            let len = idx.len();
            let mut s = seed;
            for i in (1..len).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                idx.swap(i, (s >> 33) as usize % (i + 1));
            }
            let pp: Vec<_> = idx.iter().map(|i| pred[*i]).collect();
            let gp: Vec<_> = idx.iter().map(|i| gold[*i]).collect();
            prop_assert_eq!(classification_report(&pp, &gp).unwrap(), r);
        }
    }

    #[test]
    fn agreement_identical_lists() {
        use SentenceVerdict::*;
        let l = [Supported, Neither, Supported];
        let r = agreement_report(&l, &l).unwrap();
        assert_eq!(r.omitted, vec![Conflicted]);
        assert!(r
            .per_label
            .values()
            .all(|m| m.precision == 1.0 && m.recall == 1.0 && m.f1 == 1.0));
    }

    #[test]
    fn agreement_one_neither_mislabeled() {
        use SentenceVerdict::*;
        let reference = [Neither; 10];
        let mut candidate = reference;
        candidate[4] = Supported;
        let r = agreement_report(&reference, &candidate).unwrap();
        let n = r.per_label[&Neither];
        assert_eq!(n.recall, 9.0 / 10.0);
        assert_eq!(n.precision, 1.0);
        let s = r.per_label[&Supported];
        assert_eq!((s.precision, s.recall, s.support), (0.0, 0.0, 0));
        assert!(s.degenerate);
        assert_eq!(r.omitted, vec![Conflicted]);
    }

    #[test]
    fn alpha_perfect_agreement() {
        let m = vec![
            vec![Some("a"), Some("b"), Some("a")],
            vec![Some("a"), Some("b"), Some("a")],
        ];
        assert_eq!(krippendorff_alpha(&m).unwrap(), 1.0);
    }

    #[test]
    fn alpha_worked_example() {
        // Coincidence-matrix value 3/7 computed by hand with exact fractions.
        let a = |s: &'static str| Some(s);
        let m = vec![
            vec![a("a"), a("a"), a("b"), a("b")],
            vec![a("a"), a("b"), a("b"), None],
            vec![a("a"), a("a"), a("b"), a("c")],
        ];
        assert!((krippendorff_alpha(&m).unwrap() - 3.0 / 7.0).abs() < 1e-9);
    }

    #[test]
    fn alpha_chance_level() {
        let mut s: u64 = 42;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            Some((s >> 40) % 2)
        };
        let m: Vec<Vec<Option<u64>>> = (0..3).map(|_| (0..4000).map(|_| next()).collect()).collect();
        assert!(krippendorff_alpha(&m).unwrap().abs() < 0.05);
    }

    #[test]
    fn alpha_errors() {
        let one_item = vec![vec![Some(1), None], vec![Some(1), Some(2)]];
        assert!(krippendorff_alpha(&one_item).is_err());
        let single_value = vec![vec![Some(1), Some(1)], vec![Some(1), Some(1)]];
        assert!(krippendorff_alpha(&single_value).is_err());
    }
}
