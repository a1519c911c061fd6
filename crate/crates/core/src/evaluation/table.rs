use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::EvalReport;
use crate::corpus::{ExampleLabel, Split};

/// One detector's reports, per split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub name: String,
    pub per_split: BTreeMap<Split, EvalReport>,
}

/// Plain-text table of class-wise F1 (Hal, N-Hal) and macro F1 in percent,
/// one column group per split that appears in any row.
pub fn render_table(rows: &[TableRow]) -> String {
    let splits: BTreeSet<Split> = rows.iter().flat_map(|r| r.per_split.keys().copied()).collect();
    let name_w = rows
        .iter()
        .map(|r| r.name.len())
        .max()
        .unwrap_or(0)
        .max("Detector".len());
    let group_w = 23;

    let mut out = String::new();
    let _ = write!(out, "{:<name_w$}", "Detector");
    for s in &splits {
        let _ = write!(out, " | {:^group_w$}", s.to_string());
    }
    out.push('\n');
    let _ = write!(out, "{:<name_w$}", "");
    for _ in &splits {
        let _ = write!(out, " | {:>7}{:>7}{:>9}", "Hal", "N-Hal", "Overall");
    }
    out.push('\n');
    out.push_str(&"-".repeat(name_w + splits.len() * (group_w + 3)));
    out.push('\n');
    for row in rows {
        let _ = write!(out, "{:<name_w$}", row.name);
        for s in &splits {
            match row.per_split.get(s) {
                Some(r) => {
                    let _ = write!(
                        out,
                        " | {:>7.2}{:>7.2}{:>9.2}",
                        100.0 * r.f1(ExampleLabel::Hallucinated),
                        100.0 * r.f1(ExampleLabel::NotHallucinated),
                        100.0 * r.macro_f1
                    );
                }
                None => {
                    let _ = write!(out, " | {:>7}{:>7}{:>9}", "-", "-", "-");
                }
            }
        }
        out.push('\n');
    }
    out
}
