use std::collections::BTreeMap;
use std::fmt::Write as _;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use super::{coref_counts, table_recall, teds, CorefTruth, Difficulty, MetricsError};
use crate::domain::{DocType, GroundTruthRow, SarRecord};

/// A rate overall and split by difficulty; a split is absent when no item of
/// that difficulty was evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct SplitScore {
    pub overall: f64,
    pub simple: Option<f64>,
    pub hard: Option<f64>,
}

impl SplitScore {
    /// From `(sum, count)` per difficulty; the rate of a split is `sum / count`.
    pub(crate) fn from_sums<T: Copy + Into<f64>>(sums: &BTreeMap<Difficulty, (T, usize)>) -> Self {
        let rate = |(s, n): (f64, usize)| s / n as f64;
        let total = sums
            .values()
            .fold((0.0, 0), |(s, n), &(x, c)| (s + x.into(), n + c));
        let split = |d| sums.get(&d).filter(|(_, n)| *n > 0).map(|&(s, n)| rate((s.into(), n)));
        Self {
            overall: if total.1 == 0 { 0.0 } else { rate(total) },
            simple: split(Difficulty::Simple),
            hard: split(Difficulty::Hard),
        }
    }

    pub(crate) fn from_counts(counts: &BTreeMap<Difficulty, (usize, usize)>) -> Self {
        let sums: BTreeMap<Difficulty, (f64, usize)> =
            counts.iter().map(|(d, &(h, n))| (*d, (h as f64, n))).collect();
        Self::from_sums(&sums)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct DocRecall {
    pub doc_type: DocType,
    pub table_recall: f64,
    pub rows_total: usize,
    pub rows_hit: usize,
}

/// Per-document evaluation. The sub-task parts are present only when the
/// corresponding truth was supplied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct DocEval {
    pub doc_id: String,
    pub recall: DocRecall,
    #[serde(default)]
    pub coref: Option<BTreeMap<Difficulty, (usize, usize)>>,
    #[serde(default)]
    pub teds: Option<BTreeMap<Difficulty, (f64, usize)>>,
}

/// Evaluates one document. `tables` holds `(predicted html, truth html, difficulty)`.
pub fn evaluate_document(
    doc_id: &str,
    doc_type: DocType,
    predicted: &[SarRecord],
    truth: &[GroundTruthRow],
    coref: Option<(&BTreeMap<String, Option<String>>, &BTreeMap<String, CorefTruth>)>,
    tables: Option<&[(String, String, Difficulty)]>,
) -> Result<DocEval, MetricsError> {
    let r = table_recall(predicted, truth)?;
    let coref = match coref {
        Some((pred, truth)) if !truth.is_empty() => Some(coref_counts(pred, truth)),
        _ => None,
    };
    let teds = match tables {
        Some(tables) if !tables.is_empty() => {
            let mut sums: BTreeMap<Difficulty, (f64, usize)> = BTreeMap::new();
            for (pred, truth, d) in tables {
                // A prediction that does not parse scores zero against its truth.
                let s = teds(pred, truth).unwrap_or(0.0);
                let e = sums.entry(*d).or_default();
                e.0 += s;
                e.1 += 1;
            }
            Some(sums)
        }
        _ => None,
    };
    Ok(DocEval {
        doc_id: doc_id.to_string(),
        recall: DocRecall {
            doc_type,
            table_recall: r.rate,
            rows_total: r.total,
            rows_hit: r.hit,
        },
        coref,
        teds,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct EvalReport {
    pub per_doc: BTreeMap<String, DocRecall>,
    /// Micro-average: total rows hit over total truth rows.
    pub overall: f64,
    pub by_doc_type: BTreeMap<DocType, f64>,
    pub coref_recall: Option<SplitScore>,
    pub teds: Option<SplitScore>,
}

fn merge<T: Copy + std::ops::Add<Output = T>>(
    into: &mut BTreeMap<Difficulty, (T, usize)>,
    from: &BTreeMap<Difficulty, (T, usize)>,
) {
    for (d, &(s, n)) in from {
        into.entry(*d)
            .and_modify(|e| *e = (e.0 + s, e.1 + n))
            .or_insert((s, n));
    }
}

/// Folds per-document evaluations into a corpus report.
pub fn aggregate(docs: &[DocEval]) -> Result<EvalReport, MetricsError> {
    let hit: usize = docs.iter().map(|d| d.recall.rows_hit).sum();
    let total: usize = docs.iter().map(|d| d.recall.rows_total).sum();
    if total == 0 {
        return Err(MetricsError::EmptyTruth);
    }
    let mut by_type: BTreeMap<DocType, (usize, usize)> = BTreeMap::new();
    for d in docs {
        let e = by_type.entry(d.recall.doc_type).or_default();
        e.0 += d.recall.rows_hit;
        e.1 += d.recall.rows_total;
    }
    let mut coref: Option<BTreeMap<Difficulty, (usize, usize)>> = None;
    let mut teds: Option<BTreeMap<Difficulty, (f64, usize)>> = None;
    for d in docs {
        if let Some(c) = &d.coref {
            merge(coref.get_or_insert_with(BTreeMap::new), c);
        }
        if let Some(t) = &d.teds {
            merge(teds.get_or_insert_with(BTreeMap::new), t);
        }
    }
    Ok(EvalReport {
        per_doc: docs.iter().map(|d| (d.doc_id.clone(), d.recall.clone())).collect(),
        overall: hit as f64 / total as f64,
        by_doc_type: by_type
            .into_iter()
            .filter(|(_, (_, n))| *n > 0)
            .map(|(t, (h, n))| (t, h as f64 / n as f64))
            .collect(),
        coref_recall: coref.as_ref().map(SplitScore::from_counts),
        teds: teds.as_ref().map(SplitScore::from_sums),
    })
}

fn pct(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{:.1}", v * 100.0))
}

impl EvalReport {
    /// Recomputes the micro-average from the per-document counts.
    pub fn recomputed_overall(&self) -> f64 {
        let hit: usize = self.per_doc.values().map(|d| d.rows_hit).sum();
        let total: usize = self.per_doc.values().map(|d| d.rows_total).sum();
        hit as f64 / total as f64
    }

    /// Plain-text table for terminals.
    pub fn render_text(&self) -> String {
        let mut s = String::new();
        let w = self.per_doc.keys().map(|k| k.len()).max().unwrap_or(0).max(8);
        let _ = writeln!(s, "{:<w$}  {:<10}  {:>5}  {:>5}  {:>7}", "document", "type", "hit", "rows", "recall");
        for (id, d) in &self.per_doc {
            let _ = writeln!(
                s,
                "{:<w$}  {:<10}  {:>5}  {:>5}  {:>7}",
                id,
                d.doc_type.to_string(),
                d.rows_hit,
                d.rows_total,
                pct(Some(d.table_recall))
            );
        }
        let _ = writeln!(s);
        let _ = writeln!(s, "table recall (overall): {}", pct(Some(self.overall)));
        for (t, v) in &self.by_doc_type {
            let _ = writeln!(s, "table recall ({t}): {}", pct(Some(*v)));
        }
        if let Some(c) = &self.coref_recall {
            let _ = writeln!(
                s,
                "coref recall: overall {}  simple {}  hard {}",
                pct(Some(c.overall)),
                pct(c.simple),
                pct(c.hard)
            );
        }
        if let Some(t) = &self.teds {
            let _ = writeln!(
                s,
                "TEDS: overall {}  simple {}  hard {}",
                pct(Some(t.overall)),
                pct(t.simple),
                pct(t.hard)
            );
        }
        s
    }
}
