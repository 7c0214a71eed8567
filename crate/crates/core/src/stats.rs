//! Corpus composition and molecular-size statistics.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{DocType, DocumentBundle, GroundTruthRow};
use crate::smiles::{heavy_atom_count, parse_smiles};

pub const DEFAULT_BIN_WIDTH: u32 = 5;
pub const KDE_SAMPLES: usize = 200;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StatsError {
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("bin width must be positive")]
    InvalidBinWidth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct DocCounts {
    pub patents: usize,
    pub literature: usize,
    pub by_language: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct TableCounts {
    pub total: usize,
    pub relevant: usize,
    pub irrelevant_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct HistogramBin {
    /// Inclusive lower edge.
    pub lo: u32,
    /// Exclusive upper edge.
    pub hi: u32,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct AtomCountSummary {
    pub n: usize,
    pub mean: f64,
    pub median: f64,
    pub min: usize,
    pub max: usize,
    pub right_skew: bool,
    pub bin_width: u32,
    pub histogram: Vec<HistogramBin>,
    pub bandwidth: f64,
    /// `(x, density)` pairs on an even grid.
    pub kde: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct StatsReport {
    pub doc_counts: DocCounts,
    pub table_counts: TableCounts,
    pub atom_count_summary: Option<AtomCountSummary>,
}

/// Sample quantile with linear interpolation between order statistics
/// (R's default, type 7). `sorted` must be nonempty and ascending.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Silverman's rule of thumb `0.9 * min(sd, IQR/1.34) * n^(-1/5)`, falling back
/// to the standard deviation, then `|x0|`, then 1 when the spread is zero.
pub fn silverman_bandwidth(sorted: &[f64]) -> f64 {
    let n = sorted.len() as f64;
    let mean = sorted.iter().sum::<f64>() / n;
    let sd = if sorted.len() > 1 {
        (sorted.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let iqr = quantile(sorted, 0.75) - quantile(sorted, 0.25);
    let mut lo = sd.min(iqr / 1.34);
    if lo <= 0.0 {
        lo = [sd, sorted[0].abs(), 1.0].into_iter().find(|v| *v > 0.0).unwrap_or(1.0);
    }
    0.9 * lo * n.powf(-0.2)
}

/// Gaussian kernel density sampled at `samples` evenly spaced points spanning
/// three bandwidths beyond the data range.
pub fn gaussian_kde(data: &[f64], bandwidth: f64, samples: usize) -> Vec<(f64, f64)> {
    let lo = data.iter().copied().fold(f64::INFINITY, f64::min) - 3.0 * bandwidth;
    let hi = data.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 3.0 * bandwidth;
    let norm = 1.0 / (data.len() as f64 * bandwidth * (2.0 * PI).sqrt());
    (0..samples)
        .map(|i| {
            let x = if samples == 1 {
                (lo + hi) / 2.0
            } else {
                lo + (hi - lo) * i as f64 / (samples - 1) as f64
            };
            let d = data
                .iter()
                .map(|v| (-0.5 * ((x - v) / bandwidth).powi(2)).exp())
                .sum::<f64>();
            (x, d * norm)
        })
        .collect()
}

pub fn histogram(counts: &[usize], bin_width: u32) -> Vec<HistogramBin> {
    let (Some(&min), Some(&max)) = (counts.iter().min(), counts.iter().max()) else {
        return Vec::new();
    };
    let w = bin_width as usize;
    let first = min / w;
    let last = max / w;
    let mut bins: Vec<HistogramBin> = (first..=last)
        .map(|b| HistogramBin {
            lo: (b * w) as u32,
            hi: ((b + 1) * w) as u32,
            count: 0,
        })
        .collect();
    for &c in counts {
        bins[c / w - first].count += 1;
    }
    bins
}

pub fn summarize_atom_counts(counts: &[usize], bin_width: u32) -> Result<AtomCountSummary, StatsError> {
    if bin_width == 0 {
        return Err(StatsError::InvalidBinWidth);
    }
    if counts.is_empty() {
        return Err(StatsError::EmptyCorpus);
    }
    let mut sorted: Vec<usize> = counts.to_vec();
    sorted.sort_unstable();
    let n = sorted.len();
    let total: usize = sorted.iter().sum();
    let mean = total as f64 / n as f64;
    let median = if n % 2 == 1 {
        sorted[n / 2] as f64
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) as f64 / 2.0
    };
    let xs: Vec<f64> = sorted.iter().map(|&c| c as f64).collect();
    let bandwidth = silverman_bandwidth(&xs);
    Ok(AtomCountSummary {
        n,
        mean,
        median,
        min: sorted[0],
        max: sorted[n - 1],
        right_skew: mean > median,
        bin_width,
        histogram: histogram(&sorted, bin_width),
        bandwidth,
        kde: gaussian_kde(&xs, bandwidth, KDE_SAMPLES),
    })
}

/// Composition of the corpus plus the heavy-atom distribution of the annotated
/// molecules. Truth rows with unparseable SMILES are skipped.
pub fn compute_stats(
    truth: &[GroundTruthRow],
    bundles: &[DocumentBundle],
    bin_width: u32,
) -> Result<StatsReport, StatsError> {
    if bin_width == 0 {
        return Err(StatsError::InvalidBinWidth);
    }
    if bundles.is_empty() && truth.is_empty() {
        return Err(StatsError::EmptyCorpus);
    }
    let mut by_language = BTreeMap::new();
    for b in bundles {
        for l in &b.language_tags {
            *by_language.entry(l.clone()).or_insert(0) += 1;
        }
    }
    let doc_counts = DocCounts {
        patents: bundles.iter().filter(|b| b.doc_type == DocType::Patent).count(),
        literature: bundles.iter().filter(|b| b.doc_type == DocType::Literature).count(),
        by_language,
    };
    let total = bundles.iter().map(|b| b.tables().count()).sum::<usize>();
    let relevant = bundles
        .iter()
        .flat_map(|b| b.tables())
        .filter(|r| r.activity == Some(true))
        .count();
    let table_counts = TableCounts {
        total,
        relevant,
        irrelevant_fraction: if total == 0 {
            0.0
        } else {
            (total - relevant) as f64 / total as f64
        },
    };
    let atoms: Vec<usize> = truth
        .iter()
        .filter_map(|t| parse_smiles(&t.smiles).ok())
        .map(|g| heavy_atom_count(&g))
        .collect();
    let atom_count_summary = if atoms.is_empty() {
        None
    } else {
        Some(summarize_atom_counts(&atoms, bin_width)?)
    };
    Ok(StatsReport {
        doc_counts,
        table_counts,
        atom_count_summary,
    })
}

impl StatsReport {
    pub fn render_text(&self) -> String {
        let mut s = String::new();
        let d = &self.doc_counts;
        let _ = writeln!(s, "documents: {} patents, {} literature", d.patents, d.literature);
        for (l, n) in &d.by_language {
            let _ = writeln!(s, "  language {l}: {n}");
        }
        let t = &self.table_counts;
        let _ = writeln!(
            s,
            "tables: {} total, {} relevant, {:.2}% irrelevant",
            t.total,
            t.relevant,
            t.irrelevant_fraction * 100.0
        );
        if let Some(a) = &self.atom_count_summary {
            let _ = writeln!(
                s,
                "heavy atoms: n={} mean={:.2} median={} min={} max={} bandwidth={:.3}",
                a.n, a.mean, a.median, a.min, a.max, a.bandwidth
            );
            if a.right_skew {
                let _ = writeln!(s, "  right-skewed: mean exceeds median");
            }
            for b in &a.histogram {
                let _ = writeln!(s, "  [{:>3}, {:>3}) {}", b.lo, b.hi, b.count);
            }
        }
        s
    }
}
