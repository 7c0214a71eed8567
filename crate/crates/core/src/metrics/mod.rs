//! Evaluation: table recall, identifier recall, table-structure similarity and
//! corpus aggregation.

mod report;
mod ted;

pub use report::{aggregate, evaluate_document, DocEval, DocRecall, EvalReport, SplitScore};
pub use ted::{
    rename_cost_fraction, table_to_tree, teds, teds_trees, tree_edit_distance, EditCost,
    TableNode, Tree,
};

use std::collections::{BTreeMap, HashMap};

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::align::normalize_id;
use crate::domain::{ActivityValue, GroundTruthRow, SarRecord};
use crate::smiles::{canonical_key, parse_smiles};

/// Relative tolerance when comparing activity values.
pub const VALUE_REL_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("ground truth is empty")]
    EmptyTruth,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct RecallCount {
    pub hit: usize,
    pub total: usize,
    pub rate: f64,
}

/// Every truth activity is matched by a distinct predicted activity.
fn covers(pred: &[ActivityValue], truth: &[ActivityValue]) -> bool {
    let mut used = vec![false; pred.len()];
    truth.iter().all(|t| {
        match pred
            .iter()
            .enumerate()
            .find(|(i, p)| !used[*i] && p.same_measurement(t, VALUE_REL_TOL))
        {
            Some((i, _)) => {
                used[i] = true;
                true
            }
            None => false,
        }
    })
}

/// Fraction of truth rows whose structure and complete activity set were extracted.
pub fn table_recall(predicted: &[SarRecord], truth: &[GroundTruthRow]) -> Result<RecallCount, MetricsError> {
    if truth.is_empty() {
        return Err(MetricsError::EmptyTruth);
    }
    let mut by_key: HashMap<String, Vec<&SarRecord>> = HashMap::new();
    for p in predicted {
        if let Ok(g) = parse_smiles(&p.smiles) {
            by_key.entry(canonical_key(&g)).or_default().push(p);
        }
    }
    let hit = truth
        .iter()
        .filter(|t| {
            let Ok(g) = parse_smiles(&t.smiles) else {
                return false;
            };
            by_key
                .get(&canonical_key(&g))
                .is_some_and(|ps| ps.iter().any(|p| covers(&p.activities, &t.activities)))
        })
        .count();
    Ok(RecallCount {
        hit,
        total: truth.len(),
        rate: hit as f64 / truth.len() as f64,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, JsonSchema)]
pub enum Difficulty {
    Simple,
    Hard,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct CorefTruth {
    pub id: String,
    pub difficulty: Difficulty,
}

/// Identifier recall per region; a hit needs equal normalized identifiers.
pub fn coref_recall(
    predicted: &BTreeMap<String, Option<String>>,
    truth: &BTreeMap<String, CorefTruth>,
) -> Result<SplitScore, MetricsError> {
    if truth.is_empty() {
        return Err(MetricsError::EmptyTruth);
    }
    Ok(SplitScore::from_counts(&coref_counts(predicted, truth)))
}

/// `(hits, total)` per difficulty.
pub(crate) fn coref_counts(
    predicted: &BTreeMap<String, Option<String>>,
    truth: &BTreeMap<String, CorefTruth>,
) -> BTreeMap<Difficulty, (usize, usize)> {
    let mut counts: BTreeMap<Difficulty, (usize, usize)> = BTreeMap::new();
    for (region, t) in truth {
        let hit = predicted
            .get(region)
            .and_then(|p| p.as_deref())
            .is_some_and(|p| normalize_id(p) == normalize_id(&t.id));
        let e = counts.entry(t.difficulty).or_default();
        e.0 += usize::from(hit);
        e.1 += 1;
    }
    counts
}
