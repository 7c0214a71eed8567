use std::cmp::Ordering;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use super::text::{fold_id, format_class, normalize_id, similarity};
use super::{AlignError, MatchConfig};
use crate::domain::MatchTier;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct CascadeHit {
    pub index: usize,
    pub tier: MatchTier,
    pub similarity: f64,
}

/// Matches one identifier against row identifiers tier by tier. The first tier
/// with any hit wins and all of its hits are returned; an empty result means no match.
pub fn cascade_match<S: AsRef<str>>(mol_id: &str, row_ids: &[S], cfg: &MatchConfig) -> Vec<CascadeHit> {
    let exact = |tier| {
        move |(i, _): (usize, &S)| CascadeHit {
            index: i,
            tier,
            similarity: 1.0,
        }
    };
    let rows = || row_ids.iter().enumerate();

    let hits: Vec<CascadeHit> = rows()
        .filter(|(_, r)| r.as_ref() == mol_id)
        .map(exact(MatchTier::Exact))
        .collect();
    if !hits.is_empty() {
        return hits;
    }

    let lower = mol_id.to_lowercase();
    let hits: Vec<CascadeHit> = rows()
        .filter(|(_, r)| r.as_ref().to_lowercase() == lower)
        .map(exact(MatchTier::CaseInsensitive))
        .collect();
    if !hits.is_empty() {
        return hits;
    }

    let norm = normalize_id(mol_id);
    if !norm.is_empty() {
        let hits: Vec<CascadeHit> = rows()
            .filter(|(_, r)| normalize_id(r.as_ref()) == norm)
            .map(exact(MatchTier::Normalized))
            .collect();
        if !hits.is_empty() {
            return hits;
        }
    }

    let folded = fold_id(mol_id);
    rows()
        .filter_map(|(i, r)| {
            let s = similarity(&folded, &fold_id(r.as_ref())).ok()?;
            (s >= cfg.delta).then_some(CascadeHit {
                index: i,
                tier: MatchTier::Fuzzy,
                similarity: s,
            })
        })
        .collect()
}

/// One candidate link from a molecule to a table row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct MatchOutcome {
    pub molecule_region: String,
    pub molecule_page: usize,
    pub mol_coref: String,
    /// Index of the table among the document's parsed tables.
    pub table_index: usize,
    pub table_region: String,
    pub table_page: usize,
    pub row_index: usize,
    pub row_coref: String,
    pub tier: MatchTier,
    pub similarity: f64,
    pub composite_score: f64,
}

impl MatchOutcome {
    pub fn pages_apart(&self) -> usize {
        self.molecule_page.abs_diff(self.table_page)
    }
}

/// `w_sim * sim + w_prox * 2^(-pages/half_life) + w_name * [same format class]`.
pub fn composite_score(outcome: &MatchOutcome, cfg: &MatchConfig) -> f64 {
    let w = cfg.weights;
    let proximity = (-(outcome.pages_apart() as f64) / cfg.proximity_half_life_pages).exp2();
    let a = format_class(&outcome.mol_coref);
    let consistent = a.is_some() && a == format_class(&outcome.row_coref);
    w.w_sim * outcome.similarity + w.w_prox * proximity + w.w_name * f64::from(u8::from(consistent))
}

fn rank_order(a: &MatchOutcome, b: &MatchOutcome) -> Ordering {
    b.composite_score
        .total_cmp(&a.composite_score)
        .then(a.tier.cmp(&b.tier))
        .then(a.pages_apart().cmp(&b.pages_apart()))
        .then_with(|| a.row_coref.cmp(&b.row_coref))
        .then(a.table_index.cmp(&b.table_index))
        .then(a.row_index.cmp(&b.row_index))
}

/// Scores every outcome and returns the best one.
pub fn rank_candidates(outcomes: &[MatchOutcome], cfg: &MatchConfig) -> Result<MatchOutcome, AlignError> {
    outcomes
        .iter()
        .map(|o| MatchOutcome {
            composite_score: composite_score(o, cfg),
            ..o.clone()
        })
        .min_by(rank_order)
        .ok_or(AlignError::EmptyCandidates)
}
