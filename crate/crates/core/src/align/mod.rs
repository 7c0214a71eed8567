//! Post-processing: identifier matching, ranking, quality control and record assembly.

mod assemble;
mod matching;
mod qc;
mod text;

pub use assemble::{assemble, Assembly, Unmatched, UnmatchedReason};
pub use matching::{
    cascade_match, composite_score, rank_candidates, CascadeHit, MatchOutcome,
};
pub use qc::{default_range, quality_control, RejectReason, Rejected};
pub use text::{
    fold_id, format_class, levenshtein, normalize_id, similarity, text_distance, FormatClass,
};

use std::collections::BTreeMap;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::Attribute;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AlignError {
    #[error("similarity of two empty strings is undefined")]
    BothEmpty,
    #[error("no candidates to rank")]
    EmptyCandidates,
    #[error("invalid match configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct Weights {
    pub w_sim: f64,
    pub w_prox: f64,
    pub w_name: f64,
}

impl Default for Weights {
    fn default() -> Self {
        Self {
            w_sim: 0.6,
            w_prox: 0.2,
            w_name: 0.2,
        }
    }
}

/// Plausibility bounds for one activity. `min_exclusive` makes the lower bound strict.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct RangeRule {
    pub min: f64,
    pub max: f64,
    #[serde(default)]
    pub min_exclusive: bool,
}

impl RangeRule {
    pub fn contains(&self, v: f64) -> bool {
        let above = if self.min_exclusive {
            v > self.min
        } else {
            v >= self.min
        };
        above && v <= self.max
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, JsonSchema)]
pub enum RangePolicy {
    #[default]
    Flag,
    Drop,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default)]
pub struct MatchConfig {
    pub delta: f64,
    pub weights: Weights,
    pub proximity_half_life_pages: f64,
    /// Per-attribute bounds; attributes not listed fall back to [`default_range`] by unit.
    pub activity_ranges: BTreeMap<Attribute, RangeRule>,
    pub on_range_violation: RangePolicy,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self {
            delta: 0.8,
            weights: Weights::default(),
            proximity_half_life_pages: 10.0,
            activity_ranges: BTreeMap::new(),
            on_range_violation: RangePolicy::Flag,
        }
    }
}

impl MatchConfig {
    pub fn validate(&self) -> Result<(), AlignError> {
        let bad = |m: &str| Err(AlignError::InvalidConfig(m.to_string()));
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return bad("delta must lie in (0, 1]");
        }
        let w = self.weights;
        if [w.w_sim, w.w_prox, w.w_name].iter().any(|x| !(*x >= 0.0)) {
            return bad("weights must be nonnegative");
        }
        if ((w.w_sim + w.w_prox + w.w_name) - 1.0).abs() > 1e-9 {
            return bad("weights must sum to 1");
        }
        if !(self.proximity_half_life_pages > 0.0) {
            return bad("proximity half-life must be positive");
        }
        Ok(())
    }
}
