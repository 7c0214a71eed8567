use std::collections::HashMap;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use super::{MatchConfig, RangePolicy, RangeRule};
use crate::domain::{ActivityValue, Qualifier, RecordFlag, SarRecord, Unit};
use crate::smiles::{canonical_key, parse_smiles};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum RejectReason {
    InvalidSmiles { error: String },
    RangeViolation { activity: usize },
    Duplicate { kept_region: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct Rejected {
    pub record: SarRecord,
    #[serde(flatten)]
    pub reason: RejectReason,
}

/// Bounds applied when no per-attribute rule is configured.
pub fn default_range(unit: Unit) -> Option<RangeRule> {
    match unit {
        Unit::Micromolar | Unit::Nanomolar => Some(RangeRule {
            min: 0.0,
            max: 1e9,
            min_exclusive: true,
        }),
        Unit::KcalPerMol => Some(RangeRule {
            min: -1e4,
            max: 1e4,
            min_exclusive: false,
        }),
        Unit::Percent => Some(RangeRule {
            min: 0.0,
            max: 100.0,
            min_exclusive: false,
        }),
        Unit::Unknown => None,
    }
}

fn in_range(a: &ActivityValue, cfg: &MatchConfig) -> bool {
    cfg.activity_ranges
        .get(&a.attribute)
        .copied()
        .or_else(|| default_range(a.unit))
        .is_none_or(|r| r.contains(a.value))
}

type DedupeKey = (String, Vec<(crate::domain::Attribute, Qualifier, u64, Unit)>);

fn dedupe_key(smiles_key: String, activities: &[ActivityValue]) -> DedupeKey {
    let mut acts: Vec<_> = activities
        .iter()
        .map(|a| (a.attribute, a.qualifier, a.value.to_bits(), a.unit))
        .collect();
    acts.sort_unstable();
    (smiles_key, acts)
}

/// SMILES validation, range checks and duplicate removal. Applying it to its own
/// kept output changes nothing.
pub fn quality_control(records: Vec<SarRecord>, cfg: &MatchConfig) -> (Vec<SarRecord>, Vec<Rejected>) {
    let mut rejected = Vec::new();
    let mut candidates: Vec<(SarRecord, DedupeKey)> = Vec::new();

    for mut record in records {
        let graph = match parse_smiles(&record.smiles) {
            Ok(g) => g,
            Err(e) => {
                rejected.push(Rejected {
                    record,
                    reason: RejectReason::InvalidSmiles { error: e.to_string() },
                });
                continue;
            }
        };
        let violations: Vec<usize> = record
            .activities
            .iter()
            .enumerate()
            .filter(|(_, a)| !in_range(a, cfg))
            .map(|(i, _)| i)
            .collect();
        record
            .flags
            .retain(|f| !matches!(f, RecordFlag::RangeViolation { .. }));
        if let Some(&first) = violations.first() {
            match cfg.on_range_violation {
                RangePolicy::Drop => {
                    rejected.push(Rejected {
                        record,
                        reason: RejectReason::RangeViolation { activity: first },
                    });
                    continue;
                }
                RangePolicy::Flag => record
                    .flags
                    .extend(violations.iter().map(|&activity| RecordFlag::RangeViolation { activity })),
            }
        }
        let key = dedupe_key(canonical_key(&graph), &record.activities);
        candidates.push((record, key));
    }

    let mut best: HashMap<&DedupeKey, usize> = HashMap::new();
    for (i, (record, key)) in candidates.iter().enumerate() {
        best.entry(key)
            .and_modify(|b| {
                if record.score > candidates[*b].0.score {
                    *b = i;
                }
            })
            .or_insert(i);
    }
    let winners: Vec<usize> = candidates.iter().map(|(_, key)| best[key]).collect();
    let mut kept = Vec::new();
    let mut dupes = Vec::new();
    for (i, (record, _)) in candidates.iter().enumerate() {
        if winners[i] == i {
            kept.push(record.clone());
        } else {
            dupes.push(Rejected {
                record: record.clone(),
                reason: RejectReason::Duplicate {
                    kept_region: candidates[winners[i]].0.molecule_region.region_id.clone(),
                },
            });
        }
    }
    rejected.extend(dupes);
    (kept, rejected)
}
