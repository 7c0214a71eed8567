use std::collections::BTreeSet;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use super::matching::{cascade_match, rank_candidates, MatchOutcome};
use super::qc::{quality_control, Rejected};
use super::MatchConfig;
use crate::domain::{MoleculeCandidate, RegionAnchor, SarRecord};
use crate::tableparse::ParsedActivityTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum UnmatchedReason {
    /// Structure recognition returned nothing.
    NoSmiles,
    /// No identifier was recognized next to the structure.
    NoCoref,
    /// No table row identifier matched at any tier.
    NoMatch,
    /// The winning row carries no parseable activity value.
    EmptyRow,
    /// A record was built and then removed by quality control.
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct Unmatched {
    pub region_id: String,
    pub page_index: usize,
    pub coref_id: Option<String>,
    pub reason: UnmatchedReason,
}

/// Output of post-processing for one document.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize, JsonSchema)]
pub struct Assembly {
    pub records: Vec<SarRecord>,
    pub unmatched: Vec<Unmatched>,
    pub rejected: Vec<Rejected>,
}

/// Links each molecule to its best table row across all tables, attaches that
/// row's activities, then runs quality control.
pub fn assemble(
    doc_id: &str,
    mols: &[MoleculeCandidate],
    tables: &[ParsedActivityTable],
    cfg: &MatchConfig,
) -> Assembly {
    // Flattened row identifiers across tables: (table index, row index, id).
    let rows: Vec<(usize, usize, &str)> = tables
        .iter()
        .enumerate()
        .flat_map(|(t, table)| {
            table
                .rows
                .iter()
                .enumerate()
                .filter_map(move |(r, row)| row.coref.id().map(|id| (t, r, id)))
        })
        .collect();
    let row_ids: Vec<&str> = rows.iter().map(|(_, _, id)| *id).collect();

    let mut out = Assembly::default();
    let mut records = Vec::new();
    for mol in mols {
        let unmatched = |reason| Unmatched {
            region_id: mol.region_id.clone(),
            page_index: mol.page_index,
            coref_id: mol.coref_id.clone(),
            reason,
        };
        let Some(smiles) = mol.smiles.as_deref().filter(|s| !s.is_empty()) else {
            out.unmatched.push(unmatched(UnmatchedReason::NoSmiles));
            continue;
        };
        let Some(coref) = mol.coref_id.as_deref().map(str::trim).filter(|c| !c.is_empty()) else {
            out.unmatched.push(unmatched(UnmatchedReason::NoCoref));
            continue;
        };
        let outcomes: Vec<MatchOutcome> = cascade_match(coref, &row_ids, cfg)
            .into_iter()
            .map(|hit| {
                let (t, r, id) = rows[hit.index];
                let table = &tables[t];
                MatchOutcome {
                    molecule_region: mol.region_id.clone(),
                    molecule_page: mol.page_index,
                    mol_coref: coref.to_string(),
                    table_index: t,
                    table_region: table.table_region.region_id.clone(),
                    table_page: table.table_region.page_index,
                    row_index: r,
                    row_coref: id.to_string(),
                    tier: hit.tier,
                    similarity: hit.similarity,
                    composite_score: 0.0,
                }
            })
            .collect();
        let Ok(best) = rank_candidates(&outcomes, cfg) else {
            out.unmatched.push(unmatched(UnmatchedReason::NoMatch));
            continue;
        };
        let table = &tables[best.table_index];
        let activities = table.rows[best.row_index].activities.clone();
        if activities.is_empty() {
            out.unmatched.push(unmatched(UnmatchedReason::EmptyRow));
            continue;
        }
        records.push(SarRecord {
            doc_id: doc_id.to_string(),
            smiles: smiles.to_string(),
            coref_id: coref.to_string(),
            activities,
            molecule_region: RegionAnchor {
                region_id: mol.region_id.clone(),
                page_index: mol.page_index,
            },
            table_region: table.table_region.clone(),
            table_row: best.row_index,
            match_tier: best.tier,
            match_similarity: best.similarity,
            score: best.composite_score,
            edited: false,
            flags: Vec::new(),
        });
    }

    let (kept, rejected) = quality_control(records, cfg);
    let kept_regions: BTreeSet<&str> = kept
        .iter()
        .map(|r| r.molecule_region.region_id.as_str())
        .collect();
    for r in &rejected {
        if !kept_regions.contains(r.record.molecule_region.region_id.as_str()) {
            out.unmatched.push(Unmatched {
                region_id: r.record.molecule_region.region_id.clone(),
                page_index: r.record.molecule_region.page_index,
                coref_id: Some(r.record.coref_id.clone()),
                reason: UnmatchedReason::Rejected,
            });
        }
    }
    out.records = kept;
    out.rejected = rejected;
    out
}
