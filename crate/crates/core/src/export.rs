//! Record export in the CSV download format: one line per (record, activity).

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::domain::{format_value, Attribute, MatchTier, Qualifier, SarRecord, Unit};

pub const EXPORT_HEADER: [&str; 12] = [
    "doc_id",
    "coref_id",
    "smiles",
    "attribute",
    "qualifier",
    "value",
    "unit",
    "molecule_page",
    "table_page",
    "match_tier",
    "match_similarity",
    "edited",
];

/// One exported line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct ExportRow {
    pub doc_id: String,
    pub coref_id: String,
    pub smiles: String,
    pub attribute: Attribute,
    pub qualifier: Qualifier,
    pub value: f64,
    pub unit: Unit,
    pub molecule_page: usize,
    pub table_page: usize,
    pub match_tier: MatchTier,
    pub match_similarity: f64,
    pub edited: bool,
}

pub fn export_rows(records: &[SarRecord]) -> Vec<ExportRow> {
    records
        .iter()
        .flat_map(|r| {
            r.activities.iter().map(move |a| ExportRow {
                doc_id: r.doc_id.clone(),
                coref_id: r.coref_id.clone(),
                smiles: r.smiles.clone(),
                attribute: a.attribute,
                qualifier: a.qualifier,
                value: a.value,
                unit: a.unit,
                molecule_page: r.molecule_region.page_index,
                table_page: r.table_region.page_index,
                match_tier: r.match_tier,
                match_similarity: r.match_similarity,
                edited: r.edited,
            })
        })
        .collect()
}

pub fn write_records_csv<W: std::io::Write>(records: &[SarRecord], writer: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(EXPORT_HEADER)?;
    for row in export_rows(records) {
        w.write_record([
            row.doc_id.as_str(),
            row.coref_id.as_str(),
            row.smiles.as_str(),
            row.attribute.as_str(),
            row.qualifier.symbol(),
            &format_value(row.value),
            row.unit.symbol(),
            &row.molecule_page.to_string(),
            &row.table_page.to_string(),
            &row.match_tier.to_string(),
            &format_value(row.match_similarity),
            if row.edited { "true" } else { "false" },
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn records_csv_bytes(records: &[SarRecord]) -> Vec<u8> {
    let mut out = Vec::new();
    write_records_csv(records, &mut out).expect("csv into memory");
    out
}

#[derive(Debug, thiserror::Error)]
pub enum ExportParseError {
    #[error("line {line}: {reason}")]
    Malformed { line: u64, reason: String },
}

/// Parses an exported file back into rows.
pub fn read_records_csv<R: std::io::Read>(reader: R) -> Result<Vec<ExportRow>, ExportParseError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let bad = |line: u64, reason: String| ExportParseError::Malformed { line, reason };
    let headers = rdr.headers().map_err(|e| bad(1, e.to_string()))?.clone();
    if headers.iter().collect::<Vec<_>>() != EXPORT_HEADER {
        return Err(bad(1, "unexpected header".into()));
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| bad(0, e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        let f = |i: usize| rec.get(i).unwrap_or_default();
        let num = |i: usize| -> Result<f64, ExportParseError> {
            f(i).parse().map_err(|_| bad(line, format!("{} is not a number", EXPORT_HEADER[i])))
        };
        let int = |i: usize| -> Result<usize, ExportParseError> {
            f(i).parse().map_err(|_| bad(line, format!("{} is not an integer", EXPORT_HEADER[i])))
        };
        out.push(ExportRow {
            doc_id: f(0).to_string(),
            coref_id: f(1).to_string(),
            smiles: f(2).to_string(),
            attribute: f(3).parse().map_err(|e| bad(line, e))?,
            qualifier: f(4).parse().map_err(|e| bad(line, e))?,
            value: num(5)?,
            unit: f(6).parse().map_err(|e| bad(line, e))?,
            molecule_page: int(7)?,
            table_page: int(8)?,
            match_tier: f(9).parse().map_err(|e| bad(line, e))?,
            match_similarity: num(10)?,
            edited: f(11).parse().map_err(|_| bad(line, "edited is not a boolean".into()))?,
        });
    }
    Ok(out)
}
