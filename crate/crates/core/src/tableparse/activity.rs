use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use super::grid::Grid;
use super::html::MOL_TOKEN;
use super::screen::{find_unit, header_attribute};
use super::TableError;
use crate::domain::{ActivityValue, Attribute, Qualifier, RegionAnchor, Unit};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct ActivityColumn {
    pub column: usize,
    pub attribute: Attribute,
    pub unit: Option<Unit>,
    pub header: String,
}

/// Row identifier: a written id, or a drawn structure whose id comes from coreference.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum RowCoref {
    Id(String),
    MolToken,
}

impl RowCoref {
    pub fn id(&self) -> Option<&str> {
        match self {
            RowCoref::Id(s) => Some(s),
            RowCoref::MolToken => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct ActivityRow {
    /// Grid row the values were read from.
    pub grid_row: usize,
    pub coref: RowCoref,
    pub activities: Vec<ActivityValue>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct SkippedCell {
    pub row: usize,
    pub column: usize,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct ParsedActivityTable {
    pub table_region: RegionAnchor,
    pub grid: Grid,
    pub header_rows: usize,
    pub id_column: Option<usize>,
    pub activity_columns: Vec<ActivityColumn>,
    pub rows: Vec<ActivityRow>,
    /// Non-empty activity cells that did not parse as a value.
    pub skipped: Vec<SkippedCell>,
}

const ID_HEADER_WORDS: [&str; 4] = ["compound", "cpd", "example", "entry"];
const ID_HEADER_TOKENS: [&str; 3] = ["id", "no", "#"];
const ID_HEADER_CJK: [&str; 2] = ["化合物", "実施例"];

fn is_id_header(text: &str) -> bool {
    let lower = text.to_lowercase();
    if ID_HEADER_CJK.iter().any(|w| lower.contains(w)) {
        return true;
    }
    let tokens: Vec<&str> = lower
        .split(|c: char| !(c.is_alphanumeric() || c == '#'))
        .filter(|t| !t.is_empty())
        .collect();
    tokens.iter().any(|t| {
        ID_HEADER_TOKENS.contains(t)
            || ID_HEADER_WORDS
                .iter()
                .any(|w| t.starts_with(w) && t[w.len()..].chars().all(|c| c == 's'))
    })
}

fn number_like(text: &str) -> bool {
    parse_value(text).is_some()
}

/// Number of leading header rows: rows written entirely as `th`, or else the
/// first row when it names an attribute.
fn header_row_count(grid: &Grid) -> usize {
    let th = grid.header_rows.iter().take_while(|h| **h).count();
    if th > 0 {
        return th;
    }
    if grid.rows > 0 && grid.row_texts(0).any(|t| header_attribute(t).is_some()) {
        1
    } else {
        0
    }
}

/// Header text of a column, joining distinct spanning cells down the header rows.
fn column_header(grid: &Grid, header_rows: usize, c: usize) -> String {
    let mut parts: Vec<&str> = Vec::new();
    let mut last_origin = None;
    for r in 0..header_rows {
        let cell = grid.get(r, c);
        if last_origin == Some(cell.origin) || cell.text.is_empty() {
            continue;
        }
        last_origin = Some(cell.origin);
        parts.push(&cell.text);
    }
    parts.join(" ")
}

/// Lifts a grid into identifier-keyed activity rows.
///
/// `caption` is optional surrounding text (table title or region OCR) used as the
/// last source of a unit before `Unknown`.
pub fn extract_activity_rows(
    table_region: RegionAnchor,
    grid: Grid,
    caption: Option<&str>,
) -> Result<ParsedActivityTable, TableError> {
    let header_rows = header_row_count(&grid);
    if header_rows == 0 {
        return Err(TableError::NoActivityColumn);
    }
    let headers: Vec<String> = (0..grid.cols)
        .map(|c| column_header(&grid, header_rows, c))
        .collect();

    let mut activity_columns = Vec::new();
    let mut id_column = None;
    for (c, h) in headers.iter().enumerate() {
        if let Some(attribute) = header_attribute(h) {
            activity_columns.push(ActivityColumn {
                column: c,
                attribute,
                unit: find_unit(h),
                header: h.clone(),
            });
        } else if id_column.is_none() && is_id_header(h) {
            id_column = Some(c);
        }
    }
    if activity_columns.is_empty() {
        return Err(TableError::NoActivityColumn);
    }
    let data_rows = header_rows..grid.rows;
    let is_activity = |c: usize| activity_columns.iter().any(|a| a.column == c);
    if id_column.is_none() {
        id_column = (0..grid.cols).find(|&c| {
            !is_activity(c)
                && data_rows.clone().any(|r| {
                    let t = grid.get(r, c).text.as_str();
                    !t.is_empty() && t != MOL_TOKEN && !number_like(t)
                })
        });
    }
    if id_column.is_none() {
        id_column = (0..grid.cols)
            .find(|&c| !is_activity(c) && data_rows.clone().any(|r| grid.get(r, c).text == MOL_TOKEN));
    }
    let Some(id_col) = id_column else {
        return Err(TableError::NoIdentifierColumn);
    };

    let caption_unit = caption.and_then(find_unit);
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for r in data_rows {
        let id_text = grid.get(r, id_col).text.trim();
        if id_text.is_empty() {
            continue;
        }
        let coref = if id_text == MOL_TOKEN {
            RowCoref::MolToken
        } else {
            RowCoref::Id(id_text.to_string())
        };
        let mut activities = Vec::new();
        for col in &activity_columns {
            let text = grid.get(r, col.column).text.as_str();
            if text.trim().is_empty() {
                continue;
            }
            match parse_value(text) {
                Some(p) => activities.push(ActivityValue {
                    attribute: col.attribute,
                    qualifier: p.qualifier,
                    value: p.value,
                    unit: p.unit.or(col.unit).or(caption_unit).unwrap_or(Unit::Unknown),
                    raw_text: text.to_string(),
                }),
                None => {
                    tracing::debug!(row = r, column = col.column, text, "unparseable activity cell");
                    skipped.push(SkippedCell {
                        row: r,
                        column: col.column,
                        text: text.to_string(),
                    });
                }
            }
        }
        rows.push(ActivityRow {
            grid_row: r,
            coref,
            activities,
        });
    }

    Ok(ParsedActivityTable {
        table_region,
        grid,
        header_rows,
        id_column: Some(id_col),
        activity_columns,
        rows,
        skipped,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParsedValue {
    pub qualifier: Qualifier,
    pub value: f64,
    pub unit: Option<Unit>,
}

/// Parses one activity cell: optional qualifier, a number, an optional `± error`,
/// an optional unit and optional footnote marks.
pub fn parse_value(text: &str) -> Option<ParsedValue> {
    let mut s = text.trim();
    let mut qualifier = Qualifier::None;
    for (prefix, q) in [
        (">=", Qualifier::GE),
        ("<=", Qualifier::LE),
        ("≥", Qualifier::GE),
        ("≤", Qualifier::LE),
        (">", Qualifier::GT),
        ("<", Qualifier::LT),
        ("~", Qualifier::Approx),
        ("≈", Qualifier::Approx),
        ("∼", Qualifier::Approx),
        ("=", Qualifier::None),
    ] {
        if let Some(rest) = s.strip_prefix(prefix) {
            qualifier = q;
            s = rest.trim_start();
            break;
        }
    }
    let (value, rest) = leading_number(s)?;
    let mut rest = rest.trim_start();
    if let Some(err) = rest.strip_prefix('±').or_else(|| rest.strip_prefix("+/-")) {
        let (_, after) = leading_number(err.trim_start())?;
        rest = after.trim_start();
    }
    let unit = if rest.is_empty() {
        None
    } else {
        let tail = rest.trim_end_matches(['*', '†', '‡', '#']).trim();
        if tail.is_empty() {
            None
        } else {
            Some(find_unit(tail).filter(|_| is_unit_text(tail))?)
        }
    };
    Some(ParsedValue {
        qualifier,
        value,
        unit,
    })
}

fn is_unit_text(s: &str) -> bool {
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect::<String>().to_lowercase();
    let t = t.trim_start_matches('(').trim_end_matches(')');
    matches!(
        t,
        "nm" | "um" | "µm" | "μm" | "%" | "kcal/mol" | "kcal·mol-1" | "kcal·mol⁻¹" | "kcalmol-1"
    )
}

/// Reads a decimal number from the start of `s`. Accepts `.` or `,` as the
/// decimal mark; `,` groups of three are read as thousands only when a `.`
/// follows or more than one `,` appears.
fn leading_number(s: &str) -> Option<(f64, &str)> {
    let bytes: Vec<char> = s.chars().collect();
    let mut i = 0;
    let mut text = String::new();
    if let Some(&c) = bytes.first() {
        if c == '-' || c == '−' || c == '+' {
            if c != '+' {
                text.push('-');
            }
            i += 1;
        }
    }
    let body_start = i;
    while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == '.' || bytes[i] == ',') {
        i += 1;
    }
    let body: String = bytes[body_start..i].iter().collect();
    let body = body.trim_end_matches([',', '.']);
    let consumed_body = body.chars().count();
    i = body_start + consumed_body;
    if !body.chars().any(|c| c.is_ascii_digit()) {
        return None;
    }
    let commas = body.matches(',').count();
    let dots = body.matches('.').count();
    let normalized = match (commas, dots) {
        (0, 0 | 1) => body.to_string(),
        (1, 0) => body.replace(',', "."),
        (_, 0) if thousands_groups(body, ',') => body.replace(',', ""),
        (_, 1) if body.find(',') < body.find('.') && thousands_groups(body.split('.').next()?, ',') => {
            body.replace(',', "")
        }
        _ => return None,
    };
    text.push_str(&normalized);
    let mut rest_start = i;
    if i < bytes.len() && (bytes[i] == 'e' || bytes[i] == 'E') {
        let mut j = i + 1;
        let mut exp = String::from("e");
        if j < bytes.len() && (bytes[j] == '-' || bytes[j] == '+' || bytes[j] == '−') {
            exp.push(if bytes[j] == '+' { '+' } else { '-' });
            j += 1;
        }
        let digits_start = j;
        while j < bytes.len() && bytes[j].is_ascii_digit() {
            exp.push(bytes[j]);
            j += 1;
        }
        if j > digits_start {
            text.push_str(&exp);
            rest_start = j;
        }
    }
    let value: f64 = text.parse().ok()?;
    if !value.is_finite() {
        return None;
    }
    let byte_offset: usize = bytes[..rest_start].iter().map(|c| c.len_utf8()).sum();
    Some((value, &s[byte_offset..]))
}

fn thousands_groups(s: &str, sep: char) -> bool {
    let mut parts = s.split(sep);
    let first = parts.next().unwrap_or("");
    (1..=3).contains(&first.len()) && parts.all(|p| p.len() == 3 && p.chars().all(|c| c.is_ascii_digit()))
}

#[cfg(test)]
mod tests {
    use super::super::grid::expand_grid;
    use super::super::html::parse_table_html;
    use super::*;

    fn anchor() -> RegionAnchor {
        RegionAnchor {
            region_id: "t1".into(),
            page_index: 0,
        }
    }

    fn table(html: &str) -> Result<ParsedActivityTable, TableError> {
        let grid = expand_grid(&parse_table_html(html).unwrap()).unwrap();
        extract_activity_rows(anchor(), grid, None)
    }

    #[test]
    fn minimal_table() {
        let t = table("<table><tr><th>ID</th><th>IC50 (nM)</th></tr><tr><td>1a</td><td>2.3</td></tr></table>")
            .unwrap();
        assert_eq!(t.id_column, Some(0));
        assert_eq!(t.rows.len(), 1);
        let row = &t.rows[0];
        assert_eq!(row.coref, RowCoref::Id("1a".into()));
        let a = &row.activities[0];
        assert_eq!(
            (a.attribute, a.qualifier, a.value, a.unit),
            (Attribute::IC50, Qualifier::None, 2.3, Unit::Nanomolar)
        );
        assert_eq!(a.raw_text, "2.3");
    }

    #[test]
    fn qualified_cell() {
        let t = table("<table><tr><th>Compound</th><th>Ki (uM)</th></tr><tr><td>5</td><td>&gt;10</td></tr></table>")
            .unwrap();
        let a = &t.rows[0].activities[0];
        assert_eq!((a.attribute, a.qualifier, a.value, a.unit), (Attribute::Ki, Qualifier::GT, 10.0, Unit::Micromolar));
    }

    #[test]
    fn no_activity_column() {
        assert_eq!(
            table("<table><tr><th>Step</th><th>Yield (%)</th></tr><tr><td>1</td><td>45</td></tr></table>"),
            Err(TableError::NoActivityColumn)
        );
        assert_eq!(
            table("<table><tr><td>a</td><td>b</td></tr></table>"),
            Err(TableError::NoActivityColumn)
        );
    }

    #[test]
    fn no_identifier_column() {
        assert_eq!(
            table("<table><tr><th>IC50</th><th>Ki</th></tr><tr><td>1</td><td>2</td></tr></table>"),
            Err(TableError::NoIdentifierColumn)
        );
    }

    #[test]
    fn first_row_header_without_th() {
        let t = table("<table><tr><td>Entry</td><td>EC50 (uM)</td></tr><tr><td>A35</td><td>0.5</td></tr></table>")
            .unwrap();
        assert_eq!(t.header_rows, 1);
        assert_eq!(t.rows[0].coref, RowCoref::Id("A35".into()));
    }

    #[test]
    fn fallback_identifier_and_mol_token() {
        let t = table("<table><tr><th>Structure</th><th>R</th><th>IC50 (nM)</th></tr><tr><td>[mol]</td><td>Me</td><td>4</td></tr></table>")
            .unwrap();
        assert_eq!(t.id_column, Some(1));
        let t = table("<table><tr><th>Structure</th><th>IC50 (nM)</th></tr><tr><td>[mol]</td><td>4</td></tr></table>")
            .unwrap();
        assert_eq!(t.id_column, Some(0));
        assert_eq!(t.rows[0].coref, RowCoref::MolToken);
    }

    #[test]
    fn multilevel_header_and_units() {
        let html = "<table><tr><th rowspan=\"2\">化合物</th><th colspan=\"2\">IC50</th><th rowspan=\"2\">Ki</th></tr>\
                    <tr><th>EGFR (nM)</th><th>HER2 (uM)</th></tr>\
                    <tr><td>12</td><td>3 nM</td><td>1.5</td><td>ND</td></tr></table>";
        let grid = expand_grid(&parse_table_html(html).unwrap()).unwrap();
        let t = extract_activity_rows(anchor(), grid, Some("Table 2. Ki values in µM")).unwrap();
        assert_eq!(t.header_rows, 2);
        assert_eq!(t.id_column, Some(0));
        assert_eq!(t.activity_columns.len(), 3);
        let acts = &t.rows[0].activities;
        assert_eq!(acts.len(), 2);
        assert_eq!(acts[0].unit, Unit::Nanomolar);
        assert_eq!(acts[1].unit, Unit::Micromolar);
        assert_eq!(t.skipped.len(), 1);
        assert_eq!(t.skipped[0].text, "ND");
    }

    #[test]
    fn value_grammar() {
        let v = |s: &str| parse_value(s).map(|p| (p.qualifier, p.value, p.unit));
        assert_eq!(v("2.3"), Some((Qualifier::None, 2.3, None)));
        assert_eq!(v("≥ 5"), Some((Qualifier::GE, 5.0, None)));
        assert_eq!(v("<=0.1"), Some((Qualifier::LE, 0.1, None)));
        assert_eq!(v("~7"), Some((Qualifier::Approx, 7.0, None)));
        assert_eq!(v("2.3 ± 0.4"), Some((Qualifier::None, 2.3, None)));
        assert_eq!(v("45%"), Some((Qualifier::None, 45.0, Some(Unit::Percent))));
        assert_eq!(v("1,5"), Some((Qualifier::None, 1.5, None)));
        assert_eq!(v("1,234.5"), Some((Qualifier::None, 1234.5, None)));
        assert_eq!(v("1,234,567"), Some((Qualifier::None, 1234567.0, None)));
        assert_eq!(v("1.2e-3"), Some((Qualifier::None, 0.0012, None)));
        assert_eq!(v("−5"), Some((Qualifier::None, -5.0, None)));
        assert_eq!(v("12*"), Some((Qualifier::None, 12.0, None)));
        assert_eq!(v("3 uM"), Some((Qualifier::None, 3.0, Some(Unit::Micromolar))));
        assert_eq!(v("ND"), None);
        assert_eq!(v("-"), None);
        assert_eq!(v("12 (n=3)"), None);
        assert_eq!(v("1.2.3"), None);
    }
}
