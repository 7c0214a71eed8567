use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use super::TableError;

/// Backend answer for a table that carries no activity data.
pub const NOT_ACTIVITY_SENTINEL: &str = "<table>None</table>";

/// Placeholder a backend writes for a cell holding a drawn structure.
pub const MOL_TOKEN: &str = "[mol]";

const MAX_SPAN: u32 = 1000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct Cell {
    /// `th` when true, `td` otherwise.
    pub header: bool,
    pub text: String,
    pub rowspan: u32,
    pub colspan: u32,
    pub is_mol_token: bool,
}

impl Cell {
    pub fn new(header: bool, text: impl Into<String>, rowspan: u32, colspan: u32) -> Self {
        let text = text.into();
        Self {
            header,
            is_mol_token: text == MOL_TOKEN,
            text,
            rowspan,
            colspan,
        }
    }

    pub fn td(text: impl Into<String>) -> Self {
        Self::new(false, text, 1, 1)
    }

    pub fn th(text: impl Into<String>) -> Self {
        Self::new(true, text, 1, 1)
    }

    pub fn tag(&self) -> &'static str {
        if self.header {
            "th"
        } else {
            "td"
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize, JsonSchema)]
pub struct Row {
    pub cells: Vec<Cell>,
}

/// `table > tr > (th|td)` tree exactly as the backend wrote it.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize, JsonSchema)]
pub struct TableTree {
    pub rows: Vec<Row>,
}

impl TableTree {
    pub fn from_rows(rows: Vec<Vec<Cell>>) -> Self {
        Self {
            rows: rows.into_iter().map(|cells| Row { cells }).collect(),
        }
    }

    /// Node count: the table, its rows and its cells.
    pub fn node_count(&self) -> usize {
        1 + self.rows.len() + self.rows.iter().map(|r| r.cells.len()).sum::<usize>()
    }

    pub fn cells(&self) -> impl Iterator<Item = &Cell> {
        self.rows.iter().flat_map(|r| r.cells.iter())
    }
}

fn strip_fence(s: &str) -> &str {
    let t = s.trim();
    if let Some(rest) = t.strip_prefix("```") {
        let rest = rest.strip_prefix("html").unwrap_or(rest);
        if let Some(body) = rest.trim_end().strip_suffix("```") {
            return body.trim();
        }
    }
    t
}

/// Parses the backend HTML dialect. The not-an-activity-table sentinel yields
/// [`TableError::NotActivityTable`].
pub fn parse_table_html(html: &str) -> Result<TableTree, TableError> {
    let body = strip_fence(html);
    if body == NOT_ACTIVITY_SENTINEL {
        return Err(TableError::NotActivityTable);
    }
    let offset = body.as_ptr() as usize - html.as_ptr() as usize;
    let mut p = HtmlParser {
        src: body,
        pos: 0,
        offset,
    };
    let tree = p.table()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(p.malformed());
    }
    Ok(tree)
}

#[derive(Debug)]
struct Tag {
    name: String,
    closing: bool,
    rowspan: u32,
    colspan: u32,
}

struct HtmlParser<'a> {
    src: &'a str,
    pos: usize,
    offset: usize,
}

impl HtmlParser<'_> {
    fn malformed(&self) -> TableError {
        TableError::MalformedHtml(self.offset + self.pos)
    }

    fn rest(&self) -> &str {
        &self.src[self.pos..]
    }

    fn skip_ws(&mut self) {
        let trimmed = self.rest().trim_start();
        self.pos = self.src.len() - trimmed.len();
    }

    fn table(&mut self) -> Result<TableTree, TableError> {
        self.skip_ws();
        self.expect_open("table")?;
        let mut rows = Vec::new();
        loop {
            self.skip_ws();
            let start = self.pos;
            let tag = self.tag()?;
            match (tag.name.as_str(), tag.closing) {
                ("table", true) => return Ok(TableTree { rows }),
                ("tr", false) => rows.push(self.row()?),
                _ => {
                    self.pos = start;
                    return Err(self.malformed());
                }
            }
        }
    }

    fn row(&mut self) -> Result<Row, TableError> {
        let mut cells = Vec::new();
        loop {
            self.skip_ws();
            let start = self.pos;
            let tag = self.tag()?;
            match (tag.name.as_str(), tag.closing) {
                ("tr", true) => return Ok(Row { cells }),
                ("th" | "td", false) => {
                    let text = self.cell_text()?;
                    let close_at = self.pos;
                    let close = self.tag()?;
                    if !close.closing || close.name != tag.name {
                        self.pos = close_at;
                        return Err(self.malformed());
                    }
                    cells.push(Cell::new(tag.name == "th", text, tag.rowspan, tag.colspan));
                }
                _ => {
                    self.pos = start;
                    return Err(self.malformed());
                }
            }
        }
    }

    fn cell_text(&mut self) -> Result<String, TableError> {
        let end = self.rest().find('<').ok_or_else(|| {
            TableError::MalformedHtml(self.offset + self.src.len())
        })?;
        let text = decode_entities(self.rest()[..end].trim());
        self.pos += end;
        Ok(text)
    }

    fn expect_open(&mut self, name: &str) -> Result<Tag, TableError> {
        let start = self.pos;
        let tag = self.tag()?;
        if tag.closing || tag.name != name {
            self.pos = start;
            return Err(self.malformed());
        }
        Ok(tag)
    }

    /// Reads one `<...>` tag. Unknown tag names are rejected by name.
    fn tag(&mut self) -> Result<Tag, TableError> {
        if !self.rest().starts_with('<') {
            return Err(self.malformed());
        }
        let start = self.pos;
        let end = match self.rest().find('>') {
            Some(e) => e,
            None => return Err(self.malformed()),
        };
        let inner = &self.rest()[1..end];
        let (closing, inner) = match inner.strip_prefix('/') {
            Some(i) => (true, i),
            None => (false, inner),
        };
        let name_len = inner
            .find(|c: char| c.is_whitespace() || c == '/')
            .unwrap_or(inner.len());
        let name = inner[..name_len].to_ascii_lowercase();
        if name.is_empty() {
            return Err(self.malformed());
        }
        if !matches!(name.as_str(), "table" | "tr" | "th" | "td") {
            return Err(TableError::DisallowedTag(name));
        }
        let attrs = inner[name_len..].trim();
        let mut tag = Tag {
            name,
            closing,
            rowspan: 1,
            colspan: 1,
        };
        if closing && !attrs.is_empty() {
            return Err(self.malformed());
        }
        for (key, value) in parse_attrs(attrs).ok_or_else(|| TableError::MalformedHtml(self.offset + start))? {
            let span = |v: &str| -> Option<u32> {
                v.trim().parse::<u32>().ok().filter(|n| (1..=MAX_SPAN).contains(n))
            };
            match key.as_str() {
                "rowspan" => {
                    tag.rowspan = span(&value).ok_or_else(|| TableError::MalformedHtml(self.offset + start))?
                }
                "colspan" => {
                    tag.colspan = span(&value).ok_or_else(|| TableError::MalformedHtml(self.offset + start))?
                }
                _ => {}
            }
        }
        self.pos += end + 1;
        Ok(tag)
    }
}

/// `key="v"`, `key='v'` and `key=v` pairs; `None` on malformed syntax.
fn parse_attrs(s: &str) -> Option<Vec<(String, String)>> {
    let mut out = Vec::new();
    let mut rest = s.trim_start();
    while !rest.is_empty() {
        let key_len = rest
            .find(|c: char| c == '=' || c.is_whitespace())
            .unwrap_or(rest.len());
        let key = rest[..key_len].to_ascii_lowercase();
        if key.is_empty() {
            return None;
        }
        rest = rest[key_len..].trim_start();
        let value = if let Some(after) = rest.strip_prefix('=') {
            let after = after.trim_start();
            let (v, tail) = match after.chars().next() {
                Some(q @ ('"' | '\'')) => {
                    let close = after[1..].find(q)?;
                    (&after[1..1 + close], &after[close + 2..])
                }
                Some(_) => {
                    let len = after.find(char::is_whitespace).unwrap_or(after.len());
                    (&after[..len], &after[len..])
                }
                None => return None,
            };
            rest = tail;
            v.to_string()
        } else {
            String::new()
        };
        out.push((key, value));
        rest = rest.trim_start();
    }
    Some(out)
}

fn decode_entities(s: &str) -> String {
    if !s.contains('&') {
        return s.to_string();
    }
    let mut out = String::with_capacity(s.len());
    let mut rest = s;
    while let Some(amp) = rest.find('&') {
        out.push_str(&rest[..amp]);
        let tail = &rest[amp..];
        let decoded = tail.find(';').filter(|&semi| semi <= 10).and_then(|semi| {
            let name = &tail[1..semi];
            let c = match name {
                "amp" => Some('&'),
                "lt" => Some('<'),
                "gt" => Some('>'),
                "quot" => Some('"'),
                "apos" | "#39" => Some('\''),
                "nbsp" => Some('\u{a0}'),
                _ => name
                    .strip_prefix("#x")
                    .and_then(|h| u32::from_str_radix(h, 16).ok())
                    .or_else(|| name.strip_prefix('#').and_then(|d| d.parse().ok()))
                    .and_then(char::from_u32),
            }?;
            Some((c, semi + 1))
        });
        match decoded {
            Some((c, len)) => {
                out.push(c);
                rest = &tail[len..];
            }
            None => {
                out.push('&');
                rest = &tail[1..];
            }
        }
    }
    out.push_str(rest);
    out
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            _ => out.push(c),
        }
    }
    out
}

/// Writes a tree in the same dialect [`parse_table_html`] reads.
pub fn render_table_html(tree: &TableTree) -> String {
    let mut out = String::from("<table>");
    for row in &tree.rows {
        out.push_str("<tr>");
        for cell in &row.cells {
            let tag = cell.tag();
            out.push('<');
            out.push_str(tag);
            if cell.rowspan > 1 {
                out.push_str(&format!(" rowspan=\"{}\"", cell.rowspan));
            }
            if cell.colspan > 1 {
                out.push_str(&format!(" colspan=\"{}\"", cell.colspan));
            }
            out.push('>');
            out.push_str(&escape(&cell.text));
            out.push_str("</");
            out.push_str(tag);
            out.push('>');
        }
        out.push_str("</tr>");
    }
    out.push_str("</table>");
    out
}
