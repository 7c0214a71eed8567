//! Table screening, backend HTML parsing, span expansion and activity-row extraction.

mod activity;
mod grid;
mod html;
mod screen;

pub use activity::{
    extract_activity_rows, parse_value, ActivityColumn, ActivityRow, ParsedActivityTable,
    ParsedValue, RowCoref, SkippedCell,
};
pub use grid::{expand_grid, Grid, GridCell};
pub use html::{
    parse_table_html, render_table_html, Cell, Row, TableTree, MOL_TOKEN, NOT_ACTIVITY_SENTINEL,
};
pub use screen::{find_unit, header_attribute, screen_keywords};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TableError {
    #[error("backend reported a table without activity data")]
    NotActivityTable,
    #[error("malformed table HTML at byte {0}")]
    MalformedHtml(usize),
    #[error("tag <{0}> is not allowed in table HTML")]
    DisallowedTag(String),
    #[error("cells overlap at row {0}, column {1}")]
    OverlappingSpans(usize, usize),
    #[error("no identifier column found")]
    NoIdentifierColumn,
    #[error("no activity column found")]
    NoActivityColumn,
}
