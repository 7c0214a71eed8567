use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use super::html::TableTree;
use super::TableError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct GridCell {
    pub text: String,
    /// Position of the source cell whose span covers this one.
    pub origin: (usize, usize),
    pub header: bool,
}

impl GridCell {
    pub fn is_origin(&self, r: usize, c: usize) -> bool {
        self.origin == (r, c)
    }
}

/// Rectangular table after span expansion.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize, JsonSchema)]
pub struct Grid {
    pub rows: usize,
    pub cols: usize,
    pub cells: Vec<Vec<GridCell>>,
    /// Per source row: every cell written in it was a `th`.
    pub header_rows: Vec<bool>,
}

impl Grid {
    pub fn get(&self, r: usize, c: usize) -> &GridCell {
        &self.cells[r][c]
    }

    pub fn row_texts(&self, r: usize) -> impl Iterator<Item = &str> {
        self.cells[r].iter().map(|c| c.text.as_str())
    }
}

/// Expands row and column spans into a full matrix. Row spans reaching past the
/// last row are clipped; short rows are padded on the right with empty cells.
pub fn expand_grid(tree: &TableTree) -> Result<Grid, TableError> {
    let n_rows = tree.rows.len();
    let mut slots: Vec<Vec<Option<GridCell>>> = vec![Vec::new(); n_rows];
    let header_rows: Vec<bool> = tree
        .rows
        .iter()
        .map(|r| !r.cells.is_empty() && r.cells.iter().all(|c| c.header))
        .collect();

    for (r, row) in tree.rows.iter().enumerate() {
        let mut c = 0;
        for cell in &row.cells {
            while slots[r].get(c).is_some_and(|s| s.is_some()) {
                c += 1;
            }
            let row_end = (r + cell.rowspan as usize).min(n_rows);
            let col_end = c + cell.colspan as usize;
            for rr in r..row_end {
                if slots[rr].len() < col_end {
                    slots[rr].resize(col_end, None);
                }
                for cc in c..col_end {
                    if slots[rr][cc].is_some() {
                        return Err(TableError::OverlappingSpans(rr, cc));
                    }
                    slots[rr][cc] = Some(GridCell {
                        text: cell.text.clone(),
                        origin: (r, c),
                        header: cell.header,
                    });
                }
            }
            c = col_end;
        }
    }

    let cols = slots.iter().map(Vec::len).max().unwrap_or(0);
    let cells = slots
        .into_iter()
        .enumerate()
        .map(|(r, mut row)| {
            row.resize(cols, None);
            row.into_iter()
                .enumerate()
                .map(|(c, slot)| {
                    slot.unwrap_or(GridCell {
                        text: String::new(),
                        origin: (r, c),
                        header: header_rows[r],
                    })
                })
                .collect()
        })
        .collect();
    Ok(Grid {
        rows: n_rows,
        cols,
        cells,
        header_rows,
    })
}
