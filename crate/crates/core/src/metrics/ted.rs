//! Ordered tree edit distance (Zhang and Shasha keyroot dynamic program) and the
//! table similarity score built on it.

use std::ops::Add;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::align::levenshtein;
use crate::tableparse::{parse_table_html, TableError, TableTree};

/// Ordered labeled tree.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct Tree<L> {
    pub label: L,
    pub children: Vec<Tree<L>>,
}

impl<L> Tree<L> {
    pub fn leaf(label: L) -> Self {
        Self {
            label,
            children: Vec::new(),
        }
    }

    pub fn node(label: L, children: Vec<Tree<L>>) -> Self {
        Self { label, children }
    }

    pub fn size(&self) -> usize {
        1 + self.children.iter().map(Tree::size).sum::<usize>()
    }
}

/// Cost domain for edit distances. Implemented for `f64`; exact rational types
/// can implement it to check the algorithm without rounding.
pub trait EditCost: Copy + PartialOrd + Add<Output = Self> {
    fn zero() -> Self;
    fn unit() -> Self;
}

impl EditCost for f64 {
    fn zero() -> Self {
        0.0
    }
    fn unit() -> Self {
        1.0
    }
}

fn min3<C: EditCost>(a: C, b: C, c: C) -> C {
    let m = if b < a { b } else { a };
    if c < m {
        c
    } else {
        m
    }
}

struct Flat<'a, L> {
    labels: Vec<&'a L>,
    /// Postorder index of each node's leftmost leaf.
    lml: Vec<usize>,
    keyroots: Vec<usize>,
}

fn flatten<L>(t: &Tree<L>) -> Flat<'_, L> {
    fn walk<'a, L>(t: &'a Tree<L>, labels: &mut Vec<&'a L>, lml: &mut Vec<usize>) -> usize {
        let mut first_leaf = None;
        for c in &t.children {
            let l = walk(c, labels, lml);
            first_leaf.get_or_insert(l);
        }
        let me = labels.len();
        labels.push(&t.label);
        let l = first_leaf.unwrap_or(me);
        lml.push(l);
        l
    }
    let mut labels = Vec::new();
    let mut lml = Vec::new();
    walk(t, &mut labels, &mut lml);
    let n = labels.len();
    let mut keyroots: Vec<usize> = (0..n)
        .filter(|&i| !(i + 1..n).any(|j| lml[j] == lml[i]))
        .collect();
    keyroots.sort_unstable();
    Flat {
        labels,
        lml,
        keyroots,
    }
}

/// Edit distance with unit insert and delete costs and the given rename cost.
/// `None` stands for the empty tree.
pub fn tree_edit_distance<L, C: EditCost>(
    a: Option<&Tree<L>>,
    b: Option<&Tree<L>>,
    rename: impl Fn(&L, &L) -> C,
) -> C {
    let size = |t: Option<&Tree<L>>| t.map_or(0, Tree::size);
    let (a, b) = match (a, b) {
        (Some(a), Some(b)) => (a, b),
        _ => {
            let n = size(a) + size(b);
            return (0..n).fold(C::zero(), |acc, _| acc + C::unit());
        }
    };
    let fa = flatten(a);
    let fb = flatten(b);
    let (n, m) = (fa.labels.len(), fb.labels.len());
    let mut td = vec![vec![C::zero(); m]; n];
    let del = C::unit();
    let ins = C::unit();
    for &i in &fa.keyroots {
        for &j in &fb.keyroots {
            let (li, lj) = (fa.lml[i], fb.lml[j]);
            let rows = i - li + 2;
            let cols = j - lj + 2;
            let mut fd = vec![vec![C::zero(); cols]; rows];
            for x in 1..rows {
                fd[x][0] = fd[x - 1][0] + del;
            }
            for y in 1..cols {
                fd[0][y] = fd[0][y - 1] + ins;
            }
            for x in li..=i {
                let xi = x - li + 1;
                for y in lj..=j {
                    let yj = y - lj + 1;
                    if fa.lml[x] == li && fb.lml[y] == lj {
                        let v = min3(
                            fd[xi - 1][yj] + del,
                            fd[xi][yj - 1] + ins,
                            fd[xi - 1][yj - 1] + rename(fa.labels[x], fb.labels[y]),
                        );
                        fd[xi][yj] = v;
                        td[x][y] = v;
                    } else {
                        fd[xi][yj] = min3(
                            fd[xi - 1][yj] + del,
                            fd[xi][yj - 1] + ins,
                            fd[fa.lml[x] - li][fb.lml[y] - lj] + td[x][y],
                        );
                    }
                }
            }
        }
    }
    td[n - 1][m - 1]
}

/// Node label of a table tree.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub enum TableNode {
    Table,
    Row,
    Cell {
        tag: String,
        rowspan: u32,
        colspan: u32,
        text: String,
    },
}

pub fn table_to_tree(t: &TableTree) -> Tree<TableNode> {
    Tree::node(
        TableNode::Table,
        t.rows
            .iter()
            .map(|r| {
                Tree::node(
                    TableNode::Row,
                    r.cells
                        .iter()
                        .map(|c| {
                            Tree::leaf(TableNode::Cell {
                                tag: c.tag().to_string(),
                                rowspan: c.rowspan,
                                colspan: c.colspan,
                                text: c.text.clone(),
                            })
                        })
                        .collect(),
                )
            })
            .collect(),
    )
}

/// Rename cost as an exact fraction `(numerator, denominator)`: 0 for equal
/// labels, 1 for different tags or spans, otherwise the normalized text distance.
pub fn rename_cost_fraction(a: &TableNode, b: &TableNode) -> (usize, usize) {
    if a == b {
        return (0, 1);
    }
    match (a, b) {
        (
            TableNode::Cell {
                tag: ta,
                rowspan: ra,
                colspan: ca,
                text: xa,
            },
            TableNode::Cell {
                tag: tb,
                rowspan: rb,
                colspan: cb,
                text: xb,
            },
        ) if ta == tb && ra == rb && ca == cb => {
            let m = xa.chars().count().max(xb.chars().count());
            if m == 0 {
                (0, 1)
            } else {
                (levenshtein(xa, xb), m)
            }
        }
        (TableNode::Table, TableNode::Table) | (TableNode::Row, TableNode::Row) => (0, 1),
        _ => (1, 1),
    }
}

/// Table similarity `1 - TED / max(|Tp|, |Tt|)`. The not-an-activity-table
/// sentinel is the empty tree; two empty trees score 1.
pub fn teds(pred_html: &str, truth_html: &str) -> Result<f64, TableError> {
    let load = |h: &str| match parse_table_html(h) {
        Ok(t) => Ok(Some(table_to_tree(&t))),
        Err(TableError::NotActivityTable) => Ok(None),
        Err(e) => Err(e),
    };
    let p = load(pred_html)?;
    let t = load(truth_html)?;
    Ok(teds_trees(p.as_ref(), t.as_ref()))
}

pub fn teds_trees(p: Option<&Tree<TableNode>>, t: Option<&Tree<TableNode>>) -> f64 {
    let n = p.map_or(0, Tree::size).max(t.map_or(0, Tree::size));
    if n == 0 {
        return 1.0;
    }
    let d: f64 = tree_edit_distance(p, t, |a, b| {
        let (num, den) = rename_cost_fraction(a, b);
        num as f64 / den as f64
    });
    (1.0 - d / n as f64).clamp(0.0, 1.0)
}
