//! Reference implementations written independently of the library.

use std::collections::BTreeMap;

use num_rational::Ratio;
use sarline_core::metrics::{EditCost, TableNode, Tree};
use sarline_core::smiles::{BondOrder, MolGraph};

/// Textbook Wagner-Fischer with a full matrix.
pub fn wagner_fischer(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for j in 0..=b.len() {
        d[0][j] = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let sub = d[i - 1][j - 1] + usize::from(a[i - 1] != b[j - 1]);
            d[i][j] = sub.min(d[i - 1][j] + 1).min(d[i][j - 1] + 1);
        }
    }
    d[a.len()][b.len()]
}

/// Similarity as an exact fraction `(max - d) / max`.
pub fn similarity_ratio(a: &str, b: &str) -> Ratio<i64> {
    let m = a.chars().count().max(b.chars().count()) as i64;
    Ratio::new(m - wagner_fischer(a, b) as i64, m)
}

/// Lowercase and drop the delimiters an identifier may carry. Only meant for ASCII
/// and CJK identifiers, which have no full-width forms to fold.
pub fn fold_ascii_id(s: &str) -> String {
    s.chars()
        .flat_map(char::to_lowercase)
        .filter(|c| !c.is_whitespace() && !"-_.,()[]".contains(*c))
        .collect()
}

/// Exact edit costs.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Exact(pub Ratio<i64>);

impl std::ops::Add for Exact {
    type Output = Exact;
    fn add(self, o: Exact) -> Exact {
        Exact(self.0 + o.0)
    }
}

impl EditCost for Exact {
    fn zero() -> Self {
        Exact(Ratio::from_integer(0))
    }
    fn unit() -> Self {
        Exact(Ratio::from_integer(1))
    }
}

/// Rename cost of table nodes, restated from the definition.
pub fn rename_exact(a: &TableNode, b: &TableNode) -> Ratio<i64> {
    use TableNode::*;
    match (a, b) {
        (Table, Table) | (Row, Row) => Ratio::from_integer(0),
        (
            Cell { tag: t1, rowspan: r1, colspan: c1, text: x1 },
            Cell { tag: t2, rowspan: r2, colspan: c2, text: x2 },
        ) if t1 == t2 && r1 == r2 && c1 == c2 => {
            let m = x1.chars().count().max(x2.chars().count());
            if m == 0 {
                Ratio::from_integer(0)
            } else {
                Ratio::new(wagner_fischer(x1, x2) as i64, m as i64)
            }
        }
        _ => Ratio::from_integer(1),
    }
}

struct Pre<'a> {
    labels: Vec<&'a TableNode>,
    /// `anc[i][j]`: node `i` is a proper ancestor of node `j`.
    anc: Vec<Vec<bool>>,
}

fn preorder(t: &Tree<TableNode>) -> Pre<'_> {
    fn walk<'a>(t: &'a Tree<TableNode>, path: &mut Vec<usize>, labels: &mut Vec<&'a TableNode>, pairs: &mut Vec<(usize, usize)>) {
        let me = labels.len();
        labels.push(&t.label);
        for &p in path.iter() {
            pairs.push((p, me));
        }
        path.push(me);
        for c in &t.children {
            walk(c, path, labels, pairs);
        }
        path.pop();
    }
    let mut labels = Vec::new();
    let mut pairs = Vec::new();
    walk(t, &mut Vec::new(), &mut labels, &mut pairs);
    let n = labels.len();
    let mut anc = vec![vec![false; n]; n];
    for (a, d) in pairs {
        anc[a][d] = true;
    }
    Pre { labels, anc }
}

/// Minimum over every valid edit mapping, found by exhaustive search.
/// A mapping is valid when it is one-to-one and preserves both ancestry and
/// preorder, which together preserve left-to-right sibling order.
pub fn brute_force_ted(a: &Tree<TableNode>, b: &Tree<TableNode>) -> Ratio<i64> {
    let pa = preorder(a);
    let pb = preorder(b);
    let (n, m) = (pa.labels.len(), pb.labels.len());
    let mut best = Ratio::from_integer((n + m) as i64);
    let mut mapping: Vec<(usize, usize)> = Vec::new();

    fn search(
        i: usize,
        next_j: usize,
        cost: Ratio<i64>,
        pa: &Pre,
        pb: &Pre,
        mapping: &mut Vec<(usize, usize)>,
        best: &mut Ratio<i64>,
    ) {
        let (n, m) = (pa.labels.len(), pb.labels.len());
        if i == n {
            let k = mapping.len();
            let total = cost + Ratio::from_integer((n - k + m - k) as i64);
            if total < *best {
                *best = total;
            }
            return;
        }
        search(i + 1, next_j, cost, pa, pb, mapping, best);
        for j in next_j..m {
            if mapping.iter().all(|&(p, q)| pa.anc[p][i] == pb.anc[q][j]) {
                mapping.push((i, j));
                let c = cost + rename_exact(pa.labels[i], pb.labels[j]);
                search(i + 1, j + 1, c, pa, pb, mapping, best);
                mapping.pop();
            }
        }
    }
    search(0, 0, Ratio::from_integer(0), &pa, &pb, &mut mapping, &mut best);
    best
}

type AtomLabel = (String, bool, i8, Option<u16>, Option<u8>);

fn atom_labels(g: &MolGraph) -> Vec<AtomLabel> {
    g.atoms
        .iter()
        .map(|a| (a.element.clone(), a.aromatic, a.charge, a.isotope, a.hydrogens))
        .collect()
}

fn edge_map(g: &MolGraph) -> BTreeMap<(usize, usize), BondOrder> {
    g.bonds
        .iter()
        .map(|b| ((b.a.min(b.b), b.a.max(b.b)), b.order))
        .collect()
}

/// Cheap isomorphism invariant: sorted atom labels with degrees, and sorted bond orders.
pub fn invariant(g: &MolGraph) -> (Vec<(AtomLabel, usize)>, Vec<BondOrder>) {
    let labels = atom_labels(g);
    let mut deg = vec![0; g.atoms.len()];
    for b in &g.bonds {
        deg[b.a] += 1;
        deg[b.b] += 1;
    }
    let mut atoms: Vec<(AtomLabel, usize)> = labels.into_iter().zip(deg).collect();
    atoms.sort();
    let mut bonds: Vec<BondOrder> = g.bonds.iter().map(|b| b.order).collect();
    bonds.sort();
    (atoms, bonds)
}

/// Labeled graph isomorphism by backtracking over atom assignments.
pub fn isomorphic(g: &MolGraph, h: &MolGraph) -> bool {
    if g.atoms.len() != h.atoms.len() || g.bonds.len() != h.bonds.len() {
        return false;
    }
    let (lg, lh) = (atom_labels(g), atom_labels(h));
    let (eg, eh) = (edge_map(g), edge_map(h));
    let key = |u: usize, v: usize| (u.min(v), u.max(v));
    let n = g.atoms.len();
    let mut map = vec![usize::MAX; n];
    let mut used = vec![false; n];

    #[allow(clippy::too_many_arguments)]
    fn go(
        u: usize,
        n: usize,
        lg: &[AtomLabel],
        lh: &[AtomLabel],
        eg: &BTreeMap<(usize, usize), BondOrder>,
        eh: &BTreeMap<(usize, usize), BondOrder>,
        map: &mut Vec<usize>,
        used: &mut Vec<bool>,
        key: &dyn Fn(usize, usize) -> (usize, usize),
    ) -> bool {
        if u == n {
            return true;
        }
        for v in 0..n {
            if used[v] || lg[u] != lh[v] {
                continue;
            }
            let consistent = (0..u).all(|w| eg.get(&key(u, w)) == eh.get(&key(v, map[w])));
            if !consistent {
                continue;
            }
            map[u] = v;
            used[v] = true;
            if go(u + 1, n, lg, lh, eg, eh, map, used, key) {
                return true;
            }
            used[v] = false;
        }
        false
    }
    go(0, n, &lg, &lh, &eg, &eh, &mut map, &mut used, &key)
}
