//! Canonical keys by color refinement with individualization.
//!
//! Two graphs get the same key iff they are isomorphic as labeled graphs, where
//! atom labels are (element, aromatic, charge, isotope, explicit H) and bond labels
//! are bond orders. Stereo markers are ignored. The search tree is explored in
//! full below a leaf budget; past the budget the key is still a valid invariant
//! but may split isomorphic pairs of very symmetric large molecules.

use std::collections::BTreeMap;
use std::fmt::Write;

use super::{BondOrder, MolGraph};

const LEAF_BUDGET: usize = 4096;

fn atom_label(a: &super::Atom) -> String {
    format!(
        "{}{}{}{}{}",
        a.element,
        if a.aromatic { "~" } else { "" },
        if a.charge != 0 { format!("{:+}", a.charge) } else { String::new() },
        a.isotope.map(|i| format!("@{i}")).unwrap_or_default(),
        a.hydrogens.map(|h| format!("H{h}")).unwrap_or_default(),
    )
}

fn bond_code(order: BondOrder) -> u8 {
    match order {
        BondOrder::Single => 1,
        BondOrder::Double => 2,
        BondOrder::Triple => 3,
        BondOrder::Aromatic => 4,
    }
}

/// Dense ranks of `keys`, equal keys sharing a rank.
fn rank<K: Ord + Clone>(keys: &[K]) -> Vec<usize> {
    let mut sorted: Vec<K> = keys.to_vec();
    sorted.sort();
    sorted.dedup();
    keys.iter()
        .map(|k| sorted.binary_search(k).expect("key present"))
        .collect()
}

struct Ctx {
    labels: Vec<String>,
    adj: Vec<Vec<(usize, u8)>>,
    edges: Vec<(usize, usize, u8)>,
    leaves: usize,
    best: Option<String>,
}

impl Ctx {
    fn refine(&self, mut colors: Vec<usize>) -> Vec<usize> {
        let mut classes = distinct(&colors);
        loop {
            let sigs: Vec<(usize, Vec<(u8, usize)>)> = (0..colors.len())
                .map(|u| {
                    let mut nb: Vec<(u8, usize)> =
                        self.adj[u].iter().map(|&(v, b)| (b, colors[v])).collect();
                    nb.sort_unstable();
                    (colors[u], nb)
                })
                .collect();
            colors = rank(&sigs);
            let next = distinct(&colors);
            if next == classes {
                return colors;
            }
            classes = next;
        }
    }

    fn certificate(&self, colors: &[usize]) -> String {
        let n = colors.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by_key(|&u| colors[u]);
        let mut pos = vec![0; n];
        for (p, &u) in order.iter().enumerate() {
            pos[u] = p;
        }
        let mut out = String::new();
        for &u in &order {
            out.push_str(&self.labels[u]);
            out.push(';');
        }
        let mut edges: Vec<(usize, usize, u8)> = self
            .edges
            .iter()
            .map(|&(a, b, c)| {
                let (x, y) = (pos[a].min(pos[b]), pos[a].max(pos[b]));
                (x, y, c)
            })
            .collect();
        edges.sort_unstable();
        out.push('|');
        for (x, y, c) in edges {
            let _ = write!(out, "{x}-{y}:{c},");
        }
        out
    }

    fn search(&mut self, colors: Vec<usize>) {
        if self.leaves >= LEAF_BUDGET {
            return;
        }
        let n = colors.len();
        let mut members: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for u in 0..n {
            members.entry(colors[u]).or_default().push(u);
        }
        let target = members
            .values()
            .filter(|m| m.len() > 1)
            .min_by_key(|m| m.len())
            .cloned();
        let Some(cell) = target else {
            self.leaves += 1;
            let cert = self.certificate(&colors);
            if self.best.as_ref().is_none_or(|b| cert < *b) {
                self.best = Some(cert);
            }
            return;
        };
        for &v in &cell {
            let split: Vec<usize> = (0..n)
                .map(|u| 2 * colors[u] + usize::from(colors[u] == colors[v] && u != v))
                .collect();
            let refined = self.refine(rank(&split));
            self.search(refined);
            if self.leaves >= LEAF_BUDGET {
                return;
            }
        }
    }
}

fn distinct(colors: &[usize]) -> usize {
    let mut c = colors.to_vec();
    c.sort_unstable();
    c.dedup();
    c.len()
}

/// Identifier-grade canonical key. Equal keys mean isomorphic molecular graphs.
pub fn canonical_key(graph: &MolGraph) -> String {
    if graph.atoms.is_empty() {
        return String::new();
    }
    let labels: Vec<String> = graph.atoms.iter().map(atom_label).collect();
    let mut adj = vec![Vec::new(); graph.atoms.len()];
    let mut edges = Vec::with_capacity(graph.bonds.len());
    for b in &graph.bonds {
        let c = bond_code(b.order);
        adj[b.a].push((b.b, c));
        adj[b.b].push((b.a, c));
        edges.push((b.a, b.b, c));
    }
    let mut ctx = Ctx {
        labels,
        adj,
        edges,
        leaves: 0,
        best: None,
    };
    let initial = ctx.refine(rank(&ctx.labels));
    ctx.search(initial);
    ctx.best.unwrap_or_default()
}
