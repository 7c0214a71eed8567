//! Seeded random inputs.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use sarline_core::metrics::{TableNode, Tree};
use sarline_core::tableparse::{render_table_html, Cell, TableTree};

const TEXTS: [&str; 9] = ["", "a", "ab", "ba", "abc", "5", "12a", "IC50", "nM"];

fn random_label(rng: &mut ChaCha8Rng) -> TableNode {
    match rng.random_range(0..4) {
        0 => TableNode::Table,
        1 => TableNode::Row,
        _ => TableNode::Cell {
            tag: if rng.random_bool(0.7) { "td" } else { "th" }.to_string(),
            rowspan: rng.random_range(1..=2),
            colspan: if rng.random_bool(0.8) { 1 } else { 2 },
            text: TEXTS[rng.random_range(0..TEXTS.len())].to_string(),
        },
    }
}

/// Random ordered tree with `1..=max_nodes` nodes: each new node is appended as
/// the last child of a uniformly chosen earlier node.
pub fn random_tree(rng: &mut ChaCha8Rng, max_nodes: usize) -> Tree<TableNode> {
    let n = rng.random_range(1..=max_nodes);
    let labels: Vec<TableNode> = (0..n).map(|_| random_label(rng)).collect();
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
    for k in 1..n {
        let p = rng.random_range(0..k);
        children[p].push(k);
    }
    fn build(i: usize, labels: &[TableNode], children: &[Vec<usize>]) -> Tree<TableNode> {
        Tree::node(
            labels[i].clone(),
            children[i].iter().map(|&c| build(c, labels, children)).collect(),
        )
    }
    build(0, &labels, &children)
}

/// Random table markup of up to 4 rows and 4 cells per row.
pub fn random_table_html(rng: &mut ChaCha8Rng) -> String {
    let rows = (0..rng.random_range(1..=4))
        .map(|_| {
            (0..rng.random_range(1..=4))
                .map(|_| {
                    let text = TEXTS[rng.random_range(0..TEXTS.len())];
                    Cell::new(rng.random_bool(0.2), text, 1, if rng.random_bool(0.9) { 1 } else { 2 })
                })
                .collect()
        })
        .collect();
    render_table_html(&TableTree::from_rows(rows))
}

/// Atom spelling and whether the parser reads it as aromatic.
const ATOMS: [(&str, bool); 14] = [
    ("C", false),
    ("C", false),
    ("C", false),
    ("N", false),
    ("O", false),
    ("S", false),
    ("F", false),
    ("Cl", false),
    ("c", true),
    ("c", true),
    ("n", true),
    ("[NH4+]", false),
    ("[O-]", false),
    ("[13C]", false),
];

const EXTRA_ATOMS: [(&str, bool); 3] = [("Br", false), ("o", true), ("[nH]", true)];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Order {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl Order {
    fn symbol(self) -> char {
        match self {
            Order::Single => '-',
            Order::Double => '=',
            Order::Triple => '#',
            Order::Aromatic => ':',
        }
    }
}

/// Molecule graph independent of the library's types.
#[derive(Debug, Clone)]
pub struct Mol {
    pub atoms: Vec<(&'static str, bool)>,
    pub edges: Vec<(usize, usize, Order)>,
}

fn random_order(rng: &mut ChaCha8Rng) -> Order {
    match rng.random_range(0..10) {
        0..=4 => Order::Single,
        5 | 6 => Order::Double,
        7 => Order::Triple,
        _ => Order::Aromatic,
    }
}

fn random_atom(rng: &mut ChaCha8Rng) -> (&'static str, bool) {
    if rng.random_bool(0.1) {
        EXTRA_ATOMS[rng.random_range(0..EXTRA_ATOMS.len())]
    } else {
        ATOMS[rng.random_range(0..ATOMS.len())]
    }
}

impl Mol {
    fn has_edge(&self, a: usize, b: usize) -> bool {
        self.edges.iter().any(|&(x, y, _)| (x, y) == (a, b) || (x, y) == (b, a))
    }

    /// Random molecule of `1..=max_atoms` atoms in one or two components, with
    /// up to three ring bonds.
    pub fn random(rng: &mut ChaCha8Rng, max_atoms: usize) -> Mol {
        let n = rng.random_range(1..=max_atoms);
        let atoms: Vec<_> = (0..n).map(|_| random_atom(rng)).collect();
        let split = if n >= 4 && rng.random_bool(0.15) { rng.random_range(2..n - 1) } else { n };
        let mut m = Mol { atoms, edges: Vec::new() };
        for k in 1..n {
            let lo = if k >= split { split } else { 0 };
            if k == split {
                continue;
            }
            let p = rng.random_range(lo..k);
            m.edges.push((p, k, random_order(rng)));
        }
        for _ in 0..rng.random_range(0..=3) {
            let a = rng.random_range(0..n);
            let b = rng.random_range(0..n);
            if a != b && !m.has_edge(a, b) && (a < split) == (b < split) {
                m.edges.push((a, b, random_order(rng)));
            }
        }
        m
    }

    /// A copy with one atom, one bond order or one bond endpoint changed.
    pub fn mutate(&self, rng: &mut ChaCha8Rng) -> Mol {
        let mut m = self.clone();
        match rng.random_range(0..3) {
            0 if !m.edges.is_empty() => {
                let i = rng.random_range(0..m.edges.len());
                m.edges[i].2 = random_order(rng);
            }
            1 if !m.edges.is_empty() => {
                let i = rng.random_range(0..m.edges.len());
                let (a, _, o) = m.edges[i];
                let b = rng.random_range(0..m.atoms.len());
                m.edges.remove(i);
                if a != b && !m.has_edge(a, b) {
                    m.edges.push((a, b, o));
                } else {
                    m.edges.insert(i, self.edges[i]);
                }
            }
            _ => {
                let i = rng.random_range(0..m.atoms.len());
                m.atoms[i] = random_atom(rng);
            }
        }
        m
    }

    /// Writes SMILES from a random depth-first traversal with random branch
    /// order. Bond symbols are spelled out unless the implicit bond means the same.
    pub fn write(&self, rng: &mut ChaCha8Rng) -> String {
        let n = self.atoms.len();
        let mut adj: Vec<Vec<(usize, Order)>> = vec![Vec::new(); n];
        for &(a, b, o) in &self.edges {
            adj[a].push((b, o));
            adj[b].push((a, o));
        }
        for l in &mut adj {
            l.shuffle(rng);
        }
        let mut starts: Vec<usize> = (0..n).collect();
        starts.shuffle(rng);

        // Depth-first tree and ring bonds.
        let mut visited = vec![false; n];
        let mut tree_children: Vec<Vec<(usize, Order)>> = vec![Vec::new(); n];
        let mut ring_bonds: Vec<(usize, usize, Order)> = Vec::new();
        let mut roots = Vec::new();
        let mut depth = vec![0usize; n];
        for &s in &starts {
            if visited[s] {
                continue;
            }
            roots.push(s);
            fn dfs(
                u: usize,
                parent: Option<usize>,
                adj: &[Vec<(usize, Order)>],
                visited: &mut [bool],
                depth: &mut [usize],
                tree_children: &mut [Vec<(usize, Order)>],
                ring_bonds: &mut Vec<(usize, usize, Order)>,
            ) {
                visited[u] = true;
                for &(v, o) in &adj[u] {
                    if Some(v) == parent {
                        continue;
                    }
                    if !visited[v] {
                        depth[v] = depth[u] + 1;
                        tree_children[u].push((v, o));
                        dfs(v, Some(u), adj, visited, depth, tree_children, ring_bonds);
                    } else if depth[v] < depth[u] {
                        ring_bonds.push((v, u, o));
                    }
                }
            }
            dfs(s, None, &adj, &mut visited, &mut depth, &mut tree_children, &mut ring_bonds);
        }

        let mut out = String::new();
        let mut open: Vec<Option<usize>> = vec![None; 10];
        for (i, &r) in roots.iter().enumerate() {
            if i > 0 {
                out.push('.');
            }
            self.emit(r, &tree_children, &ring_bonds, &mut open, &mut out, rng);
        }
        out
    }

    fn bond(&self, a: usize, b: usize, o: Order, rng: &mut ChaCha8Rng) -> String {
        let implicit = if self.atoms[a].1 && self.atoms[b].1 { Order::Aromatic } else { Order::Single };
        if o == implicit && rng.random_bool(0.5) {
            String::new()
        } else {
            o.symbol().to_string()
        }
    }

    fn emit(
        &self,
        u: usize,
        children: &[Vec<(usize, Order)>],
        ring_bonds: &[(usize, usize, Order)],
        open: &mut [Option<usize>],
        out: &mut String,
        rng: &mut ChaCha8Rng,
    ) {
        out.push_str(self.atoms[u].0);
        // Close rings opened by ancestors, then open rings to descendants.
        for (k, &(_, desc, _)) in ring_bonds.iter().enumerate() {
            if desc == u {
                let d = open.iter().position(|s| *s == Some(k)).expect("ring opened");
                open[d] = None;
                out.push(char::from(b'0' + d as u8));
            }
        }
        for (k, &(anc, desc, o)) in ring_bonds.iter().enumerate() {
            if anc == u {
                let d = (1..open.len()).find(|&d| open[d].is_none()).expect("ring digit free");
                open[d] = Some(k);
                out.push_str(&self.bond(anc, desc, o, rng));
                out.push(char::from(b'0' + d as u8));
            }
        }
        let kids = &children[u];
        for (i, &(v, o)) in kids.iter().enumerate() {
            let last = i + 1 == kids.len();
            if !last {
                out.push('(');
            }
            out.push_str(&self.bond(u, v, o, rng));
            self.emit(v, children, ring_bonds, open, out, rng);
            if !last {
                out.push(')');
            }
        }
    }
}

/// Pairs that colour refinement alone cannot separate, plus highly symmetric cages.
pub const HARD_CASES: [&str; 12] = [
    "C1CCCCC1",
    "C1CC1.C1CC1",
    "C1CCCCCCC1",
    "C1CCC1.C1CCC1",
    "C1CC1.C1CCCC1",
    "C1CC2CCC2C1",
    "C12C3C4C1C5C2C3C45",
    "C1C2C3C1C1C2C31",
    "c1ccccc1",
    "C1=CC=CC=C1",
    "C1CC2CC1C2",
    "C1CCC2(C1)CC2",
];
