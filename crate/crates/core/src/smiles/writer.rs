use std::fmt::Write;

use super::{Atom, Bond, BondOrder, BondStereo, MolGraph};

/// Writes a graph back to SMILES by depth-first traversal from the lowest
/// unvisited atom of each component. The output reparses to an isomorphic graph.
pub fn to_smiles(graph: &MolGraph) -> String {
    let adj = graph.adjacency();
    let n = graph.atoms.len();

    // Pass 1: classify edges into tree edges and ring closures, in emission order.
    let mut visited = vec![false; n];
    let mut used = vec![false; graph.bonds.len()];
    let mut children: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    let mut closures: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut roots = Vec::new();
    for root in 0..n {
        if visited[root] {
            continue;
        }
        roots.push(root);
        let mut stack = vec![(root, 0usize)];
        visited[root] = true;
        while let Some(&mut (u, ref mut next)) = stack.last_mut() {
            if *next == adj[u].len() {
                stack.pop();
                continue;
            }
            let (v, e) = adj[u][*next];
            *next += 1;
            if used[e] {
                continue;
            }
            used[e] = true;
            if visited[v] {
                closures[v].push(e);
                closures[u].push(e);
            } else {
                visited[v] = true;
                children[u].push((v, e));
                stack.push((v, 0));
            }
        }
    }

    // Pass 2: emit.
    let mut out = String::new();
    let mut open: Vec<Option<usize>> = Vec::new();
    let mut ring_of_bond: Vec<Option<usize>> = vec![None; graph.bonds.len()];
    for (i, &root) in roots.iter().enumerate() {
        if i > 0 {
            out.push('.');
        }
        let mut stack: Vec<Emit> = vec![Emit::Atom(root, None)];
        while let Some(item) = stack.pop() {
            match item {
                Emit::Text(t) => out.push_str(t),
                Emit::Atom(u, via) => {
                    if let Some((from, e)) = via {
                        out.push_str(&bond_symbol(graph, &graph.bonds[e], from));
                    }
                    write_atom(&mut out, &graph.atoms[u]);
                    for &e in &closures[u] {
                        match ring_of_bond[e] {
                            Some(ring) => {
                                write_ring(&mut out, ring);
                                open[ring] = None;
                            }
                            None => {
                                let ring = match open.iter().position(|s| s.is_none()) {
                                    Some(r) => r,
                                    None => {
                                        open.push(None);
                                        open.len() - 1
                                    }
                                };
                                open[ring] = Some(e);
                                ring_of_bond[e] = Some(ring);
                                out.push_str(&bond_symbol(graph, &graph.bonds[e], u));
                                write_ring(&mut out, ring);
                            }
                        }
                    }
                    let kids = &children[u];
                    for (k, &(v, e)) in kids.iter().enumerate().rev() {
                        let last = k + 1 == kids.len();
                        if !last {
                            stack.push(Emit::Text(")"));
                        }
                        stack.push(Emit::Atom(v, Some((u, e))));
                        if !last {
                            stack.push(Emit::Text("("));
                        }
                    }
                }
            }
        }
    }
    out
}

enum Emit {
    Atom(usize, Option<(usize, usize)>),
    Text(&'static str),
}

fn write_ring(out: &mut String, ring: usize) {
    let label = ring + 1;
    if label < 10 {
        let _ = write!(out, "{label}");
    } else {
        debug_assert!(label < 100, "more than 99 simultaneously open rings");
        let _ = write!(out, "%{label:02}");
    }
}

fn bond_symbol(graph: &MolGraph, bond: &Bond, from: usize) -> String {
    let both_aromatic = graph.atoms[bond.a].aromatic && graph.atoms[bond.b].aromatic;
    match bond.order {
        BondOrder::Single => match bond.stereo {
            Some(s) => {
                let s = if from == bond.a { s } else { s.flipped() };
                match s {
                    BondStereo::Up => "/".into(),
                    BondStereo::Down => "\\".into(),
                }
            }
            None if both_aromatic => "-".into(),
            None => String::new(),
        },
        BondOrder::Double => "=".into(),
        BondOrder::Triple => "#".into(),
        BondOrder::Aromatic if both_aromatic => String::new(),
        BondOrder::Aromatic => ":".into(),
    }
}

fn write_atom(out: &mut String, atom: &Atom) {
    let symbol = if atom.aromatic {
        atom.element.to_ascii_lowercase()
    } else {
        atom.element.clone()
    };
    if !atom.needs_brackets() {
        out.push_str(&symbol);
        return;
    }
    out.push('[');
    if let Some(iso) = atom.isotope {
        let _ = write!(out, "{iso}");
    }
    out.push_str(&symbol);
    if let Some(ch) = &atom.chirality {
        out.push_str(ch);
    }
    match atom.hydrogens.unwrap_or(0) {
        0 => {}
        1 => out.push('H'),
        h => {
            let _ = write!(out, "H{h}");
        }
    }
    match atom.charge {
        0 => {}
        1 => out.push('+'),
        -1 => out.push('-'),
        c if c > 0 => {
            let _ = write!(out, "+{c}");
        }
        c => {
            let _ = write!(out, "-{}", -c);
        }
    }
    if let Some(class) = atom.class {
        let _ = write!(out, ":{class}");
    }
    out.push(']');
}
