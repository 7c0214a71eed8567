//! SMILES validation, heavy-atom counting and identifier-grade canonicalization.
//!
//! The parser accepts the organic subset, bracket atoms, branches, ring
//! closures (`1`..`9`, `%nn`), explicit bonds and dot-disconnected components.
//! No valence model is applied: a syntactically valid string is accepted even
//! when the chemistry is odd.

mod canon;
mod writer;

pub use canon::canonical_key;
pub use writer::to_smiles;

use std::collections::BTreeMap;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SmilesError {
    #[error("empty SMILES string")]
    EmptyInput,
    #[error("unmatched parenthesis at {0}")]
    UnmatchedParenthesis(usize),
    #[error("ring bond {0} is never closed")]
    UnclosedRingBond(u32),
    #[error("illegal character at {0}")]
    IllegalCharacter(usize),
    #[error("malformed bracket atom at {0}")]
    MalformedBracketAtom(usize),
    #[error("ring closure at {0} bonds an atom to itself or duplicates a bond")]
    InvalidRingBond(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, JsonSchema)]
pub enum BondOrder {
    Single,
    Double,
    Triple,
    Aromatic,
}

/// Directional bond marker (`/` is `Up`, `\` is `Down`), relative to `a -> b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, JsonSchema)]
pub enum BondStereo {
    Up,
    Down,
}

impl BondStereo {
    fn flipped(self) -> Self {
        match self {
            BondStereo::Up => BondStereo::Down,
            BondStereo::Down => BondStereo::Up,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize, JsonSchema)]
pub struct Atom {
    pub element: String,
    pub aromatic: bool,
    pub charge: i8,
    pub isotope: Option<u16>,
    /// Explicit hydrogen count; `None` for organic-subset atoms written without brackets.
    pub hydrogens: Option<u8>,
    /// Chirality marker as written (`@`, `@@`, `@TH1`, ...). Preserved, never interpreted.
    pub chirality: Option<String>,
    pub class: Option<u32>,
}

impl Atom {
    pub fn organic(element: &str, aromatic: bool) -> Self {
        Self {
            element: element.to_string(),
            aromatic,
            charge: 0,
            isotope: None,
            hydrogens: None,
            chirality: None,
            class: None,
        }
    }

    pub fn is_hydrogen(&self) -> bool {
        self.element == "H"
    }

    fn needs_brackets(&self) -> bool {
        self.hydrogens.is_some()
            || self.charge != 0
            || self.isotope.is_some()
            || self.chirality.is_some()
            || self.class.is_some()
            || !is_organic_subset(&self.element, self.aromatic)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize, JsonSchema)]
pub struct Bond {
    pub a: usize,
    pub b: usize,
    pub order: BondOrder,
    pub stereo: Option<BondStereo>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize, JsonSchema)]
pub struct MolGraph {
    pub atoms: Vec<Atom>,
    pub bonds: Vec<Bond>,
    pub ring_closures_resolved: bool,
}

impl MolGraph {
    /// Neighbor lists as `(neighbor, bond index)`, in bond order.
    pub fn adjacency(&self) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.atoms.len()];
        for (i, bond) in self.bonds.iter().enumerate() {
            adj[bond.a].push((bond.b, i));
            adj[bond.b].push((bond.a, i));
        }
        adj
    }
}

/// Non-hydrogen atoms; implicit hydrogens are never counted.
pub fn heavy_atom_count(graph: &MolGraph) -> usize {
    graph.atoms.iter().filter(|a| !a.is_hydrogen()).count()
}

/// True when `s` is accepted by [`parse_smiles`].
pub fn is_valid_smiles(s: &str) -> bool {
    parse_smiles(s).is_ok()
}

const ELEMENTS: [&str; 118] = [
    "H", "He", "Li", "Be", "B", "C", "N", "O", "F", "Ne", "Na", "Mg", "Al", "Si", "P", "S", "Cl",
    "Ar", "K", "Ca", "Sc", "Ti", "V", "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn", "Ga", "Ge", "As",
    "Se", "Br", "Kr", "Rb", "Sr", "Y", "Zr", "Nb", "Mo", "Tc", "Ru", "Rh", "Pd", "Ag", "Cd", "In",
    "Sn", "Sb", "Te", "I", "Xe", "Cs", "Ba", "La", "Ce", "Pr", "Nd", "Pm", "Sm", "Eu", "Gd", "Tb",
    "Dy", "Ho", "Er", "Tm", "Yb", "Lu", "Hf", "Ta", "W", "Re", "Os", "Ir", "Pt", "Au", "Hg", "Tl",
    "Pb", "Bi", "Po", "At", "Rn", "Fr", "Ra", "Ac", "Th", "Pa", "U", "Np", "Pu", "Am", "Cm", "Bk",
    "Cf", "Es", "Fm", "Md", "No", "Lr", "Rf", "Db", "Sg", "Bh", "Hs", "Mt", "Ds", "Rg", "Cn", "Nh",
    "Fl", "Mc", "Lv", "Ts", "Og",
];

const AROMATIC_BRACKET: [&str; 9] = ["se", "as", "te", "b", "c", "n", "o", "p", "s"];

fn is_organic_subset(element: &str, aromatic: bool) -> bool {
    if aromatic {
        matches!(element, "B" | "C" | "N" | "O" | "P" | "S")
    } else {
        matches!(element, "B" | "C" | "N" | "O" | "P" | "S" | "F" | "Cl" | "Br" | "I")
    }
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_ascii_uppercase().to_string() + c.as_str(),
        None => String::new(),
    }
}

#[derive(Clone, Copy)]
struct PendingBond {
    order: BondOrder,
    stereo: Option<BondStereo>,
    pos: usize,
}

struct OpenRing {
    atom: usize,
    bond: Option<PendingBond>,
}

struct Parser<'a> {
    input: &'a [u8],
    pos: usize,
    graph: MolGraph,
    prev: Option<usize>,
    pending: Option<PendingBond>,
    /// `(branch root, position of '(', atom count when opened)`
    branches: Vec<(usize, usize, usize)>,
    rings: BTreeMap<u32, (OpenRing, usize)>,
    dot_at: Option<usize>,
}

/// Parses a SMILES string into a molecular graph.
pub fn parse_smiles(s: &str) -> Result<MolGraph, SmilesError> {
    parse_smiles_bytes(s.as_bytes())
}

/// Byte-level entry point; never panics on arbitrary input.
pub fn parse_smiles_bytes(input: &[u8]) -> Result<MolGraph, SmilesError> {
    if input.is_empty() {
        return Err(SmilesError::EmptyInput);
    }
    let mut p = Parser {
        input,
        pos: 0,
        graph: MolGraph::default(),
        prev: None,
        pending: None,
        branches: Vec::new(),
        rings: BTreeMap::new(),
        dot_at: None,
    };
    p.run()?;
    p.graph.ring_closures_resolved = true;
    Ok(p.graph)
}

impl Parser<'_> {
    fn peek(&self) -> Option<u8> {
        self.input.get(self.pos).copied()
    }

    fn peek_at(&self, offset: usize) -> Option<u8> {
        self.input.get(self.pos + offset).copied()
    }

    fn run(&mut self) -> Result<(), SmilesError> {
        while let Some(c) = self.peek() {
            let start = self.pos;
            match c {
                b'B' | b'C' | b'N' | b'O' | b'P' | b'S' | b'F' | b'I' | b'b' | b'c' | b'n'
                | b'o' | b'p' | b's' => {
                    let (element, aromatic, len) = match (c, self.peek_at(1)) {
                        (b'B', Some(b'r')) => ("Br".to_string(), false, 2),
                        (b'C', Some(b'l')) => ("Cl".to_string(), false, 2),
                        (c, _) if c.is_ascii_lowercase() => {
                            ((c.to_ascii_uppercase() as char).to_string(), true, 1)
                        }
                        (c, _) => ((c as char).to_string(), false, 1),
                    };
                    self.pos += len;
                    self.add_atom(Atom::organic(&element, aromatic));
                }
                b'[' => {
                    let atom = self.bracket_atom()?;
                    self.add_atom(atom);
                }
                b'(' => {
                    let root = self.prev.ok_or(SmilesError::IllegalCharacter(start))?;
                    if self.pending.is_some() {
                        return Err(SmilesError::IllegalCharacter(start));
                    }
                    self.branches.push((root, start, self.graph.atoms.len()));
                    self.pos += 1;
                }
                b')' => {
                    let (root, _, atoms_at_open) = self
                        .branches
                        .pop()
                        .ok_or(SmilesError::UnmatchedParenthesis(start))?;
                    if self.pending.is_some()
                        || self.graph.atoms.len() == atoms_at_open
                        || self.dot_at.is_some()
                    {
                        return Err(SmilesError::IllegalCharacter(start));
                    }
                    self.prev = Some(root);
                    self.pos += 1;
                }
                b'-' | b'=' | b'#' | b':' | b'/' | b'\\' => {
                    if self.prev.is_none() || self.pending.is_some() {
                        return Err(SmilesError::IllegalCharacter(start));
                    }
                    let (order, stereo) = match c {
                        b'-' => (BondOrder::Single, None),
                        b'=' => (BondOrder::Double, None),
                        b'#' => (BondOrder::Triple, None),
                        b':' => (BondOrder::Aromatic, None),
                        b'/' => (BondOrder::Single, Some(BondStereo::Up)),
                        _ => (BondOrder::Single, Some(BondStereo::Down)),
                    };
                    self.pending = Some(PendingBond {
                        order,
                        stereo,
                        pos: start,
                    });
                    self.pos += 1;
                }
                b'.' => {
                    if self.prev.is_none() || self.pending.is_some() {
                        return Err(SmilesError::IllegalCharacter(start));
                    }
                    self.prev = None;
                    self.dot_at = Some(start);
                    self.pos += 1;
                }
                b'0'..=b'9' | b'%' => self.ring_bond()?,
                _ => return Err(SmilesError::IllegalCharacter(start)),
            }
        }
        if let Some(p) = self.pending {
            return Err(SmilesError::IllegalCharacter(p.pos));
        }
        if let Some(&(_, open, _)) = self.branches.last() {
            return Err(SmilesError::UnmatchedParenthesis(open));
        }
        if let Some((_, (_, pos))) = self.rings.iter().min_by_key(|(_, (_, pos))| *pos) {
            let digit = self
                .rings
                .iter()
                .find(|(_, (_, p))| p == pos)
                .map(|(d, _)| *d)
                .unwrap_or_default();
            return Err(SmilesError::UnclosedRingBond(digit));
        }
        if let Some(dot) = self.dot_at {
            return Err(SmilesError::IllegalCharacter(dot));
        }
        Ok(())
    }

    fn add_atom(&mut self, atom: Atom) {
        let idx = self.graph.atoms.len();
        let aromatic = atom.aromatic;
        self.graph.atoms.push(atom);
        if let Some(prev) = self.prev {
            let (order, stereo) = match self.pending.take() {
                Some(p) => (p.order, p.stereo),
                None => (self.implicit_order(prev, aromatic), None),
            };
            self.graph.bonds.push(Bond {
                a: prev,
                b: idx,
                order,
                stereo,
            });
        }
        self.dot_at = None;
        self.prev = Some(idx);
    }

    fn implicit_order(&self, a: usize, b_aromatic: bool) -> BondOrder {
        if self.graph.atoms[a].aromatic && b_aromatic {
            BondOrder::Aromatic
        } else {
            BondOrder::Single
        }
    }

    fn ring_bond(&mut self) -> Result<(), SmilesError> {
        let start = self.pos;
        let atom = self.prev.ok_or(SmilesError::IllegalCharacter(start))?;
        let digit = if self.peek() == Some(b'%') {
            match (self.peek_at(1), self.peek_at(2)) {
                (Some(d1), Some(d2)) if d1.is_ascii_digit() && d2.is_ascii_digit() => {
                    self.pos += 3;
                    u32::from(d1 - b'0') * 10 + u32::from(d2 - b'0')
                }
                _ => return Err(SmilesError::IllegalCharacter(start)),
            }
        } else {
            let d = self.peek().expect("caller saw a digit");
            self.pos += 1;
            u32::from(d - b'0')
        };
        let here = self.pending.take();
        match self.rings.remove(&digit) {
            Some((open, _)) => {
                let other = open.atom;
                let duplicate = self
                    .graph
                    .bonds
                    .iter()
                    .any(|b| (b.a == other && b.b == atom) || (b.a == atom && b.b == other));
                if other == atom || duplicate {
                    return Err(SmilesError::InvalidRingBond(start));
                }
                let (order, stereo) = match (open.bond, here) {
                    (Some(o), _) => (o.order, o.stereo),
                    (None, Some(h)) => (h.order, h.stereo.map(BondStereo::flipped)),
                    (None, None) => {
                        let aromatic = self.graph.atoms[atom].aromatic;
                        (self.implicit_order(other, aromatic), None)
                    }
                };
                self.graph.bonds.push(Bond {
                    a: other,
                    b: atom,
                    order,
                    stereo,
                });
            }
            None => {
                self.rings.insert(digit, (OpenRing { atom, bond: here }, start));
            }
        }
        Ok(())
    }

    fn bracket_atom(&mut self) -> Result<Atom, SmilesError> {
        let open = self.pos;
        let bad = SmilesError::MalformedBracketAtom(open);
        self.pos += 1;

        let isotope = self.number(4).map_err(|_| bad.clone())?;
        let isotope = match isotope {
            Some(v) => Some(u16::try_from(v).map_err(|_| bad.clone())?),
            None => None,
        };

        let (element, aromatic) = self.element_symbol().ok_or_else(|| bad.clone())?;

        let chirality = if self.peek() == Some(b'@') {
            let s = self.pos;
            self.pos += 1;
            if self.peek() == Some(b'@') {
                self.pos += 1;
            } else {
                let rest = &self.input[self.pos..];
                for class in [&b"TH"[..], b"AL", b"SP", b"TB", b"OH"] {
                    if rest.starts_with(class) {
                        self.pos += 2;
                        if self.number(2).map_err(|_| bad.clone())?.is_none() {
                            return Err(bad);
                        }
                        break;
                    }
                }
            }
            Some(String::from_utf8_lossy(&self.input[s..self.pos]).into_owned())
        } else {
            None
        };

        let hydrogens = if self.peek() == Some(b'H') {
            self.pos += 1;
            match self.peek() {
                Some(d) if d.is_ascii_digit() => {
                    self.pos += 1;
                    d - b'0'
                }
                _ => 1,
            }
        } else {
            0
        };

        let charge: i8 = match self.peek() {
            Some(sign @ (b'+' | b'-')) => {
                self.pos += 1;
                let unit: i8 = if sign == b'+' { 1 } else { -1 };
                if self.peek() == Some(sign) {
                    self.pos += 1;
                    2 * unit
                } else {
                    match self.number(2).map_err(|_| bad.clone())? {
                        Some(n) if n <= 15 => unit * n as i8,
                        Some(_) => return Err(bad),
                        None => unit,
                    }
                }
            }
            _ => 0,
        };

        let class = if self.peek() == Some(b':') {
            self.pos += 1;
            Some(self.number(6).map_err(|_| bad.clone())?.ok_or_else(|| bad.clone())?)
        } else {
            None
        };

        if self.peek() != Some(b']') {
            return Err(bad);
        }
        self.pos += 1;
        Ok(Atom {
            element,
            aromatic,
            charge,
            isotope,
            hydrogens: Some(hydrogens),
            chirality,
            class,
        })
    }

    /// Up to `max_digits` decimal digits; more is an error.
    fn number(&mut self, max_digits: usize) -> Result<Option<u32>, ()> {
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        let digits = &self.input[start..self.pos];
        if digits.is_empty() {
            return Ok(None);
        }
        if digits.len() > max_digits {
            return Err(());
        }
        Ok(Some(
            digits
                .iter()
                .fold(0u32, |acc, d| acc * 10 + u32::from(d - b'0')),
        ))
    }

    fn element_symbol(&mut self) -> Option<(String, bool)> {
        let rest = &self.input[self.pos..];
        let first = *rest.first()?;
        if first.is_ascii_lowercase() {
            for sym in AROMATIC_BRACKET {
                if rest.starts_with(sym.as_bytes()) {
                    self.pos += sym.len();
                    return Some((capitalize(sym), true));
                }
            }
            return None;
        }
        if !first.is_ascii_uppercase() {
            return None;
        }
        if let Some(&second) = rest.get(1) {
            if second.is_ascii_lowercase() {
                let two = [first, second];
                let two = std::str::from_utf8(&two).ok()?;
                if ELEMENTS.contains(&two) {
                    self.pos += 2;
                    return Some((two.to_string(), false));
                }
            }
        }
        let one = (first as char).to_string();
        if ELEMENTS.contains(&one.as_str()) {
            self.pos += 1;
            return Some((one, false));
        }
        None
    }
}
