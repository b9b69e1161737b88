//! Molecule-like graphs from pre-tokenized atoms and bonds.
//!
//! Node attributes are a one-hot atom symbol followed by the atom degree and
//! attached hydrogen count. Each bond becomes two directed edges whose type
//! is `2 * bond_kind + in_ring`.

use std::str::FromStr;

use crate::error::{Error, Result};
use crate::graph::{Edge, Graph};

pub const ATOM_SYMBOLS: [&str; 10] = ["C", "N", "O", "S", "F", "Cl", "Br", "I", "P", "B"];

/// Bond kinds times the ring flag.
pub const MOLECULE_EDGE_TYPES: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BondKind {
    Single = 0,
    Double = 1,
    Triple = 2,
    Aromatic = 3,
}

impl FromStr for BondKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "single" | "-" => Ok(BondKind::Single),
            "double" | "=" => Ok(BondKind::Double),
            "triple" | "#" => Ok(BondKind::Triple),
            "aromatic" | ":" => Ok(BondKind::Aromatic),
            _ => Err(Error::Unknown {
                kind: "bond kind",
                name: s.into(),
            }),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Atom {
    pub symbol: String,
    pub degree: u32,
    pub h_count: u32,
}

impl Atom {
    pub fn new(symbol: &str, degree: u32, h_count: u32) -> Self {
        Atom {
            symbol: symbol.into(),
            degree,
            h_count,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bond {
    pub a: usize,
    pub b: usize,
    pub kind: BondKind,
    pub in_ring: bool,
}

impl Bond {
    pub fn edge_type(&self) -> usize {
        self.kind as usize * 2 + self.in_ring as usize
    }
}

pub fn encode_molecule_like(atoms: &[Atom], bonds: &[Bond], label: Option<bool>) -> Result<Graph> {
    if atoms.is_empty() {
        return Err(Error::InvalidGraph("molecule has no atoms".into()));
    }
    let nodes = atoms
        .iter()
        .map(|atom| {
            let slot = ATOM_SYMBOLS
                .iter()
                .position(|s| *s == atom.symbol)
                .ok_or_else(|| Error::Unknown {
                    kind: "atom symbol",
                    name: atom.symbol.clone(),
                })?;
            let mut x = vec![0.0; ATOM_SYMBOLS.len() + 2];
            x[slot] = 1.0;
            x[ATOM_SYMBOLS.len()] = atom.degree as f64;
            x[ATOM_SYMBOLS.len() + 1] = atom.h_count as f64;
            Ok(x)
        })
        .collect::<Result<Vec<_>>>()?;
    let edges = bonds
        .iter()
        .flat_map(|b| {
            let t = b.edge_type();
            [Edge::new(b.a, b.b, t), Edge::new(b.b, b.a, t)]
        })
        .collect();
    Graph::new(MOLECULE_EDGE_TYPES, nodes, edges, None, label)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_atoms_single_bond() {
        let atoms = [Atom::new("C", 1, 3), Atom::new("O", 1, 1)];
        let bond = Bond {
            a: 0,
            b: 1,
            kind: BondKind::Single,
            in_ring: false,
        };
        let g = encode_molecule_like(&atoms, &[bond], None).unwrap();
        assert_eq!(g.n_nodes(), 2);
        assert_eq!(g.edges(), &[Edge::new(0, 1, 0), Edge::new(1, 0, 0)]);
        assert_eq!(g.node(0)[0], 1.0);
        assert_eq!(&g.node(0)[10..], &[1.0, 3.0]);
        assert_eq!(g.node(1)[2], 1.0);
    }

    #[test]
    fn ring_bonds_use_ring_type() {
        let atoms: Vec<Atom> = (0..6).map(|_| Atom::new("C", 2, 1)).collect();
        let bonds: Vec<Bond> = (0..6)
            .map(|i| Bond {
                a: i,
                b: (i + 1) % 6,
                kind: BondKind::Aromatic,
                in_ring: true,
            })
            .collect();
        let g = encode_molecule_like(&atoms, &bonds, Some(true)).unwrap();
        assert_eq!(g.edges().len(), 12);
        assert!(g.edges().iter().all(|e| e.kind == 7));
        let chain = Bond {
            in_ring: false,
            ..bonds[0]
        };
        assert_eq!(chain.edge_type(), 6);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(encode_molecule_like(&[], &[], None).is_err());
        assert!(encode_molecule_like(&[Atom::new("Xx", 0, 0)], &[], None).is_err());
        let bond = Bond {
            a: 0,
            b: 3,
            kind: BondKind::Double,
            in_ring: false,
        };
        assert!(encode_molecule_like(&[Atom::new("N", 1, 0)], &[bond], None).is_err());
        assert!("quadruple".parse::<BondKind>().is_err());
        assert_eq!("=".parse::<BondKind>().unwrap(), BondKind::Double);
    }
}
