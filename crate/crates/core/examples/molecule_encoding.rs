//! Encodes a pre-tokenized molecule (phenol) and scores it.
//!
//! ```text
//! cargo run --example molecule_encoding
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use vcn::data::{encode_molecule_like, Atom, Bond, BondKind, ATOM_SYMBOLS, MOLECULE_EDGE_TYPES};
use vcn::{ModelConfig, Vcn};

fn main() -> vcn::Result<()> {
    let mut atoms: Vec<Atom> = (0..6).map(|_| Atom::new("C", 3, 1)).collect();
    atoms[0].h_count = 0;
    atoms.push(Atom::new("O", 1, 1));
    let mut bonds: Vec<Bond> = (0..6)
        .map(|i| Bond {
            a: i,
            b: (i + 1) % 6,
            kind: BondKind::Aromatic,
            in_ring: true,
        })
        .collect();
    bonds.push(Bond {
        a: 0,
        b: 6,
        kind: "single".parse()?,
        in_ring: false,
    });
    let g = encode_molecule_like(&atoms, &bonds, Some(true))?;
    println!(
        "{} atoms, {} directed edges, node width {} ({} symbols + degree + H count)",
        g.n_nodes(),
        g.edges().len(),
        g.attr_dim(),
        ATOM_SYMBOLS.len()
    );
    println!("oxygen: {:?}", g.node(6));

    let cfg = ModelConfig::for_data(g.attr_dim(), g.attr_dim(), MOLECULE_EDGE_TYPES);
    let model = Vcn::new(cfg, &mut ChaCha8Rng::seed_from_u64(1))?;
    println!("untrained score {:.4}", model.score(&g)?);
    Ok(())
}
