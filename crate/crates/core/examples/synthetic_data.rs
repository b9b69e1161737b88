//! Generates each synthetic task, re-derives the labels and writes the
//! parity set as JSON lines.
//!
//! ```text
//! cargo run --example synthetic_data -- /tmp/parity.jsonl
//! ```

use std::path::PathBuf;

use vcn::data::{check_label, generate, load, save, SyntheticSpec, Task};

fn main() -> vcn::Result<()> {
    for task in Task::ALL {
        let d = generate(&SyntheticSpec::new(task, 500, 7))?;
        let labels = d.labels()?;
        let agree = d
            .graphs()
            .filter(|g| g.label() == Some(check_label(task, g)))
            .count();
        let nodes: usize = d.graphs().map(|g| g.n_nodes()).sum();
        println!(
            "{task:<18} {} graphs, {} positive, mean size {:.1}, checker agrees on {agree}",
            d.len(),
            labels.iter().filter(|&&l| l).count(),
            nodes as f64 / d.len() as f64
        );
    }
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("parity.jsonl"));
    let d = generate(&SyntheticSpec::new(Task::LongRangeParity, 100, 7))?;
    save(&d, &out)?;
    assert_eq!(load(&out)?, d);
    println!("wrote {}", out.display());
    Ok(())
}
