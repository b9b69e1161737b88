//! Compares tape gradients with central finite differences on random small
//! graphs, then shows that a corrupted gradient is caught.
//!
//! ```text
//! cargo run --release --example gradient_check
//! ```

use vcn::gradcheck::{self, TOLERANCE};

fn main() -> vcn::Result<()> {
    let report = gradcheck::run(0, 20, None)?;
    println!(
        "{} graphs, {} scalars: max relative error {:.2e} ({}), tolerance {TOLERANCE:e}",
        report.graphs, report.scalars, report.max_rel_error, report.worst_param
    );
    let faulty = gradcheck::run(0, 3, Some("node.cand.w"))?;
    println!(
        "with a corrupted node.cand.w gradient: {:.2e} in {} -> {}",
        faulty.max_rel_error,
        faulty.worst_param,
        if faulty.passed() { "missed" } else { "caught" }
    );
    Ok(())
}
