//! AUC, F1, stratified splits and class rebalancing.
//!
//! ```text
//! cargo run --example metrics
//! ```

use vcn::metrics::{auc, rebalance, split, Confusion, MetricsReport};

fn main() -> vcn::Result<()> {
    let scores = [0.1, 0.4, 0.35, 0.8, 0.5, 0.5];
    let labels = [false, false, true, true, true, false];
    println!("AUC {:.4}", auc(&scores, &labels)?);
    let c = Confusion::at(&scores, &labels, 0.5);
    println!(
        "at 0.5: {c:?}, precision {:.3}, recall {:.3}, F1 {:.3}",
        c.precision(),
        c.recall(),
        c.f1()
    );
    let report = MetricsReport::compute(&scores, &labels, 0.5)?;
    println!("{}", serde_json::to_string(&report).unwrap());

    let labels: Vec<bool> = (0..20).map(|i| i % 4 == 0).collect();
    let s = split(&labels, (0.6, 0.2, 0.2), 3)?;
    println!(
        "split sizes {} / {} / {}",
        s.train.len(),
        s.val.len(),
        s.test.len()
    );

    // 3,026 actives among 38,588 compounds, cut down to 10,000 graphs
    let assay: Vec<bool> = (0..38_588).map(|i| i < 3_026).collect();
    let kept = rebalance(&assay, 10_000, 1)?;
    let pos = kept.iter().filter(|&&i| assay[i]).count();
    println!(
        "rebalanced: {} graphs, {pos} actives, {} inactives",
        kept.len(),
        kept.len() - pos
    );
    Ok(())
}
