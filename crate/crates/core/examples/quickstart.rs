//! Builds a small graph by hand, scores it with a fresh network and takes
//! one gradient step.
//!
//! ```text
//! cargo run --example quickstart
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use vcn::graph::Edge;
use vcn::training::{Optimizer, OptimizerKind};
use vcn::{Graph, Mode, ModelConfig, Vcn};

fn main() -> vcn::Result<()> {
    // a 4-cycle with two edge types and a two-value graph descriptor
    let edges = vec![
        Edge::new(0, 1, 0),
        Edge::new(1, 2, 1),
        Edge::new(2, 3, 0),
        Edge::new(3, 0, 1),
    ];
    let nodes = vec![
        vec![1.0, 0.0, 0.5],
        vec![0.0, 1.0, -0.5],
        vec![1.0, 1.0, 0.0],
        vec![0.0, 0.0, 1.0],
    ];
    let g = Graph::new(2, nodes, edges, Some(vec![4.0, 0.25]), Some(true))?;

    let cfg = ModelConfig::for_data(3, 2, 2);
    let mut model = Vcn::new(cfg, &mut ChaCha8Rng::seed_from_u64(0))?;
    println!("parameters: {}", model.store().n_scalars());
    println!("score before: {:.6}", model.score(&g)?);

    let (loss, grads) = model.loss_and_grads(&g, Mode::Eval)?;
    let mut opt = Optimizer::new(OptimizerKind::Adam, model.store());
    opt.step(model.store_mut(), &grads, 0.01)?;
    println!(
        "loss {loss:.6}, score after one Adam step: {:.6}",
        model.score(&g)?
    );

    for (i, h) in model.node_states(&g)?.iter().enumerate().take(2) {
        println!("node {i} final state: {:.3?}", &h[..4]);
    }
    Ok(())
}
