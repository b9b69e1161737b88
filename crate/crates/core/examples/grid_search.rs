//! Small hyperparameter search on the triangle task.
//!
//! ```text
//! cargo run --release --example grid_search
//! ```

use vcn::data::{generate, SyntheticSpec, Task};
use vcn::metrics::split;
use vcn::training::{evaluate, grid_search, OptimizerKind, SearchGrid, TrainConfig};
use vcn::ModelConfig;

fn main() -> vcn::Result<()> {
    let all = generate(&SyntheticSpec::new(Task::Triangle, 600, 2))?;
    let s = split(&all.labels()?, (0.7, 0.15, 0.15), 2)?;
    let (train, val, test) = (
        all.subset(&s.train),
        all.subset(&s.val),
        all.subset(&s.test),
    );

    let mut base = TrainConfig::new(
        ModelConfig {
            steps: 4,
            ..ModelConfig::for_data(2, 2, 1)
        },
        0.002,
    );
    base.batch_size = 25;
    base.max_epochs = 40;
    let grid = SearchGrid {
        d_h: vec![8, 16],
        d_v: vec![8],
        lr: vec![0.002, 0.005],
        optimizer: vec![OptimizerKind::Adam],
    };
    let result = grid_search(&base, &grid, &train, &val)?;
    for t in &result.trials {
        println!(
            "d_h {:>2} lr {:.3}: val AUC {:.4}",
            t.config.model.d_h, t.config.lr, t.best_val_auc
        );
    }
    let (_, report) = evaluate(&result.best.model, &test, 1)?;
    println!(
        "picked d_h {} lr {} -> test AUC {:.4}",
        result.best_config.model.d_h, result.best_config.lr, report.auc
    );
    Ok(())
}
