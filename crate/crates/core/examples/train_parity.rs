//! Trains the virtual-column model and the mean-pool baseline on the
//! long-range parity task, then on the attribute-majority control.
//!
//! ```text
//! cargo run --release --example train_parity [seed]
//! ```

use std::time::Instant;

use vcn::data::{generate, Dataset, SyntheticSpec, Task};
use vcn::metrics::split;
use vcn::training::{evaluate, init_model, train, TrainConfig};
use vcn::{ModelConfig, Readout};

fn three_way(task: Task, seed: u64) -> vcn::Result<(Dataset, Dataset, Dataset)> {
    let all = generate(&SyntheticSpec::new(task, 1400, seed))?;
    let s = split(&all.labels()?, (5.0 / 7.0, 1.0 / 7.0, 1.0 / 7.0), seed)?;
    Ok((
        all.subset(&s.train),
        all.subset(&s.val),
        all.subset(&s.test),
    ))
}

fn config(readout: Readout, seed: u64) -> TrainConfig {
    let model = ModelConfig {
        d_h: 8,
        d_v: 8,
        steps: 3,
        use_virtual: readout == Readout::Virtual,
        readout,
        ..ModelConfig::for_data(2, 2, 1)
    };
    let mut cfg = TrainConfig::new(model, 0.005);
    cfg.batch_size = 20;
    cfg.max_epochs = 200;
    cfg.seed = seed;
    cfg
}

fn main() -> vcn::Result<()> {
    let seed: u64 = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(1);
    for task in [Task::LongRangeParity, Task::AttrMajority] {
        let (tr, va, te) = three_way(task, seed)?;
        for readout in [Readout::Virtual, Readout::Mean] {
            let start = Instant::now();
            let cfg = config(readout, seed);
            let out = train(init_model(&cfg)?, &tr, &va, &cfg)?;
            let (_, test) = evaluate(&out.model, &te, 1)?;
            println!(
                "{task:<18} {readout:?}: test AUC {:.4}, best epoch {} of {}, {:.1}s",
                test.auc,
                out.best_epoch,
                out.history.len(),
                start.elapsed().as_secs_f64()
            );
        }
    }
    Ok(())
}
