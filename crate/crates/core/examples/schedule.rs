//! The learning-rate schedule on a validation curve that plateaus.
//!
//! ```text
//! cargo run --example schedule
//! ```

use vcn::training::{Action, ScheduleConfig, ScheduleState};

fn main() -> vcn::Result<()> {
    let mut s = ScheduleState::new(ScheduleConfig {
        lr: 0.004,
        patience: 5,
        max_halvings: 4,
        max_epochs: 500,
    })?;
    // rises for ten epochs, then stays flat
    for epoch in 1.. {
        let auc = 0.6 + 0.03 * (epoch.min(10) as f64);
        let d = s.update(auc)?;
        if d.action != Action::Continue || d.improved {
            println!(
                "epoch {epoch:>2}: auc {auc:.2} improved {:<5} -> {:?}, lr {}",
                d.improved, d.action, s.lr
            );
        }
        if d.action == Action::Stop {
            break;
        }
    }
    Ok(())
}
