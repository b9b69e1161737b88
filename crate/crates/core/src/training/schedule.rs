//! Learning-rate halving with early stopping.
//!
//! After every epoch the validation metric is offered to the schedule. A
//! strict improvement is recorded; `patience` epochs in a row without one
//! halve the learning rate (the trainer rolls weights back to the best
//! checkpoint). Training stops once `max_halvings` halvings are used up and
//! patience runs out again, or when `max_epochs` epochs have run.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleConfig {
    pub lr: f64,
    pub patience: usize,
    pub max_halvings: usize,
    pub max_epochs: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Action {
    Continue,
    Halve,
    Stop,
}

/// What the trainer should do after an epoch.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Decision {
    /// The metric strictly beat every earlier one.
    pub improved: bool,
    pub action: Action,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScheduleState {
    pub lr: f64,
    pub best: Option<f64>,
    pub halvings: usize,
    pub epochs: usize,
    /// Consecutive epochs without improvement.
    pub stale: usize,
    config: ScheduleConfig,
}

impl ScheduleState {
    pub fn new(config: ScheduleConfig) -> Result<Self> {
        if !config.lr.is_finite() || config.lr <= 0.0 {
            return Err(Error::Config(format!(
                "learning rate {} must be positive",
                config.lr
            )));
        }
        if config.patience == 0 || config.max_epochs == 0 {
            return Err(Error::Config(
                "patience and max_epochs must be positive".into(),
            ));
        }
        Ok(ScheduleState {
            lr: config.lr,
            best: None,
            halvings: 0,
            epochs: 0,
            stale: 0,
            config,
        })
    }

    pub fn config(&self) -> &ScheduleConfig {
        &self.config
    }

    pub fn update(&mut self, metric: f64) -> Result<Decision> {
        if !metric.is_finite() {
            return Err(Error::NonFinite("validation metric".into()));
        }
        self.epochs += 1;
        let improved = self.best.is_none_or(|b| metric > b);
        let mut action = Action::Continue;
        if improved {
            self.best = Some(metric);
            self.stale = 0;
        } else {
            self.stale += 1;
            if self.stale >= self.config.patience {
                if self.halvings >= self.config.max_halvings {
                    action = Action::Stop;
                } else {
                    self.halvings += 1;
                    self.lr /= 2.0;
                    self.stale = 0;
                    action = Action::Halve;
                }
            }
        }
        if self.epochs >= self.config.max_epochs {
            action = Action::Stop;
        }
        Ok(Decision { improved, action })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> ScheduleConfig {
        ScheduleConfig {
            lr: 0.004,
            patience: 5,
            max_halvings: 4,
            max_epochs: 500,
        }
    }

    fn run(s: &mut ScheduleState, stream: impl Iterator<Item = f64>) -> Vec<Action> {
        let mut out = Vec::new();
        for m in stream {
            let d = s.update(m).unwrap();
            out.push(d.action);
            if d.action == Action::Stop {
                break;
            }
        }
        out
    }

    #[test]
    fn improving_metric_runs_to_epoch_cap() {
        let mut s = ScheduleState::new(cfg()).unwrap();
        let actions = run(&mut s, (0..10_000).map(|i| i as f64));
        assert_eq!(actions.len(), 500);
        assert!(!actions.contains(&Action::Halve));
        assert_eq!(s.halvings, 0);
    }

    #[test]
    fn flat_metric_halves_four_times_then_stops() {
        let mut s = ScheduleState::new(cfg()).unwrap();
        let actions = run(&mut s, std::iter::repeat(0.7));
        let halves: Vec<usize> = actions
            .iter()
            .enumerate()
            .filter(|(_, a)| **a == Action::Halve)
            .map(|(i, _)| i + 1)
            .collect();
        assert_eq!(halves, vec![6, 11, 16, 21]);
        assert_eq!(actions.len(), 26);
        assert_eq!(*actions.last().unwrap(), Action::Stop);
        assert_eq!(s.lr, 0.004 / 16.0);
    }

    #[test]
    fn improvement_resets_patience() {
        let mut s = ScheduleState::new(cfg()).unwrap();
        let stream = [0.5, 0.4, 0.4, 0.4, 0.4, 0.6, 0.4, 0.4, 0.4, 0.4, 0.4];
        let actions = run(&mut s, stream.into_iter());
        assert_eq!(actions[4], Action::Continue);
        assert_eq!(actions[5], Action::Continue);
        assert_eq!(actions[10], Action::Halve);
    }

    #[test]
    fn equal_metric_is_not_an_improvement() {
        let mut s = ScheduleState::new(cfg()).unwrap();
        assert!(s.update(0.5).unwrap().improved);
        assert!(!s.update(0.5).unwrap().improved);
        assert!(s.update(0.5000001).unwrap().improved);
    }

    #[test]
    fn rejects_bad_config_and_metric() {
        assert!(ScheduleState::new(ScheduleConfig { lr: 0.0, ..cfg() }).is_err());
        assert!(ScheduleState::new(ScheduleConfig {
            patience: 0,
            ..cfg()
        })
        .is_err());
        let mut s = ScheduleState::new(cfg()).unwrap();
        assert!(s.update(f64::NAN).is_err());
    }
}
