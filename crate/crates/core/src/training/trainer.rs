use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::optim::{Optimizer, OptimizerKind};
use super::schedule::{Action, ScheduleConfig, ScheduleState};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::metrics::{MetricsReport, DEFAULT_THRESHOLD};
use crate::model::{Mode, ModelConfig, Vcn};
use crate::numerics::Gradients;

fn default_batch() -> usize {
    100
}
fn default_epochs() -> usize {
    500
}
fn default_halvings() -> usize {
    4
}
fn default_patience() -> usize {
    5
}
fn default_threads() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub model: ModelConfig,
    pub lr: f64,
    #[serde(default)]
    pub optimizer: OptimizerKind,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_epochs")]
    pub max_epochs: usize,
    #[serde(default = "default_halvings")]
    pub max_halvings: usize,
    #[serde(default = "default_patience")]
    pub patience: usize,
    #[serde(default)]
    pub dropout: f64,
    #[serde(default)]
    pub seed: u64,
    /// Worker threads for per-graph gradients. Results do not depend on it.
    #[serde(default = "default_threads")]
    pub threads: usize,
}

impl TrainConfig {
    pub fn new(model: ModelConfig, lr: f64) -> Self {
        TrainConfig {
            model,
            lr,
            optimizer: OptimizerKind::Adam,
            batch_size: default_batch(),
            max_epochs: default_epochs(),
            max_halvings: default_halvings(),
            patience: default_patience(),
            dropout: 0.0,
            seed: 0,
            threads: default_threads(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if !self.lr.is_finite() || self.lr <= 0.0 {
            return Err(Error::Config(format!(
                "learning rate {} must be positive",
                self.lr
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if self.max_epochs == 0 || self.patience == 0 {
            return Err(Error::Config(
                "max_epochs and patience must be positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!(
                "dropout {} outside [0, 1)",
                self.dropout
            )));
        }
        if self.threads == 0 {
            return Err(Error::Config("threads must be at least 1".into()));
        }
        Ok(())
    }

    fn schedule(&self) -> ScheduleConfig {
        ScheduleConfig {
            lr: self.lr,
            patience: self.patience,
            max_halvings: self.max_halvings,
            max_epochs: self.max_epochs,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub val_auc: f64,
    pub val_f1: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Weights with the best validation AUC.
    pub model: Vcn,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_auc: f64,
    pub halvings: usize,
}

/// Glorot-initialized network for a config, seeded from `cfg.seed`.
pub fn init_model(cfg: &TrainConfig) -> Result<Vcn> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    Vcn::new(cfg.model.clone(), &mut rng)
}

fn pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

/// Eval-mode scores in dataset order.
pub fn predict(model: &Vcn, data: &Dataset, threads: usize) -> Result<Vec<f64>> {
    let graphs: Vec<_> = data.graphs().collect();
    if threads <= 1 {
        return graphs.iter().map(|g| model.score(g)).collect();
    }
    pool(threads)?.install(|| graphs.par_iter().map(|g| model.score(g)).collect())
}

/// Scores and AUC/F1 at the default threshold.
pub fn evaluate(model: &Vcn, data: &Dataset, threads: usize) -> Result<(Vec<f64>, MetricsReport)> {
    let scores = predict(model, data, threads)?;
    let report = MetricsReport::compute(&scores, &data.labels()?, DEFAULT_THRESHOLD)?;
    Ok((scores, report))
}

/// Mean loss and gradient over a batch. Per-graph results are merged in
/// batch order, so any thread count gives the same bits.
fn batch_gradient(
    model: &Vcn,
    data: &Dataset,
    batch: &[usize],
    dropout: f64,
    seeds: &[u64],
    pool: Option<&rayon::ThreadPool>,
) -> Result<(f64, Gradients)> {
    let one = |k: usize| -> Result<(f64, Gradients)> {
        let g = &data.samples()[batch[k]].graph;
        let mut rng = ChaCha8Rng::seed_from_u64(seeds[k]);
        let mode = if dropout > 0.0 {
            Mode::Train {
                dropout,
                rng: &mut rng,
            }
        } else {
            Mode::Eval
        };
        model.loss_and_grads(g, mode)
    };
    let parts: Vec<(f64, Gradients)> = match pool {
        Some(p) => p.install(|| {
            (0..batch.len())
                .into_par_iter()
                .map(one)
                .collect::<Result<_>>()
        })?,
        None => (0..batch.len()).map(one).collect::<Result<_>>()?,
    };
    let mut total = model.store().zero_grads();
    let mut loss = 0.0;
    for (l, g) in &parts {
        loss += l;
        total.add_assign(g);
    }
    total.scale(1.0 / batch.len() as f64);
    Ok((loss, total))
}

/// Minibatch training with validation-driven halving and rollback.
///
/// Every epoch shuffles the training set, takes one optimizer step per batch
/// on the mean BCE gradient, then scores the validation set. When the
/// schedule halves the learning rate the weights return to the best
/// checkpoint and the optimizer state is cleared.
pub fn train(
    model: Vcn,
    train: &Dataset,
    val: &Dataset,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if model.config() != &cfg.model {
        return Err(Error::Config(
            "model does not match the training config".into(),
        ));
    }
    if train.is_empty() {
        return Err(Error::Dataset("training set is empty".into()));
    }
    for g in train.graphs().chain(val.graphs()) {
        model.check_graph(g)?;
    }
    let val_labels = val.labels()?;
    train.labels()?;
    let workers = if cfg.threads > 1 {
        Some(pool(cfg.threads)?)
    } else {
        None
    };

    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    shuffle_rng.set_stream(1);
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    dropout_rng.set_stream(2);

    let mut model = model;
    let mut opt = Optimizer::new(cfg.optimizer, model.store());
    let mut sched = ScheduleState::new(cfg.schedule())?;
    let mut best = model.clone();
    let mut best_epoch = 0;
    let mut history = Vec::new();
    let mut order: Vec<usize> = (0..train.len()).collect();

    loop {
        let epoch = history.len() + 1;
        let lr = sched.lr;
        order.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let seeds: Vec<u64> = batch.iter().map(|_| dropout_rng.gen()).collect();
            let (loss, grads) =
                batch_gradient(&model, train, batch, cfg.dropout, &seeds, workers.as_ref())?;
            loss_sum += loss;
            opt.step(model.store_mut(), &grads, lr)?;
        }
        let scores = predict(&model, val, cfg.threads)?;
        let report = MetricsReport::compute(&scores, &val_labels, DEFAULT_THRESHOLD)?;
        history.push(EpochRecord {
            epoch,
            lr,
            train_loss: loss_sum / train.len() as f64,
            val_auc: report.auc,
            val_f1: report.f1,
        });
        log::info!(
            "epoch {epoch} lr {lr:e} loss {:.6} val_auc {:.6}",
            loss_sum / train.len() as f64,
            report.auc
        );
        let decision = sched.update(report.auc)?;
        if decision.improved {
            best = model.clone();
            best_epoch = epoch;
        }
        match decision.action {
            Action::Continue => {}
            Action::Halve => {
                model = best.clone();
                opt.reset();
            }
            Action::Stop => break,
        }
    }

    Ok(TrainOutcome {
        model: best,
        history,
        best_epoch,
        best_val_auc: sched.best.unwrap_or(f64::NAN),
        halvings: sched.halvings,
    })
}

pub const HISTORY_HEADER: &str = "epoch,lr,train_loss,val_auc,val_f1";

/// CSV with full-precision round-trip floats.
pub fn history_csv(history: &[EpochRecord]) -> String {
    let mut out = String::from(HISTORY_HEADER);
    out.push('\n');
    for r in history {
        let _ = writeln!(
            out,
            "{},{:e},{:e},{:e},{:e}",
            r.epoch, r.lr, r.train_loss, r.val_auc, r.val_f1
        );
    }
    out
}

/// Hyperparameter grid. Every combination trains from the base config.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchGrid {
    pub d_h: Vec<usize>,
    pub d_v: Vec<usize>,
    pub lr: Vec<f64>,
    pub optimizer: Vec<OptimizerKind>,
}

impl Default for SearchGrid {
    fn default() -> Self {
        SearchGrid {
            d_h: vec![8, 16, 32],
            d_v: vec![8, 16, 32],
            lr: vec![0.001, 0.002, 0.003, 0.004, 0.005],
            optimizer: vec![OptimizerKind::Adam, OptimizerKind::Rmsprop],
        }
    }
}

#[derive(Clone, Debug)]
pub struct Trial {
    pub config: TrainConfig,
    pub best_val_auc: f64,
}

#[derive(Clone, Debug)]
pub struct GridResult {
    pub best: TrainOutcome,
    pub best_config: TrainConfig,
    pub trials: Vec<Trial>,
}

/// Trains every grid point and keeps the highest validation AUC. Ties go to
/// the smaller `d_h`, then the smaller learning rate.
pub fn grid_search(
    base: &TrainConfig,
    grid: &SearchGrid,
    train_set: &Dataset,
    val: &Dataset,
) -> Result<GridResult> {
    if grid.d_h.is_empty() || grid.d_v.is_empty() || grid.lr.is_empty() || grid.optimizer.is_empty()
    {
        return Err(Error::Config("search grid has an empty axis".into()));
    }
    let mut trials = Vec::new();
    let mut best: Option<(TrainOutcome, TrainConfig)> = None;
    for &d_h in &grid.d_h {
        for &d_v in &grid.d_v {
            for &lr in &grid.lr {
                for &optimizer in &grid.optimizer {
                    let mut cfg = base.clone();
                    cfg.model.d_h = d_h;
                    cfg.model.d_v = d_v;
                    cfg.lr = lr;
                    cfg.optimizer = optimizer;
                    let outcome = train(init_model(&cfg)?, train_set, val, &cfg)?;
                    trials.push(Trial {
                        config: cfg.clone(),
                        best_val_auc: outcome.best_val_auc,
                    });
                    let better = match &best {
                        None => true,
                        Some((b, bc)) => {
                            let key = |auc: f64, c: &TrainConfig| (auc, c.model.d_h, c.lr);
                            let (a, h, l) = key(outcome.best_val_auc, &cfg);
                            let (ba, bh, bl) = key(b.best_val_auc, bc);
                            a > ba || (a == ba && (h < bh || (h == bh && l < bl)))
                        }
                    };
                    if better {
                        best = Some((outcome, cfg));
                    }
                }
            }
        }
    }
    let (best, best_config) = best.expect("grid is nonempty");
    Ok(GridResult {
        best,
        best_config,
        trials,
    })
}
