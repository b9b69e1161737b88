//! Optimizers, the learning-rate schedule and the training loop.

mod optim;
mod schedule;
mod trainer;

pub use optim::{
    adam_step, rmsprop_step, Optimizer, OptimizerKind, ADAM_BETA1, ADAM_BETA2, ADAM_EPS,
    RMSPROP_DECAY, RMSPROP_EPS,
};
pub use schedule::{Action, Decision, ScheduleConfig, ScheduleState};
pub use trainer::{
    evaluate, grid_search, history_csv, init_model, predict, train, EpochRecord, GridResult,
    SearchGrid, TrainConfig, TrainOutcome, Trial, HISTORY_HEADER,
};
