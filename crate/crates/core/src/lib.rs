//! Graph classification with Column Networks extended by a virtual column.
//!
//! Each node owns a column of hidden states updated from its typed
//! neighbors. One extra virtual column reads the mean of every node state
//! and writes back into each node, so information crosses the whole graph in
//! two steps. Gradients come from a small reverse-mode tape over dense
//! `f64` tensors.

pub mod cli;
pub mod column;
pub mod data;
pub mod error;
pub mod gradcheck;
pub mod graph;
pub mod metrics;
pub mod model;
pub mod numerics;
pub mod training;

pub use data::{Dataset, Sample};
pub use error::{Error, Result};
pub use graph::{Edge, Graph};
pub use model::{Mode, ModelConfig, Readout, Vcn};
pub use training::{TrainConfig, TrainOutcome};
