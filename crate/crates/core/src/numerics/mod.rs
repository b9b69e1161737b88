//! Dense `f64` tensors, activations and the reverse-mode tape.

mod params;
mod tape;
mod tensor;

pub use params::{glorot_uniform, Gradients, ParamId, ParamStore};
pub use tape::{Tape, Var};
pub use tensor::{bce_loss, mean_of, relu, sigmoid, sigmoid_scalar, tanh, Tensor, BCE_EPS};
