//! Dense tensors, the differentiation tape, parameters and random streams.

pub mod gradcheck;
pub mod nn;
pub mod params;
pub mod rng;
pub mod tape;
pub mod tensor;

pub use gradcheck::{grad_check, GradCheckEntry, GradCheckReport};
pub use nn::{attention, mlp_forward, softmax, softmax_tau, Activation, MlpSpec};
pub use params::{Checkpoint, ParamSpec, ParamStore};
pub use rng::{sample_gumbel, RngStream};
pub use tape::{Gradients, Graph, Var};
pub use tensor::Tensor;
