//! NEST: neuromodulated small-world hypergraph trajectory prediction.
//!
//! A scene is encoded per agent, grouped into a hypergraph whose incidence is
//! thresholded and rewired by learned neuromodulators, pooled into an
//! interaction feature, fused with lane context, and decoded into `K`
//! Laplace-distributed trajectories with mode probabilities.

pub mod config;
pub mod encoder;
pub mod error;
pub mod harness;
pub mod hyperform;
pub mod hyperpool;
pub mod model;
pub mod numerics;
pub mod pass;
pub mod predictor;
pub mod scenario;

pub use config::{Ablation, Config, EvalRewire, LrSchedule, Optimizer, ScaleActivation};
pub use error::{NestError, Result};
pub use model::Model;
pub use pass::{Mode, Pass};
pub use predictor::{PredictedMode, PredictionSet};
