//! Metrics, training, evaluation and the file-level entry points used by the
//! command line.

pub mod eval;
pub mod files;
pub mod metrics;
pub mod presets;
pub mod train;

pub use eval::{evaluate, inspect_records, predict_records, HypergraphRecord, PredictionRecord};
pub use files::{eval_files, gen_data, inspect_files, load_model, load_scenes, predict_files, train_files};
pub use metrics::{min_ade, min_fde, rmse_horizon, HorizonError, MetricsReport, Timing};
pub use presets::{grad_check_config, overfit_config, uturn_config};
pub use train::{dataset_loss, train, train_with, BatchSchedule, StepRecord, TrainOutcome};
