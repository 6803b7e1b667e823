//! Configurations shared by the examples and the acceptance suite.

use crate::config::{Config, LrSchedule};

/// Small model used for the 20-scene chain overfit run.
///
/// Chain targets never move laterally, so without a floor the lateral Laplace
/// scale shrinks toward zero and its gradients drown everything else.
pub fn overfit_config() -> Config {
    Config {
        steps: 2000,
        batch: 20,
        lr: 1e-2,
        momentum: 0.9,
        lr_schedule: LrSchedule::Cosine,
        position_scale: 20.0,
        scale_floor: 3.0,
        ..Config::default()
    }
}

/// Five-mode model for the two-future U-turn set.
pub fn uturn_config() -> Config {
    Config {
        steps: 400,
        ..overfit_config()
    }
}

/// The smallest model exercised by the gradient check.
pub fn grad_check_config() -> Config {
    Config {
        d: 8,
        s: 4,
        k: 2,
        h: 2,
        t_f: 4,
        h_neuro: 6,
        gen_hidden: 8,
        encoder_blocks: 1,
        ..Config::default()
    }
}
