use crate::numerics::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Gumbel noise and sampled rewiring.
    Train,
    /// Noise-free intentions; rewiring per `eval_rewire`.
    Eval,
}

/// Identifies one forward pass so that every random draw in it is
/// reproducible from `(seed, step, scenario, agent)` alone.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pass {
    pub mode: Mode,
    pub seed: u64,
    pub step: u64,
}

impl Pass {
    pub fn train(seed: u64, step: u64) -> Self {
        Pass {
            mode: Mode::Train,
            seed,
            step,
        }
    }

    pub fn eval(seed: u64) -> Self {
        Pass {
            mode: Mode::Eval,
            seed,
            step: 0,
        }
    }

    pub fn is_train(&self) -> bool {
        self.mode == Mode::Train
    }

    /// Rewiring draws for one agent; draw `j` belongs to hyperedge `j`.
    pub fn rewire_stream(&self, resample: bool, scenario_id: &str, agent_id: &str) -> RngStream {
        let step = match (self.mode, resample) {
            (Mode::Train, true) => self.step.to_string(),
            (Mode::Train, false) => "fixed".to_string(),
            (Mode::Eval, _) => "eval".to_string(),
        };
        RngStream::new(self.seed, "rewire")
            .child(step)
            .child(scenario_id)
            .child(agent_id)
    }

    /// Gumbel noise for pooling iteration `iteration`.
    pub fn gumbel_stream(&self, scenario_id: &str, iteration: usize) -> RngStream {
        RngStream::new(self.seed, "gumbel")
            .child(self.step)
            .child(scenario_id)
            .child(iteration)
    }
}
