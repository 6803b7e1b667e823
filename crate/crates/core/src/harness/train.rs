use std::collections::BTreeMap;

use rand::seq::SliceRandom;

use crate::config::{Config, Optimizer};
use crate::error::{NestError, Result};
use crate::model::{batch_loss, Model};
use crate::numerics::{Graph, ParamStore, RngStream, Tensor};
use crate::pass::Pass;
use crate::scenario::SceneInput;

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// Deterministic minibatches: each epoch is a fresh permutation drawn from
/// `(seed, "batch", epoch)` and is cut into consecutive slices.
#[derive(Debug, Clone)]
pub struct BatchSchedule {
    seed: u64,
    len: usize,
    batch: usize,
}

impl BatchSchedule {
    pub fn new(seed: u64, len: usize, batch: usize) -> Self {
        BatchSchedule {
            seed,
            len,
            batch: batch.min(len).max(1),
        }
    }

    fn epoch_order(&self, epoch: usize) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.len).collect();
        let mut rng = RngStream::new(self.seed, "batch").child(epoch).generator();
        order.shuffle(&mut rng);
        order
    }

    /// Scene indices used at `step`.
    pub fn indices(&self, step: usize) -> Vec<usize> {
        let start = step * self.batch;
        let mut out = Vec::with_capacity(self.batch);
        let mut epoch = start / self.len;
        let mut order = self.epoch_order(epoch);
        for pos in start..start + self.batch {
            if pos / self.len != epoch {
                epoch = pos / self.len;
                order = self.epoch_order(epoch);
            }
            out.push(order[pos % self.len]);
        }
        out
    }
}

#[derive(Debug, Clone)]
enum OptimizerState {
    Sgd {
        velocity: BTreeMap<String, Tensor>,
    },
    Adam {
        m: BTreeMap<String, Tensor>,
        v: BTreeMap<String, Tensor>,
        t: i32,
    },
}

impl OptimizerState {
    fn new(cfg: &Config) -> Self {
        match cfg.optimizer {
            Optimizer::Sgd => OptimizerState::Sgd {
                velocity: BTreeMap::new(),
            },
            Optimizer::Adam => OptimizerState::Adam {
                m: BTreeMap::new(),
                v: BTreeMap::new(),
                t: 0,
            },
        }
    }

    fn apply(
        &mut self,
        cfg: &Config,
        lr: f64,
        params: &mut ParamStore,
        grads: &BTreeMap<String, Tensor>,
    ) -> Result<()> {
        if let OptimizerState::Adam { t, .. } = self {
            *t += 1;
        }
        let norm = grads
            .values()
            .flat_map(|g| g.data())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt();
        let clip = if cfg.grad_clip > 0.0 && norm > cfg.grad_clip {
            cfg.grad_clip / norm
        } else {
            1.0
        };
        for (name, grad) in grads {
            let p = params
                .get_mut(name)
                .ok_or_else(|| NestError::Param(format!("gradient for unknown parameter `{name}`")))?;
            let zeros = || Tensor::zeros(grad.rows(), grad.cols());
            match self {
                OptimizerState::Sgd { velocity } => {
                    let vel = velocity.entry(name.clone()).or_insert_with(zeros);
                    for ((w, u), g) in p.data_mut().iter_mut().zip(vel.data_mut()).zip(grad.data()) {
                        *u = cfg.momentum * *u + clip * g;
                        *w -= lr * *u;
                    }
                }
                OptimizerState::Adam { m, v, t } => {
                    let m = m.entry(name.clone()).or_insert_with(zeros);
                    let v = v.entry(name.clone()).or_insert_with(zeros);
                    let c1 = 1.0 - ADAM_BETA1.powi(*t);
                    let c2 = 1.0 - ADAM_BETA2.powi(*t);
                    for (((w, mi), vi), g) in p
                        .data_mut()
                        .iter_mut()
                        .zip(m.data_mut())
                        .zip(v.data_mut())
                        .zip(grad.data())
                    {
                        let g = clip * g;
                        *mi = ADAM_BETA1 * *mi + (1.0 - ADAM_BETA1) * g;
                        *vi = ADAM_BETA2 * *vi + (1.0 - ADAM_BETA2) * g * g;
                        *w -= lr * (*mi / c1) / ((*vi / c2).sqrt() + ADAM_EPS);
                    }
                }
            }
        }
        Ok(())
    }
}

/// Loss of one step, reported before the update is applied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Model,
    pub curve: Vec<StepRecord>,
}

/// Runs `config.steps` optimizer updates on `scenes`.
///
/// `observer` sees every step record and the model after that update; an
/// error from it stops training.
pub fn train_with<F>(mut model: Model, scenes: &[SceneInput], mut observer: F) -> Result<TrainOutcome>
where
    F: FnMut(&StepRecord, &Model) -> Result<()>,
{
    if scenes.is_empty() {
        return Err(NestError::Usage("training needs at least one scenario".into()));
    }
    let cfg = model.config.clone();
    let schedule = BatchSchedule::new(cfg.seed, scenes.len(), cfg.batch);
    let mut opt = OptimizerState::new(&cfg);
    let mut curve = Vec::with_capacity(cfg.steps);
    for step in 0..cfg.steps {
        let batch: Vec<SceneInput> = schedule
            .indices(step)
            .into_iter()
            .map(|i| scenes[i].clone())
            .collect();
        let diverged = |e: NestError| match e {
            NestError::NonFinite { .. } => NestError::Divergence { step },
            other => other,
        };
        let mut g = Graph::new();
        let pass = Pass::train(cfg.seed, step as u64);
        let loss = batch_loss(&mut g, &model.params, &cfg, &batch, &pass, None).map_err(diverged)?;
        let value = g.value(loss).item();
        if !value.is_finite() {
            return Err(NestError::Divergence { step });
        }
        let grads = g.backward(loss).map_err(diverged)?.for_store(&model.params);
        opt.apply(&cfg, cfg.lr_at(step), &mut model.params, &grads)?;
        if model.params.iter().any(|(_, t)| !t.is_finite()) {
            return Err(NestError::Divergence { step });
        }
        let record = StepRecord { step, loss: value };
        observer(&record, &model)?;
        curve.push(record);
    }
    Ok(TrainOutcome { model, curve })
}

pub fn train(model: Model, scenes: &[SceneInput]) -> Result<TrainOutcome> {
    train_with(model, scenes, |_, _| Ok(()))
}

/// Deterministic evaluation-mode loss over all scenes.
pub fn dataset_loss(model: &Model, scenes: &[SceneInput]) -> Result<f64> {
    let mut g = Graph::new();
    let pass = Pass::eval(model.config.seed);
    let loss = batch_loss(&mut g, &model.params, &model.config, scenes, &pass, None)?;
    Ok(g.value(loss).item())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{generate_synthetic, make_batch, SynthKind, SynthParams};

    fn tiny() -> Config {
        Config {
            d: 8,
            s: 4,
            k: 2,
            h: 1,
            t_f: 4,
            h_neuro: 4,
            gen_hidden: 8,
            encoder_blocks: 1,
            batch: 2,
            steps: 5,
            ..Config::default()
        }
    }

    fn scenes(n: usize) -> Vec<SceneInput> {
        let p = SynthParams {
            t_f: 4,
            vehicles: 3,
            ..SynthParams::default()
        };
        make_batch(
            &generate_synthetic(SynthKind::Chain, n, 1, &p).unwrap(),
            8,
            4,
            true,
        )
        .unwrap()
    }

    #[test]
    fn schedule_covers_each_epoch() {
        let s = BatchSchedule::new(3, 5, 2);
        let mut seen: Vec<usize> = (0..5).flat_map(|step| s.indices(step)).take(5).collect();
        seen.sort();
        assert_eq!(seen, vec![0, 1, 2, 3, 4]);
        assert_eq!(s.indices(7), BatchSchedule::new(3, 5, 2).indices(7));
    }

    #[test]
    fn zero_steps_keeps_initialization() {
        let model = Model::init(Config { steps: 0, ..tiny() }).unwrap();
        let out = train(model.clone(), &scenes(2)).unwrap();
        assert_eq!(out.model, model);
        assert!(out.curve.is_empty());
    }

    #[test]
    fn training_is_deterministic() {
        let data = scenes(3);
        let a = train(Model::init(tiny()).unwrap(), &data).unwrap();
        let b = train(Model::init(tiny()).unwrap(), &data).unwrap();
        assert_eq!(a.model, b.model);
        assert_ne!(a.model.params, Model::init(tiny()).unwrap().params);
    }

    #[test]
    fn adam_and_momentum_run() {
        let data = scenes(2);
        for cfg in [
            Config {
                optimizer: Optimizer::Adam,
                lr: 1e-3,
                ..tiny()
            },
            Config {
                momentum: 0.9,
                ..tiny()
            },
        ] {
            let out = train(Model::init(cfg).unwrap(), &data).unwrap();
            assert!(out.curve.iter().all(|r| r.loss.is_finite()));
        }
    }

    #[test]
    fn huge_learning_rate_reports_divergence_step() {
        let cfg = Config {
            lr: 1e12,
            steps: 50,
            ..tiny()
        };
        match train(Model::init(cfg).unwrap(), &scenes(2)) {
            Err(NestError::Divergence { step }) => assert!(step < 50),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn repeated_scene_loss_decreases() {
        let cfg = Config {
            steps: 200,
            batch: 1,
            optimizer: Optimizer::Adam,
            lr: 3e-3,
            ..tiny()
        };
        let data = scenes(1);
        let out = train(Model::init(cfg).unwrap(), &data).unwrap();
        let first: f64 = out.curve[..20].iter().map(|r| r.loss).sum::<f64>() / 20.0;
        let last: f64 = out.curve[180..].iter().map(|r| r.loss).sum::<f64>() / 20.0;
        assert!(last < first - 1.0, "first {first}, last {last}");
    }
}
