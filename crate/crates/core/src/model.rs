//! End-to-end forward pass: encoder, hypergraph, pooling, fusion, decoder.

use std::path::Path;

use crate::config::Config;
use crate::encoder::{self, AgentFeatures, LaneFeatures};
use crate::error::{NestError, Result};
use crate::hyperform::{self, FrozenIncidence, InteractionHypergraph};
use crate::hyperpool::{self, PoolOutput};
use crate::numerics::{Checkpoint, Graph, ParamSpec, ParamStore, RngStream, Var};
use crate::pass::Pass;
use crate::predictor::{self, ModeOutputs, PredictionSet};
use crate::scenario::SceneInput;

/// Every parameter the configuration needs, in registration order.
pub fn param_registry(cfg: &Config) -> Vec<ParamSpec> {
    let mut reg = Vec::new();
    encoder::register_params(cfg, &mut reg);
    hyperform::register_params(cfg, &mut reg);
    hyperpool::register_params(cfg, &mut reg);
    predictor::register_params(cfg, &mut reg);
    reg
}

pub fn init_params(cfg: &Config) -> Result<ParamStore> {
    ParamStore::init(&param_registry(cfg), &RngStream::new(cfg.seed, "init"))
}

/// Intermediate values of one scene's forward pass.
#[derive(Debug, Clone)]
pub struct SceneForward {
    pub agents: AgentFeatures,
    pub lanes: LaneFeatures,
    /// Absent when the hypergraph is ablated.
    pub hypergraph: Option<InteractionHypergraph>,
    pub pooled: PoolOutput,
    pub context: Var,
    pub outputs: ModeOutputs,
}

pub fn forward_scene(
    g: &mut Graph,
    params: &ParamStore,
    cfg: &Config,
    scene: &SceneInput,
    pass: &Pass,
    frozen: Option<&FrozenIncidence>,
) -> Result<SceneForward> {
    let agents = encoder::encode_agents(g, params, cfg, scene)?;
    let lanes = if cfg.ablation.context_fusion {
        encoder::encode_lanes(g, params, cfg, &scene.lanes)?
    } else {
        encoder::encode_lanes(g, params, cfg, &[])?
    };
    let (hypergraph, pooled) = if cfg.ablation.hypergraph {
        let h = hyperform::form_hypergraph(g, params, cfg, &agents, scene, pass, frozen)?;
        let pooled = hyperpool::pool(g, params, cfg, &agents, h.incidence_st, pass, &scene.scenario_id)?;
        (Some(h), pooled)
    } else {
        (None, hyperpool::graph_pool(g, params, cfg, &agents)?)
    };
    let context = predictor::fuse_context(g, params, cfg, pooled.interaction, &lanes)?;
    let target = g.slice_rows(agents.features, 0, 1)?;
    let outputs = predictor::predict_modes(g, params, cfg, context, target)?;
    Ok(SceneForward {
        agents,
        lanes,
        hypergraph,
        pooled,
        context,
        outputs,
    })
}

fn ground_truth(scene: &SceneInput) -> Result<&[[f64; 2]]> {
    scene.future.as_deref().ok_or_else(|| NestError::Scenario {
        scenario: scene.scenario_id.clone(),
        detail: "training needs a ground-truth future".into(),
    })
}

pub fn scene_loss(
    g: &mut Graph,
    params: &ParamStore,
    cfg: &Config,
    scene: &SceneInput,
    pass: &Pass,
    frozen: Option<&FrozenIncidence>,
) -> Result<(Var, SceneForward)> {
    let gt = ground_truth(scene)?;
    let fwd = forward_scene(g, params, cfg, scene, pass, frozen)?;
    let (loss, _) = predictor::training_loss(g, &fwd.outputs, gt, cfg.c_cls)?;
    Ok((loss, fwd))
}

/// Mean scene loss. `frozen`, when given, holds one structure per scene.
pub fn batch_loss(
    g: &mut Graph,
    params: &ParamStore,
    cfg: &Config,
    scenes: &[SceneInput],
    pass: &Pass,
    frozen: Option<&[FrozenIncidence]>,
) -> Result<Var> {
    if scenes.is_empty() {
        return Err(NestError::Usage("batch_loss needs at least one scene".into()));
    }
    if let Some(f) = frozen {
        if f.len() != scenes.len() {
            return Err(NestError::Usage(format!(
                "{} frozen structures for {} scenes",
                f.len(),
                scenes.len()
            )));
        }
    }
    let mut total = None;
    for (i, scene) in scenes.iter().enumerate() {
        let (loss, _) = scene_loss(g, params, cfg, scene, pass, frozen.map(|f| &f[i]))?;
        total = Some(match total {
            None => loss,
            Some(t) => g.add(t, loss)?,
        });
    }
    g.scale(total.expect("non-empty"), 1.0 / scenes.len() as f64)
}

/// Records the discrete incidence structure each scene gets under `pass`.
/// Empty when the hypergraph is ablated.
pub fn freeze_structures(
    params: &ParamStore,
    cfg: &Config,
    scenes: &[SceneInput],
    pass: &Pass,
) -> Result<Option<Vec<FrozenIncidence>>> {
    if !cfg.ablation.hypergraph {
        return Ok(None);
    }
    scenes
        .iter()
        .map(|scene| {
            let mut g = Graph::new();
            let fwd = forward_scene(&mut g, params, cfg, scene, pass, None)?;
            Ok(fwd.hypergraph.expect("hypergraph enabled").structure)
        })
        .collect::<Result<Vec<_>>>()
        .map(Some)
}

/// A configuration together with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: Config,
    pub params: ParamStore,
}

impl Model {
    pub fn init(config: Config) -> Result<Self> {
        config.validate()?;
        let params = init_params(&config)?;
        Ok(Model { config, params })
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint::new(
            &self.params,
            &self.config.hash(),
            Some(self.config.to_json_value()),
        )
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.checkpoint().save(path)
    }

    /// Rebuilds a model from a checkpoint that embeds its configuration.
    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        let value = ckpt
            .config
            .clone()
            .ok_or_else(|| NestError::Checkpoint("checkpoint has no embedded config".into()))?;
        let config: Config = serde_json::from_value(value)
            .map_err(|e| NestError::Checkpoint(format!("embedded config: {e}")))?;
        config.validate()?;
        let hash = config.hash();
        if hash != ckpt.config_hash {
            return Err(NestError::ConfigHash {
                checkpoint: ckpt.config_hash.clone(),
                config: hash,
            });
        }
        let params = ckpt.params();
        params.check_registry(&param_registry(&config))?;
        Ok(Model { config, params })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Model::from_checkpoint(&Checkpoint::load(path, None)?)
    }

    /// Evaluation-mode prediction in the scene's normalized frame.
    pub fn predict_local(&self, scene: &SceneInput) -> Result<PredictionSet> {
        let mut g = Graph::new();
        let pass = Pass::eval(self.config.seed);
        let fwd = forward_scene(&mut g, &self.params, &self.config, scene, &pass, None)?;
        PredictionSet::from_outputs(&g, &fwd.outputs)
    }

    /// Evaluation-mode prediction in world coordinates.
    pub fn predict(&self, scene: &SceneInput) -> Result<PredictionSet> {
        Ok(self.predict_local(scene)?.to_world(&scene.frame))
    }
}
