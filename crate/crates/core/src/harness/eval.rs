use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::metrics::{MetricsReport, Timing};
use crate::error::{NestError, Result};
use crate::model::{forward_scene, Model};
use crate::numerics::{Graph, Tensor};
use crate::pass::Pass;
use crate::predictor::{PredictedMode, PredictionSet};
use crate::scenario::SceneInput;

pub const TIMING_PROTOCOL: &str = "single-threaded evaluation-mode forward pass per scenario, \
one untimed warm-up scenario, wall-clock mean scaled by 12 / (valid agents)";

fn futures(scenes: &[SceneInput]) -> Result<Vec<Vec<[f64; 2]>>> {
    scenes
        .iter()
        .map(|s| {
            s.future.clone().ok_or_else(|| NestError::Scenario {
                scenario: s.scenario_id.clone(),
                detail: "evaluation needs a ground-truth future".into(),
            })
        })
        .collect()
}

/// Metrics over `scenes` in their normalized frames; `timed` adds the
/// per-12-agent inference time.
pub fn evaluate(model: &Model, scenes: &[SceneInput], timed: bool) -> Result<MetricsReport> {
    if scenes.is_empty() {
        return Err(NestError::Usage("evaluation needs at least one scenario".into()));
    }
    let gts = futures(scenes)?;
    let dt = scenes[0].dt;
    if let Some(s) = scenes.iter().find(|s| s.dt != dt) {
        return Err(NestError::Scenario {
            scenario: s.scenario_id.clone(),
            detail: format!("dt {} differs from the dataset's {dt}", s.dt),
        });
    }
    if timed {
        model.predict_local(&scenes[0])?;
    }
    let mut preds = Vec::with_capacity(scenes.len());
    let mut per_12 = 0.0;
    for scene in scenes {
        let start = Instant::now();
        let pred = model.predict_local(scene)?;
        let ms = start.elapsed().as_secs_f64() * 1e3;
        per_12 += ms * 12.0 / scene.num_valid() as f64;
        preds.push(pred);
    }
    let mut report = MetricsReport::compute(&preds, &gts, dt)?;
    if timed {
        report.timing = Some(Timing {
            mean_ms_per_12_agents: per_12 / scenes.len() as f64,
            protocol: TIMING_PROTOCOL.into(),
        });
    }
    Ok(report)
}

/// One line of `predict` output, in world coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub scenario_id: String,
    pub modes: Vec<PredictedMode>,
}

pub fn predict_records(model: &Model, scenes: &[SceneInput]) -> Result<Vec<PredictionRecord>> {
    scenes
        .iter()
        .map(|s| {
            let PredictionSet { modes } = model.predict(s)?;
            Ok(PredictionRecord {
                scenario_id: s.scenario_id.clone(),
                modes,
            })
        })
        .collect()
}

/// One line of `inspect` output: the hypergraph of the valid agents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypergraphRecord {
    pub scenario_id: String,
    pub agent_ids: Vec<String>,
    #[serde(rename = "C")]
    pub c: Vec<Vec<f64>>,
    pub alpha: Vec<f64>,
    /// `null` when small-world rewiring is disabled.
    pub beta: Option<f64>,
    #[serde(rename = "E")]
    pub e: Vec<Vec<u8>>,
}

fn rows(t: &Tensor, n: usize) -> Vec<Vec<f64>> {
    (0..n).map(|i| t.row_slice(i).to_vec()).collect()
}

pub fn inspect_records(model: &Model, scenes: &[SceneInput]) -> Result<Vec<HypergraphRecord>> {
    if !model.config.ablation.hypergraph {
        return Err(NestError::Usage(
            "inspect needs a model with the hypergraph enabled".into(),
        ));
    }
    let pass = Pass::eval(model.config.seed);
    scenes
        .iter()
        .map(|s| {
            let mut g = Graph::new();
            let fwd = forward_scene(&mut g, &model.params, &model.config, s, &pass, None)?;
            let h = fwd.hypergraph.expect("hypergraph enabled");
            let n = s.num_valid();
            Ok(HypergraphRecord {
                scenario_id: s.scenario_id.clone(),
                agent_ids: s.agent_ids[..n].to_vec(),
                c: rows(g.value(h.affinity), n),
                alpha: g.value(h.alpha).data()[..n].to_vec(),
                beta: h.beta.map(|b| g.value(b).item()),
                e: (0..n)
                    .map(|i| h.incidence.row_slice(i).iter().map(|&v| v as u8).collect())
                    .collect(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Config;
    use crate::scenario::{generate_synthetic, make_batch, SynthKind, SynthParams};

    fn setup() -> (Model, Vec<SceneInput>) {
        let cfg = Config {
            d: 8,
            s: 3,
            k: 3,
            h: 1,
            gen_hidden: 8,
            ..Config::default()
        };
        let raw = generate_synthetic(SynthKind::Merge, 3, 4, &SynthParams::default()).unwrap();
        (Model::init(cfg).unwrap(), make_batch(&raw, 8, 12, true).unwrap())
    }

    #[test]
    fn init_model_reports_finite_metrics() {
        let (model, scenes) = setup();
        let r = evaluate(&model, &scenes, true).unwrap();
        assert_eq!(r.min_ade.len(), 3);
        assert!(r.min_ade.windows(2).all(|w| w[1] <= w[0]));
        assert!(r.rmse.iter().all(|h| h.rmse.is_finite() && h.rmse >= 0.0));
        let t = r.timing.unwrap();
        assert!(t.mean_ms_per_12_agents.is_finite() && t.mean_ms_per_12_agents > 0.0);
        assert_eq!(r.rmse.len(), 6);
    }

    #[test]
    fn records_cover_every_scene() {
        let (model, scenes) = setup();
        let preds = predict_records(&model, &scenes).unwrap();
        assert_eq!(preds.len(), 3);
        assert_eq!(preds[0].modes[0].traj.len(), 12);
        let hg = inspect_records(&model, &scenes).unwrap();
        assert_eq!(hg[0].e.len(), scenes[0].num_valid());
        assert!(hg[0].e.iter().all(|r| r.iter().any(|&v| v == 1)));
    }
}
