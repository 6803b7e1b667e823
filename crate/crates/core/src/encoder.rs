//! Agent-history and lane-polyline encoders.
//!
//! Each agent is encoded from its own history only: per-step linear embedding,
//! sinusoidal positional encoding, `encoder_blocks` rounds of single-head
//! temporal self-attention plus feed-forward (both residual), then a mean over
//! time. Mixing across agents is left to the hypergraph.

use crate::config::Config;
use crate::error::{NestError, Result};
use crate::numerics::{
    attention, mlp_forward, Activation, Graph, MlpSpec, ParamSpec, ParamStore, Tensor, Var,
};
use crate::scenario::{LanePolyline, SceneInput};

/// Per-feature divisors for `(x, y, vx, vy, ax, ay)`.
const FEATURE_SCALE: [f64; 6] = [10.0, 10.0, 10.0, 10.0, 5.0, 5.0];
/// Lane coordinates are divided by this before encoding.
const LANE_SCALE: f64 = 10.0;
pub const LANE_POINTS: usize = 10;

/// Vertex features: row 0 is the target, masked rows are padding.
#[derive(Debug, Clone)]
pub struct AgentFeatures {
    pub features: Var,
    pub mask: Vec<bool>,
}

#[derive(Debug, Clone)]
pub struct LaneFeatures {
    /// `L x d`; `L` may be zero.
    pub features: Var,
    pub len: usize,
}

fn embed_spec(cfg: &Config) -> MlpSpec {
    MlpSpec::new(&[6, cfg.d], Activation::None)
}

fn ff_spec(cfg: &Config) -> MlpSpec {
    MlpSpec::new(&[cfg.d, 2 * cfg.d, cfg.d], Activation::Tanh)
}

fn lane_spec(cfg: &Config) -> MlpSpec {
    MlpSpec::new(&[2 * LANE_POINTS, cfg.d, cfg.d], Activation::Tanh)
}

pub fn register_params(cfg: &Config, registry: &mut Vec<ParamSpec>) {
    embed_spec(cfg).register("encoder.agent.embed", registry);
    for b in 0..cfg.encoder_blocks {
        for proj in ["q", "k", "v"] {
            MlpSpec::new(&[cfg.d, cfg.d], Activation::None)
                .without_bias()
                .register(&format!("encoder.agent.block{b}.{proj}"), registry);
        }
        ff_spec(cfg).register(&format!("encoder.agent.block{b}.ff"), registry);
    }
    if cfg.ablation.context_fusion {
        lane_spec(cfg).register("encoder.lane.mlp", registry);
    }
}

/// Sinusoidal positional encoding, `steps x d`.
pub fn positional_encoding(steps: usize, d: usize) -> Tensor {
    let mut pe = Tensor::zeros(steps, d);
    for t in 0..steps {
        for i in 0..d {
            let pair = (i / 2) as f64;
            let angle = t as f64 / 10000f64.powf(2.0 * pair / d as f64);
            pe.set(t, i, if i % 2 == 0 { angle.sin() } else { angle.cos() });
        }
    }
    pe
}

fn encode_history(
    g: &mut Graph,
    params: &ParamStore,
    cfg: &Config,
    history: &Tensor,
    pe: Var,
) -> Result<Var> {
    let scaled = Tensor::matrix(
        history.rows(),
        6,
        history
            .data()
            .iter()
            .enumerate()
            .map(|(i, v)| v / FEATURE_SCALE[i % 6])
            .collect(),
    )?;
    let x = g.constant(scaled);
    let x = mlp_forward(g, params, "encoder.agent.embed", x, &embed_spec(cfg))?;
    let mut x = g.add(x, pe)?;
    for b in 0..cfg.encoder_blocks {
        let proj = |g: &mut Graph, name: &str, x: Var| {
            let w = g.param(params, &format!("encoder.agent.block{b}.{name}.0.w"))?;
            g.matmul(x, w)
        };
        let q = proj(g, "q", x)?;
        let k = proj(g, "k", x)?;
        let v = proj(g, "v", x)?;
        let att = attention(g, q, k, v)?;
        x = g.add(x, att)?;
        let ff = mlp_forward(g, params, &format!("encoder.agent.block{b}.ff"), x, &ff_spec(cfg))?;
        x = g.add(x, ff)?;
    }
    g.mean_rows(x)
}

/// Encodes every agent history of `scene` into an `(n+1) x d` matrix.
/// Padded rows are exact zeros and never touch the parameters.
pub fn encode_agents(
    g: &mut Graph,
    params: &ParamStore,
    cfg: &Config,
    scene: &SceneInput,
) -> Result<AgentFeatures> {
    if scene.histories.is_empty() || !scene.mask[0] {
        return Err(NestError::Scenario {
            scenario: scene.scenario_id.clone(),
            detail: "row 0 must be a valid target".into(),
        });
    }
    let pe = g.constant(positional_encoding(cfg.t_h, cfg.d));
    let mut rows = Vec::with_capacity(scene.rows());
    for (i, (hist, &valid)) in scene.histories.iter().zip(&scene.mask).enumerate() {
        if hist.dims() != (cfg.t_h, 6) {
            return Err(NestError::shape(
                "encode_agents",
                format!(
                    "agent row {i} history is {:?}, expected {}x6",
                    hist.shape(),
                    cfg.t_h
                ),
            ));
        }
        let row = if valid {
            encode_history(g, params, cfg, hist, pe)?
        } else {
            g.constant(Tensor::zeros(1, cfg.d))
        };
        rows.push(row);
    }
    Ok(AgentFeatures {
        features: g.concat_rows(&rows)?,
        mask: scene.mask.clone(),
    })
}

/// Splits a polyline into consecutive arclength segments of at most
/// `segment_length` meters, each resampled to [`LANE_POINTS`] evenly spaced
/// points. Returns `None` for a polyline without two distinct points.
pub fn resample_lane(lane: &LanePolyline, segment_length: f64) -> Option<Vec<Vec<[f64; 2]>>> {
    let pts = &lane.points;
    let mut cumulative = vec![0.0];
    for w in pts.windows(2) {
        let step = (w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1]);
        cumulative.push(cumulative.last().unwrap() + step);
    }
    let total = *cumulative.last()?;
    if pts.len() < 2 || !(total > 0.0) {
        return None;
    }
    let point_at = |s: f64| -> [f64; 2] {
        let s = s.clamp(0.0, total);
        let idx = cumulative
            .windows(2)
            .position(|w| s <= w[1] && w[1] > w[0])
            .unwrap_or(pts.len() - 2);
        let (s0, s1) = (cumulative[idx], cumulative[idx + 1]);
        let f = if s1 > s0 { (s - s0) / (s1 - s0) } else { 0.0 };
        [
            pts[idx][0] + f * (pts[idx + 1][0] - pts[idx][0]),
            pts[idx][1] + f * (pts[idx + 1][1] - pts[idx][1]),
        ]
    };
    let count = ((total / segment_length) - 1e-9).ceil().max(1.0) as usize;
    Some(
        (0..count)
            .map(|k| {
                let start = k as f64 * segment_length;
                let end = ((k + 1) as f64 * segment_length).min(total);
                (0..LANE_POINTS)
                    .map(|j| point_at(start + (end - start) * j as f64 / (LANE_POINTS - 1) as f64))
                    .collect()
            })
            .collect(),
    )
}

/// One `d`-vector per lane segment, in lane order.
pub fn encode_lanes(
    g: &mut Graph,
    params: &ParamStore,
    cfg: &Config,
    lanes: &[LanePolyline],
) -> Result<LaneFeatures> {
    let mut rows = Vec::new();
    for lane in lanes {
        match resample_lane(lane, cfg.lane_segment_length) {
            Some(segments) => {
                for seg in segments {
                    rows.extend(seg.iter().flat_map(|p| [p[0] / LANE_SCALE, p[1] / LANE_SCALE]));
                }
            }
            None => log::warn!("skipping degenerate lane `{}`", lane.lane_id),
        }
    }
    let len = rows.len() / (2 * LANE_POINTS);
    if len == 0 {
        return Ok(LaneFeatures {
            features: g.constant(Tensor::zeros(0, cfg.d)),
            len: 0,
        });
    }
    let x = g.constant(Tensor::matrix(len, 2 * LANE_POINTS, rows)?);
    let features = mlp_forward(g, params, "encoder.lane.mlp", x, &lane_spec(cfg))?;
    Ok(LaneFeatures { features, len })
}
