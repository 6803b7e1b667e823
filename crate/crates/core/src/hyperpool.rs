//! Hypergraph pooling: vertex-to-hyperedge group features (personality,
//! intentions, willingness) and hyperedge-to-vertex updates, iterated `H`
//! times with shared weights, then a masked mean into `F_i`.

use crate::config::Config;
use crate::encoder::AgentFeatures;
use crate::error::{NestError, Result};
use crate::numerics::{
    mlp_forward, sample_gumbel, softmax_tau, Activation, Graph, MlpSpec, ParamSpec, ParamStore, Tensor, Var,
};
use crate::pass::Pass;

fn score_spec(cfg: &Config) -> MlpSpec {
    MlpSpec::new(&[cfg.d, cfg.d, 1], Activation::Tanh)
}

fn personality_spec(cfg: &Config) -> MlpSpec {
    MlpSpec::new(&[cfg.d, cfg.d, cfg.d], Activation::Tanh)
}

fn intention_spec(cfg: &Config) -> MlpSpec {
    MlpSpec::new(&[cfg.d, cfg.d, cfg.k], Activation::Tanh)
}

fn vertex_spec(cfg: &Config) -> MlpSpec {
    MlpSpec::new(&[2 * cfg.d, cfg.d, cfg.d], Activation::Tanh)
}

pub fn register_params(cfg: &Config, registry: &mut Vec<ParamSpec>) {
    if cfg.ablation.hypergraph {
        score_spec(cfg).register("pool.score", registry);
        personality_spec(cfg).register("pool.personality", registry);
        intention_spec(cfg).register("pool.intention", registry);
        intention_spec(cfg).register("pool.willingness", registry);
        vertex_spec(cfg).register("pool.vertex", registry);
    } else {
        personality_spec(cfg).register("pool.graph.edge", registry);
        vertex_spec(cfg).register("pool.graph.vertex", registry);
    }
}

/// Output of one vertex-to-hyperedge step, one row per hyperedge.
#[derive(Debug, Clone)]
pub struct GroupFeatures {
    /// `I_a`, `s x d`.
    pub aggregated: Var,
    /// `I_p`, `s x d`.
    pub personality: Var,
    /// `I_i`, `s x K`, rows on the simplex.
    pub intentions: Var,
    /// `I_w`, `s x K`, in (0, 1).
    pub willingness: Var,
    /// `F_g`, `s x d`.
    pub features: Var,
    /// Hyperedges with at least one member.
    pub active: Vec<bool>,
}

#[derive(Debug, Clone)]
pub struct PoolOutput {
    /// `F_i`, `1 x d`.
    pub interaction: Var,
    /// Vertex features after the last iteration.
    pub vertices: Var,
    /// Group features of every iteration.
    pub groups: Vec<GroupFeatures>,
}

fn mask_column(mask: &[bool]) -> Tensor {
    Tensor::column(mask.iter().map(|&m| if m { 1.0 } else { 0.0 }).collect())
}

/// Mean over the valid rows of `v`, `1 x d`.
pub fn masked_mean(g: &mut Graph, v: Var, mask: &[bool]) -> Result<Var> {
    let valid = mask.iter().filter(|&&m| m).count();
    if valid == 0 || g.value(v).rows() != mask.len() {
        return Err(NestError::shape(
            "masked_mean",
            format!(
                "{} rows, {} mask entries, {valid} valid",
                g.value(v).rows(),
                mask.len()
            ),
        ));
    }
    let w = Tensor::row(
        mask.iter()
            .map(|&m| if m { 1.0 / valid as f64 } else { 0.0 })
            .collect(),
    );
    let w = g.constant(w);
    g.matmul(w, v)
}

/// `I_a` for every column of `e`: the softmax-weighted sum of member vertices,
/// with weights from the shared scorer. Empty hyperedges give a zero row.
pub fn aggregate_group(
    g: &mut Graph,
    params: &ParamStore,
    cfg: &Config,
    vertices: Var,
    e: Var,
    mask: &[bool],
) -> Result<(Var, Vec<bool>)> {
    let (rows, s) = g.value(e).dims();
    if g.value(vertices).rows() != rows || mask.len() != rows {
        return Err(NestError::shape(
            "aggregate_group",
            format!(
                "incidence has {rows} rows, vertices {}, mask {}",
                g.value(vertices).rows(),
                mask.len()
            ),
        ));
    }
    let active: Vec<bool> = (0..s)
        .map(|j| (0..rows).any(|i| mask[i] && g.value(e).get(i, j) > 0.0))
        .collect();
    let m = g.constant(mask_column(mask));
    let e = g.mul(e, m)?;
    let scores = mlp_forward(g, params, "pool.score", vertices, &score_spec(cfg))?;
    let shift = (0..rows)
        .filter(|&i| mask[i])
        .map(|i| g.value(scores).get(i, 0))
        .fold(f64::NEG_INFINITY, f64::max);
    let shifted = g.add_scalar(scores, -shift.max(-1e300))?;
    let weights = g.exp(shifted)?;
    let weights = g.mul(e, weights)?;
    let denom = g.sum_rows(weights)?;
    let empty = g.constant(Tensor::row(
        active.iter().map(|&a| if a { 0.0 } else { 1.0 }).collect(),
    ));
    let denom = g.add(denom, empty)?;
    let denom = g.transpose(denom)?;
    let wt = g.transpose(weights)?;
    let sums = g.matmul(wt, vertices)?;
    Ok((g.div(sums, denom)?, active))
}

/// `I_p = M_p(I_a)`.
pub fn encode_personality(g: &mut Graph, params: &ParamStore, cfg: &Config, i_a: Var) -> Result<Var> {
    mlp_forward(g, params, "pool.personality", i_a, &personality_spec(cfg))
}

/// `I_i = softmax((M_i(I_a) + xi) / tau)`; `noise` is `None` in evaluation.
pub fn encode_intentions(
    g: &mut Graph,
    params: &ParamStore,
    cfg: &Config,
    i_a: Var,
    noise: Option<Tensor>,
) -> Result<Var> {
    if !(cfg.tau > 0.0) {
        return Err(NestError::Param(format!("tau must be > 0, got {}", cfg.tau)));
    }
    let mut logits = mlp_forward(g, params, "pool.intention", i_a, &intention_spec(cfg))?;
    if let Some(xi) = noise {
        let xi = g.constant(xi);
        logits = g.add(logits, xi)?;
    }
    softmax_tau(g, logits, cfg.tau)
}

/// `I_w = sigmoid(M_w(I_a))`.
pub fn encode_willingness(g: &mut Graph, params: &ParamStore, cfg: &Config, i_a: Var) -> Result<Var> {
    let z = mlp_forward(g, params, "pool.willingness", i_a, &intention_spec(cfg))?;
    g.sigmoid(z)
}

/// `F_g = I_p * sum_j I_ij I_wj`, row by row.
pub fn group_feature(g: &mut Graph, i_p: Var, i_i: Var, i_w: Var) -> Result<Var> {
    let prod = g.mul(i_i, i_w)?;
    let expectation = g.sum_cols(prod)?;
    g.mul(i_p, expectation)
}

/// `E F_g`: each vertex's sum over the groups it belongs to.
pub fn gather_groups(g: &mut Graph, e: Var, f_g: Var) -> Result<Var> {
    g.matmul(e, f_g)
}

/// `V <- M_v([V, E F_g])`; masked rows are reset to zero.
pub fn scatter_to_vertices(
    g: &mut Graph,
    params: &ParamStore,
    cfg: &Config,
    vertices: Var,
    e: Var,
    f_g: Var,
    mask: &[bool],
) -> Result<Var> {
    let sums = gather_groups(g, e, f_g)?;
    let joined = g.concat_cols(&[vertices, sums])?;
    let updated = mlp_forward(g, params, "pool.vertex", joined, &vertex_spec(cfg))?;
    let m = g.constant(mask_column(mask));
    g.mul(updated, m)
}

/// One vertex-to-hyperedge step.
pub fn group_features(
    g: &mut Graph,
    params: &ParamStore,
    cfg: &Config,
    vertices: Var,
    e: Var,
    mask: &[bool],
    noise: Option<Tensor>,
) -> Result<GroupFeatures> {
    let (aggregated, active) = aggregate_group(g, params, cfg, vertices, e, mask)?;
    let personality = encode_personality(g, params, cfg, aggregated)?;
    let intentions = encode_intentions(g, params, cfg, aggregated, noise)?;
    let willingness = encode_willingness(g, params, cfg, aggregated)?;
    let features = group_feature(g, personality, intentions, willingness)?;
    Ok(GroupFeatures {
        aggregated,
        personality,
        intentions,
        willingness,
        features,
        active,
    })
}

/// `H` rounds of pooling over the fixed incidence `e`, then the masked mean.
pub fn pool(
    g: &mut Graph,
    params: &ParamStore,
    cfg: &Config,
    f_a: &AgentFeatures,
    e: Var,
    pass: &Pass,
    scenario_id: &str,
) -> Result<PoolOutput> {
    let s = g.value(e).cols();
    let mut v = f_a.features;
    let mut groups = Vec::with_capacity(cfg.h);
    for it in 0..cfg.h {
        let noise = pass
            .is_train()
            .then(|| sample_gumbel(s, cfg.k, &pass.gumbel_stream(scenario_id, it)));
        let gf = group_features(g, params, cfg, v, e, &f_a.mask, noise)?;
        v = scatter_to_vertices(g, params, cfg, v, e, gf.features, &f_a.mask)?;
        groups.push(gf);
    }
    Ok(PoolOutput {
        interaction: masked_mean(g, v, &f_a.mask)?,
        vertices: v,
        groups,
    })
}

/// Pairwise message passing over the complete graph of valid agents, used
/// when the hypergraph is ablated: `V <- M_v([V, mean_k M_e(V_k)])`.
pub fn graph_pool(
    g: &mut Graph,
    params: &ParamStore,
    cfg: &Config,
    f_a: &AgentFeatures,
) -> Result<PoolOutput> {
    let mut v = f_a.features;
    let m = g.constant(mask_column(&f_a.mask));
    for _ in 0..cfg.h {
        let msgs = mlp_forward(g, params, "pool.graph.edge", v, &personality_spec(cfg))?;
        let agg = masked_mean(g, msgs, &f_a.mask)?;
        let agg = g.mul(m, agg)?;
        let joined = g.concat_cols(&[v, agg])?;
        let updated = mlp_forward(g, params, "pool.graph.vertex", joined, &vertex_spec(cfg))?;
        v = g.mul(updated, m)?;
    }
    Ok(PoolOutput {
        interaction: masked_mean(g, v, &f_a.mask)?,
        vertices: v,
        groups: Vec::new(),
    })
}
