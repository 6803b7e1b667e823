//! Hypergraph forming: prototype affinity `C`, neuromodulated threshold `alpha`
//! and connection probability `beta`, binarization and small-world rewiring.
//!
//! The incidence matrix is discrete. Gradients reach the prototypes and the
//! neuromodulators through a straight-through substitute: the forward value is
//! the hard `E`, the backward pass sees `sigmoid((C - alpha) / tau_e)` on
//! thresholded entries and `beta` on entries left to rewiring.

use crate::config::{Config, EvalRewire};
use crate::encoder::AgentFeatures;
use crate::error::{NestError, Result};
use crate::numerics::{mlp_forward, Activation, Graph, MlpSpec, ParamSpec, ParamStore, Tensor, Var};
use crate::pass::{Mode, Pass};
use crate::scenario::SceneInput;

const PROTOTYPES: &str = "hyperform.prototypes";

fn alpha_spec(cfg: &Config) -> MlpSpec {
    MlpSpec::new(&[cfg.s, cfg.h_neuro, 1], Activation::Tanh)
}

fn beta_spec(cfg: &Config) -> MlpSpec {
    MlpSpec::new(&[cfg.d, cfg.h_neuro, 1], Activation::Tanh)
}

pub fn register_params(cfg: &Config, registry: &mut Vec<ParamSpec>) {
    if !cfg.ablation.hypergraph {
        return;
    }
    registry.push(ParamSpec::new(PROTOTYPES, cfg.s, cfg.d, cfg.d));
    if cfg.ablation.neuromodulator {
        alpha_spec(cfg).register("hyperform.alpha", registry);
        if cfg.ablation.small_world {
            beta_spec(cfg).register("hyperform.beta", registry);
        }
    }
}

/// Everything that fixes the discrete structure of one scene's incidence.
///
/// Re-using a recorded structure makes the forward pass a smooth function of
/// the parameters, which is what finite differences need.
#[derive(Debug, Clone, PartialEq)]
pub struct FrozenIncidence {
    pub incidence: Tensor,
    /// Entries whose backward substitute is the soft incidence.
    pub soft_mask: Tensor,
    /// Entries whose backward substitute is `beta`.
    pub beta_mask: Tensor,
    pub soft_anchor: Tensor,
    pub beta_anchor: f64,
}

#[derive(Debug, Clone)]
pub struct InteractionHypergraph {
    /// `C`, `(n+1) x s`.
    pub affinity: Var,
    /// `(n+1) x 1`.
    pub alpha: Var,
    /// `1 x 1`; absent when small-world rewiring is disabled.
    pub beta: Option<Var>,
    pub soft: Var,
    /// `C >= alpha`, before membership forcing.
    pub thresholded: Tensor,
    /// Thresholded entries plus the forced argmax on empty rows.
    pub hard: Tensor,
    /// Forward value of `E`.
    pub incidence: Tensor,
    /// `E` on the tape with straight-through gradients.
    pub incidence_st: Var,
    pub structure: FrozenIncidence,
}

fn mask_column(mask: &[bool]) -> Tensor {
    Tensor::column(mask.iter().map(|&m| if m { 1.0 } else { 0.0 }).collect())
}

/// `C_ij = sigmoid(<F_i, p_j> / sqrt(d))`, zero on masked rows.
pub fn compute_affinity(g: &mut Graph, params: &ParamStore, f_a: &AgentFeatures) -> Result<Var> {
    let p = g.param(params, PROTOTYPES)?;
    let (_, d) = g.value(f_a.features).dims();
    if g.value(p).cols() != d {
        return Err(NestError::shape(
            "compute_affinity",
            format!("features have width {d}, prototypes {:?}", g.value(p).shape()),
        ));
    }
    let pt = g.transpose(p)?;
    let dots = g.matmul(f_a.features, pt)?;
    let dots = g.scale(dots, 1.0 / (d as f64).sqrt())?;
    let c = g.sigmoid(dots)?;
    let mask = g.constant(mask_column(&f_a.mask));
    g.mul(c, mask)
}

/// Per-vertex threshold `alpha`, `(n+1) x 1`.
pub fn modulate_threshold(g: &mut Graph, params: &ParamStore, cfg: &Config, c: Var) -> Result<Var> {
    let rows = g.value(c).rows();
    if !cfg.ablation.neuromodulator {
        return Ok(g.constant(Tensor::filled(rows, 1, cfg.alpha_fixed)));
    }
    let z = mlp_forward(g, params, "hyperform.alpha", c, &alpha_spec(cfg))?;
    g.sigmoid(z)
}

/// Scene-level connection probability `beta` from the masked mean of the
/// valid agent features.
pub fn modulate_connection(
    g: &mut Graph,
    params: &ParamStore,
    cfg: &Config,
    f_a: &AgentFeatures,
) -> Result<Var> {
    if !cfg.ablation.neuromodulator {
        return Ok(g.constant(Tensor::scalar(cfg.beta_fixed)));
    }
    let valid = f_a.mask.iter().filter(|&&m| m).count();
    if valid == 0 {
        return Err(NestError::Usage("modulate_connection needs a valid agent".into()));
    }
    let weights = Tensor::row(
        f_a.mask
            .iter()
            .map(|&m| if m { 1.0 / valid as f64 } else { 0.0 })
            .collect(),
    );
    let w = g.constant(weights);
    let pooled = g.matmul(w, f_a.features)?;
    let z = mlp_forward(g, params, "hyperform.beta", pooled, &beta_spec(cfg))?;
    g.sigmoid(z)
}

/// `1` where `C_ij >= alpha_i`.
pub fn binarize(c: &Tensor, alpha: &Tensor) -> Result<Tensor> {
    let (rows, cols) = c.dims();
    if alpha.dims() != (rows, 1) {
        return Err(NestError::shape(
            "binarize",
            format!("C is {rows}x{cols}, alpha is {:?}", alpha.shape()),
        ));
    }
    let mut out = Tensor::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            if c.get(i, j) >= alpha.get(i, 0) {
                out.set(i, j, 1.0);
            }
        }
    }
    Ok(out)
}

/// Sets `argmax_j C_ij` on every valid row of `hard` that has no entry.
/// Ties go to the lowest hyperedge index.
pub fn force_membership(hard: &mut Tensor, c: &Tensor, mask: &[bool]) {
    for (i, _) in mask.iter().enumerate().filter(|(_, &m)| m) {
        if hard.row_slice(i).iter().any(|&v| v > 0.0) {
            continue;
        }
        let row = c.row_slice(i);
        let best = (0..row.len()).fold(0, |b, j| if row[j] > row[b] { j } else { b });
        hard.set(i, best, 1.0);
    }
}

/// Uniform draws `eta`, one per entry, keyed by agent id so that permuting
/// agents permutes the draws with them. In threshold evaluation mode every
/// draw is `0.5`, which turns `eta <= beta` into `beta >= 0.5`.
pub fn rewire_draws(cfg: &Config, pass: &Pass, scene: &SceneInput) -> Tensor {
    let rows = scene.rows();
    if pass.mode == Mode::Eval && cfg.eval_rewire == EvalRewire::Threshold {
        return Tensor::filled(rows, cfg.s, 0.5);
    }
    let mut eta = Tensor::zeros(rows, cfg.s);
    for (i, id) in scene.agent_ids.iter().enumerate() {
        if !scene.mask[i] {
            continue;
        }
        let stream = pass.rewire_stream(cfg.resample_rewire, &scene.scenario_id, id);
        for j in 0..cfg.s {
            eta.set(i, j, stream.uniform_at(j as u64));
        }
    }
    eta
}

/// Newman-Watts style shortcuts: every uncertain valid entry with
/// `eta_ij <= beta` is switched on. Existing entries are never removed.
pub fn rewire(hard: &Tensor, beta: f64, eta: &Tensor, mask: &[bool]) -> Result<Tensor> {
    if hard.dims() != eta.dims() || hard.rows() != mask.len() {
        return Err(NestError::shape(
            "rewire",
            format!(
                "hard {:?}, eta {:?}, mask {}",
                hard.shape(),
                eta.shape(),
                mask.len()
            ),
        ));
    }
    let mut e = hard.clone();
    for (i, _) in mask.iter().enumerate().filter(|(_, &m)| m) {
        for j in 0..hard.cols() {
            if hard.get(i, j) == 0.0 && eta.get(i, j) <= beta {
                e.set(i, j, 1.0);
            }
        }
    }
    Ok(e)
}

/// Runs affinity, neuromodulation, binarization, forcing and rewiring, and
/// builds the straight-through incidence. A `frozen` structure replaces the
/// discrete decisions with recorded ones.
pub fn form_hypergraph(
    g: &mut Graph,
    params: &ParamStore,
    cfg: &Config,
    f_a: &AgentFeatures,
    scene: &SceneInput,
    pass: &Pass,
    frozen: Option<&FrozenIncidence>,
) -> Result<InteractionHypergraph> {
    let c = compute_affinity(g, params, f_a)?;
    let alpha = modulate_threshold(g, params, cfg, c)?;
    let beta = if cfg.ablation.small_world {
        Some(modulate_connection(g, params, cfg, f_a)?)
    } else {
        None
    };
    let diff = g.sub(c, alpha)?;
    let soft = g.scale(diff, 1.0 / cfg.tau_e)?;
    let soft = g.sigmoid(soft)?;
    let mask_col = g.constant(mask_column(&f_a.mask));
    let soft = g.mul(soft, mask_col)?;

    let c_val = g.value(c).clone();
    let mut thresholded = binarize(&c_val, g.value(alpha))?;
    for (i, _) in f_a.mask.iter().enumerate().filter(|(_, &m)| !m) {
        for j in 0..thresholded.cols() {
            thresholded.set(i, j, 0.0);
        }
    }
    let mut hard = thresholded.clone();
    force_membership(&mut hard, &c_val, &f_a.mask);

    let (rows, s) = c_val.dims();
    let structure = match frozen {
        Some(fz) => {
            if fz.incidence.dims() != (rows, s) {
                return Err(NestError::shape(
                    "form_hypergraph",
                    format!(
                        "frozen incidence {:?} for a {rows}x{s} scene",
                        fz.incidence.shape()
                    ),
                ));
            }
            fz.clone()
        }
        None => {
            let beta_val = beta.map(|b| g.value(b).item());
            let incidence = match beta_val {
                Some(b) => rewire(&hard, b, &rewire_draws(cfg, pass, scene), &f_a.mask)?,
                None => hard.clone(),
            };
            let mut soft_mask = Tensor::zeros(rows, s);
            let mut beta_mask = Tensor::zeros(rows, s);
            for (i, _) in f_a.mask.iter().enumerate().filter(|(_, &m)| m) {
                for j in 0..s {
                    if beta.is_some() && hard.get(i, j) == 0.0 {
                        beta_mask.set(i, j, 1.0);
                    } else {
                        soft_mask.set(i, j, 1.0);
                    }
                }
            }
            FrozenIncidence {
                incidence,
                soft_mask,
                beta_mask,
                soft_anchor: g.value(soft).clone(),
                beta_anchor: beta_val.unwrap_or(0.0),
            }
        }
    };

    let mut e = g.constant(structure.incidence.clone());
    let anchor = g.constant(structure.soft_anchor.clone());
    let delta = g.sub(soft, anchor)?;
    let m = g.constant(structure.soft_mask.clone());
    let delta = g.mul(delta, m)?;
    e = g.add(e, delta)?;
    if let Some(b) = beta {
        let anchor = g.constant(Tensor::scalar(structure.beta_anchor));
        let delta = g.sub(b, anchor)?;
        let m = g.constant(structure.beta_mask.clone());
        let delta = g.mul(m, delta)?;
        e = g.add(e, delta)?;
    }

    Ok(InteractionHypergraph {
        affinity: c,
        alpha,
        beta,
        soft,
        thresholded,
        hard,
        incidence: structure.incidence.clone(),
        incidence_st: e,
        structure,
    })
}
