//! Shared building blocks: MLPs, temperature softmax, scaled dot-product
//! attention.

use super::params::{ParamSpec, ParamStore};
use super::tape::{Graph, Var};
use super::tensor::Tensor;
use crate::error::{NestError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    None,
    Tanh,
    Relu,
}

/// Layer sizes `[in, hidden.., out]`; the activation is applied between
/// layers, never after the last one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MlpSpec {
    pub sizes: Vec<usize>,
    pub activation: Activation,
    pub bias: bool,
}

impl MlpSpec {
    pub fn new(sizes: &[usize], activation: Activation) -> Self {
        MlpSpec {
            sizes: sizes.to_vec(),
            activation,
            bias: true,
        }
    }

    pub fn without_bias(mut self) -> Self {
        self.bias = false;
        self
    }

    pub fn input(&self) -> usize {
        self.sizes[0]
    }

    pub fn output(&self) -> usize {
        *self.sizes.last().expect("mlp has layers")
    }

    /// Appends this MLP's parameters under `prefix` to `registry`.
    pub fn register(&self, prefix: &str, registry: &mut Vec<ParamSpec>) {
        for (i, pair) in self.sizes.windows(2).enumerate() {
            let (fan_in, out) = (pair[0], pair[1]);
            registry.push(ParamSpec::new(format!("{prefix}.{i}.w"), fan_in, out, fan_in));
            if self.bias {
                registry.push(ParamSpec::new(format!("{prefix}.{i}.b"), 1, out, fan_in));
            }
        }
    }
}

/// Applies the MLP stored under `prefix` to each row of `x`.
pub fn mlp_forward(g: &mut Graph, params: &ParamStore, prefix: &str, x: Var, spec: &MlpSpec) -> Result<Var> {
    let layers = spec.sizes.len() - 1;
    let mut h = x;
    for i in 0..layers {
        let w_name = format!("{prefix}.{i}.w");
        let (rows, cols) = params
            .get(&w_name)
            .ok_or_else(|| NestError::Param(format!("missing parameter `{w_name}`")))?
            .dims();
        let in_cols = g.value(h).cols();
        if rows != in_cols || rows != spec.sizes[i] || cols != spec.sizes[i + 1] {
            return Err(NestError::shape(
                format!("{prefix} layer {i}"),
                format!(
                    "input has {in_cols} features, weight is {rows}x{cols}, spec wants {}x{}",
                    spec.sizes[i],
                    spec.sizes[i + 1]
                ),
            ));
        }
        let w = g.param(params, &w_name)?;
        h = g.matmul(h, w)?;
        if spec.bias {
            let b = g.param(params, &format!("{prefix}.{i}.b"))?;
            h = g.add(h, b)?;
        }
        if i + 1 < layers {
            h = match spec.activation {
                Activation::None => h,
                Activation::Tanh => g.tanh(h)?,
                Activation::Relu => g.relu(h)?,
            };
        }
    }
    Ok(h)
}

/// Row-wise `softmax(x / tau)` on the tape.
pub fn softmax_tau(g: &mut Graph, x: Var, tau: f64) -> Result<Var> {
    if !(tau > 0.0) {
        return Err(NestError::Param(format!(
            "softmax temperature must be > 0, got {tau}"
        )));
    }
    let scaled = if tau == 1.0 { x } else { g.scale(x, 1.0 / tau)? };
    g.softmax_rows(scaled)
}

/// Row-wise `softmax(x / tau)` on plain values.
pub fn softmax(x: &Tensor, tau: f64) -> Result<Tensor> {
    let mut g = Graph::new();
    let v = g.constant(x.clone());
    let s = softmax_tau(&mut g, v, tau)?;
    Ok(g.value(s).clone())
}

/// `softmax(q k^T / sqrt(d_k)) v`.
pub fn attention(g: &mut Graph, q: Var, k: Var, v: Var) -> Result<Var> {
    let dk = g.value(k).cols();
    let kt = g.transpose(k)?;
    let scores = g.matmul(q, kt)?;
    let scores = g.scale(scores, 1.0 / (dk.max(1) as f64).sqrt())?;
    let weights = g.softmax_rows(scores)?;
    g.matmul(weights, v)
}

/// `log(sum(exp(x)))` over a `1 x n` row, shifted by the (constant) max.
pub fn log_sum_exp(g: &mut Graph, x: Var) -> Result<Var> {
    let m = g
        .value(x)
        .data()
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    let shifted = g.add_scalar(x, -m)?;
    let e = g.exp(shifted)?;
    let s = g.sum_all(e)?;
    let l = g.log(s)?;
    g.add_scalar(l, m)
}
