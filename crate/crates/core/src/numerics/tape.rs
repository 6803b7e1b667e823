//! Reverse-mode differentiation over a closed vocabulary of matrix ops.
//!
//! A [`Graph`] records every value produced during one forward pass. Calling
//! [`Graph::backward`] on a scalar node walks the tape in reverse and returns
//! [`Gradients`] for every leaf that requires them. Every op checks its output
//! for NaN/Inf and fails with [`NestError::NonFinite`] instead of propagating.

use std::collections::BTreeMap;

use super::params::ParamStore;
use super::tensor::Tensor;
use crate::error::{NestError, Result};

/// Handle to a node on a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug, Clone, Copy)]
enum Binary {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Debug, Clone, Copy)]
enum Unary {
    Tanh,
    Sigmoid,
    Relu,
    Exp,
    Log,
    Abs,
    Sin,
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Binary(Binary, Var, Var),
    Unary(Unary, Var),
    Scale(Var, f64),
    AddScalar(Var),
    MatMul(Var, Var),
    Transpose(Var),
    SoftmaxRows(Var),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    SliceRows(Var, usize),
    SliceCols(Var, usize),
    SelectRows(Var, Vec<usize>),
    Reshape(Var),
    SumAll(Var),
    SumRows(Var),
    SumCols(Var),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
}

/// One forward pass worth of recorded computation.
#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    params: BTreeMap<String, Var>,
}

fn broadcast_dims(op: &str, a: (usize, usize), b: (usize, usize)) -> Result<(usize, usize)> {
    let dim = |x: usize, y: usize| -> Option<usize> {
        match (x, y) {
            _ if x == y => Some(x),
            (1, y) => Some(y),
            (x, 1) => Some(x),
            _ => None,
        }
    };
    match (dim(a.0, b.0), dim(a.1, b.1)) {
        (Some(r), Some(c)) => Ok((r, c)),
        _ => Err(NestError::shape(
            op,
            format!("cannot broadcast {}x{} with {}x{}", a.0, a.1, b.0, b.1),
        )),
    }
}

fn broadcast_zip(a: &Tensor, b: &Tensor, out: (usize, usize), f: impl Fn(f64, f64) -> f64) -> Tensor {
    let (ar, ac) = a.dims();
    let (br, bc) = b.dims();
    let (r, c) = out;
    let mut data = Vec::with_capacity(r * c);
    for i in 0..r {
        let ai = if ar == 1 { 0 } else { i };
        let bi = if br == 1 { 0 } else { i };
        for j in 0..c {
            let aj = if ac == 1 { 0 } else { j };
            let bj = if bc == 1 { 0 } else { j };
            data.push(f(a.data()[ai * ac + aj], b.data()[bi * bc + bj]));
        }
    }
    Tensor::from_parts(vec![r, c], data)
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn push(&mut self, op_name: &str, value: Tensor, op: Op, needs_grad: bool) -> Result<Var> {
        if !value.is_finite() {
            return Err(NestError::NonFinite { op: op_name.into() });
        }
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    /// Records a value that receives no gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            needs_grad: false,
        });
        Var(self.nodes.len() - 1)
    }

    /// Records an unnamed differentiable input.
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            needs_grad: true,
        });
        Var(self.nodes.len() - 1)
    }

    /// Leaf for the named parameter; repeated calls share one node.
    pub fn param(&mut self, store: &ParamStore, name: &str) -> Result<Var> {
        if let Some(&v) = self.params.get(name) {
            return Ok(v);
        }
        let value = store
            .get(name)
            .ok_or_else(|| NestError::Param(format!("missing parameter `{name}`")))?
            .clone();
        let v = self.leaf(value);
        self.params.insert(name.to_string(), v);
        Ok(v)
    }

    /// Names of every parameter touched so far.
    pub fn param_names(&self) -> impl Iterator<Item = &str> {
        self.params.keys().map(String::as_str)
    }

    fn binary(&mut self, kind: Binary, a: Var, b: Var) -> Result<Var> {
        let name = match kind {
            Binary::Add => "add",
            Binary::Sub => "sub",
            Binary::Mul => "mul",
            Binary::Div => "div",
        };
        let (av, bv) = (self.value(a), self.value(b));
        let out = broadcast_dims(name, av.dims(), bv.dims())?;
        let value = match kind {
            Binary::Add => broadcast_zip(av, bv, out, |x, y| x + y),
            Binary::Sub => broadcast_zip(av, bv, out, |x, y| x - y),
            Binary::Mul => broadcast_zip(av, bv, out, |x, y| x * y),
            Binary::Div => broadcast_zip(av, bv, out, |x, y| x / y),
        };
        let ng = self.needs(a) || self.needs(b);
        self.push(name, value, Op::Binary(kind, a, b), ng)
    }

    /// Elementwise sum; either side may broadcast along a unit axis.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(Binary::Add, a, b)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(Binary::Sub, a, b)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(Binary::Mul, a, b)
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(Binary::Div, a, b)
    }

    fn unary(&mut self, kind: Unary, a: Var) -> Result<Var> {
        let av = self.value(a);
        let (name, value) = match kind {
            Unary::Tanh => ("tanh", av.map(f64::tanh)),
            Unary::Sigmoid => ("sigmoid", av.map(sigmoid)),
            Unary::Relu => ("relu", av.map(|x| x.max(0.0))),
            Unary::Exp => ("exp", av.map(f64::exp)),
            Unary::Log => ("log", av.map(f64::ln)),
            Unary::Abs => ("abs", av.map(f64::abs)),
            Unary::Sin => ("sin", av.map(f64::sin)),
        };
        let ng = self.needs(a);
        self.push(name, value, Op::Unary(kind, a), ng)
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        self.unary(Unary::Tanh, a)
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        self.unary(Unary::Sigmoid, a)
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        self.unary(Unary::Relu, a)
    }

    pub fn exp(&mut self, a: Var) -> Result<Var> {
        self.unary(Unary::Exp, a)
    }

    pub fn log(&mut self, a: Var) -> Result<Var> {
        self.unary(Unary::Log, a)
    }

    pub fn abs(&mut self, a: Var) -> Result<Var> {
        self.unary(Unary::Abs, a)
    }

    pub fn sin(&mut self, a: Var) -> Result<Var> {
        self.unary(Unary::Sin, a)
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Result<Var> {
        let value = self.value(a).map(|x| x * factor);
        let ng = self.needs(a);
        self.push("scale", value, Op::Scale(a, factor), ng)
    }

    pub fn add_scalar(&mut self, a: Var, offset: f64) -> Result<Var> {
        let value = self.value(a).map(|x| x + offset);
        let ng = self.needs(a);
        self.push("add_scalar", value, Op::AddScalar(a), ng)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).matmul(self.value(b))?;
        let ng = self.needs(a) || self.needs(b);
        self.push("matmul", value, Op::MatMul(a, b), ng)
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let value = self.value(a).transpose();
        let ng = self.needs(a);
        self.push("transpose", value, Op::Transpose(a), ng)
    }

    /// Softmax along each row.
    pub fn softmax_rows(&mut self, a: Var) -> Result<Var> {
        let av = self.value(a);
        let (r, c) = av.dims();
        let mut data = Vec::with_capacity(r * c);
        for i in 0..r {
            let row = av.row_slice(i);
            let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = row.iter().map(|x| (x - m).exp()).collect();
            let z: f64 = e.iter().sum();
            data.extend(e.into_iter().map(|x| x / z));
        }
        let ng = self.needs(a);
        self.push(
            "softmax",
            Tensor::from_parts(vec![r, c], data),
            Op::SoftmaxRows(a),
            ng,
        )
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let rows = parts
            .first()
            .map(|&p| self.value(p).rows())
            .ok_or_else(|| NestError::shape("concat_cols", "no inputs"))?;
        if parts.iter().any(|&p| self.value(p).rows() != rows) {
            return Err(NestError::shape("concat_cols", "row counts differ"));
        }
        let cols: usize = parts.iter().map(|&p| self.value(p).cols()).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for &p in parts {
                data.extend_from_slice(self.value(p).row_slice(i));
            }
        }
        let ng = parts.iter().any(|&p| self.needs(p));
        self.push(
            "concat_cols",
            Tensor::from_parts(vec![rows, cols], data),
            Op::ConcatCols(parts.to_vec()),
            ng,
        )
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let cols = parts
            .first()
            .map(|&p| self.value(p).cols())
            .ok_or_else(|| NestError::shape("concat_rows", "no inputs"))?;
        if parts.iter().any(|&p| self.value(p).cols() != cols) {
            return Err(NestError::shape("concat_rows", "column counts differ"));
        }
        let mut data = Vec::new();
        for &p in parts {
            data.extend_from_slice(self.value(p).data());
        }
        let rows = data.len() / cols.max(1);
        let rows = if cols == 0 {
            parts.iter().map(|&p| self.value(p).rows()).sum()
        } else {
            rows
        };
        let ng = parts.iter().any(|&p| self.needs(p));
        self.push(
            "concat_rows",
            Tensor::from_parts(vec![rows, cols], data),
            Op::ConcatRows(parts.to_vec()),
            ng,
        )
    }

    /// Rows `start..start + len`.
    pub fn slice_rows(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let av = self.value(a);
        let (r, c) = av.dims();
        if start + len > r {
            return Err(NestError::shape("slice_rows", format!("{start}+{len} > {r}")));
        }
        let data = av.data()[start * c..(start + len) * c].to_vec();
        let ng = self.needs(a);
        self.push(
            "slice_rows",
            Tensor::from_parts(vec![len, c], data),
            Op::SliceRows(a, start),
            ng,
        )
    }

    /// Columns `start..start + len`.
    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let av = self.value(a);
        let (r, c) = av.dims();
        if start + len > c {
            return Err(NestError::shape("slice_cols", format!("{start}+{len} > {c}")));
        }
        let mut data = Vec::with_capacity(r * len);
        for i in 0..r {
            data.extend_from_slice(&av.row_slice(i)[start..start + len]);
        }
        let ng = self.needs(a);
        self.push(
            "slice_cols",
            Tensor::from_parts(vec![r, len], data),
            Op::SliceCols(a, start),
            ng,
        )
    }

    pub fn select_rows(&mut self, a: Var, rows: &[usize]) -> Result<Var> {
        let av = self.value(a);
        let (r, c) = av.dims();
        let mut data = Vec::with_capacity(rows.len() * c);
        for &i in rows {
            if i >= r {
                return Err(NestError::shape("select_rows", format!("row {i} of {r}")));
            }
            data.extend_from_slice(av.row_slice(i));
        }
        let ng = self.needs(a);
        self.push(
            "select_rows",
            Tensor::from_parts(vec![rows.len(), c], data),
            Op::SelectRows(a, rows.to_vec()),
            ng,
        )
    }

    pub fn reshape(&mut self, a: Var, rows: usize, cols: usize) -> Result<Var> {
        let value = self.value(a).reshape(rows, cols)?;
        let ng = self.needs(a);
        self.push("reshape", value, Op::Reshape(a), ng)
    }

    pub fn sum_all(&mut self, a: Var) -> Result<Var> {
        let value = Tensor::scalar(self.value(a).sum());
        let ng = self.needs(a);
        self.push("sum_all", value, Op::SumAll(a), ng)
    }

    pub fn mean_all(&mut self, a: Var) -> Result<Var> {
        let n = self.value(a).len().max(1) as f64;
        let s = self.sum_all(a)?;
        self.scale(s, 1.0 / n)
    }

    /// Sums over rows, giving a `1 x cols` row.
    pub fn sum_rows(&mut self, a: Var) -> Result<Var> {
        let av = self.value(a);
        let (r, c) = av.dims();
        let mut data = vec![0.0; c];
        for i in 0..r {
            for (d, v) in data.iter_mut().zip(av.row_slice(i)) {
                *d += v;
            }
        }
        let ng = self.needs(a);
        self.push(
            "sum_rows",
            Tensor::from_parts(vec![1, c], data),
            Op::SumRows(a),
            ng,
        )
    }

    pub fn mean_rows(&mut self, a: Var) -> Result<Var> {
        let r = self.value(a).rows();
        if r == 0 {
            return Err(NestError::shape("mean_rows", "no rows"));
        }
        let s = self.sum_rows(a)?;
        self.scale(s, 1.0 / r as f64)
    }

    /// Sums over columns, giving a `rows x 1` column.
    pub fn sum_cols(&mut self, a: Var) -> Result<Var> {
        let av = self.value(a);
        let r = av.rows();
        let data = (0..r).map(|i| av.row_slice(i).iter().sum()).collect();
        let ng = self.needs(a);
        self.push(
            "sum_cols",
            Tensor::from_parts(vec![r, 1], data),
            Op::SumCols(a),
            ng,
        )
    }

    /// Reverse sweep from a `1 x 1` loss.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if self.value(loss).len() != 1 {
            return Err(NestError::Usage(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.value(loss).shape()
            )));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Tensor::from_parts(self.value(loss).shape().to_vec(), vec![1.0]));

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.needs_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            self.propagate(node, &g, &mut grads);
            grads[idx] = Some(g);
        }

        for g in grads.iter().flatten() {
            if !g.is_finite() {
                return Err(NestError::NonFinite {
                    op: "backward".into(),
                });
            }
        }
        Ok(Gradients {
            grads,
            params: self.params.clone(),
        })
    }

    fn accumulate(&self, grads: &mut [Option<Tensor>], v: Var, g: Tensor) {
        if !self.needs(v) {
            return;
        }
        match &mut grads[v.0] {
            Some(existing) => existing.add_assign(&g),
            slot @ None => *slot = Some(g),
        }
    }

    fn propagate(&self, node: &Node, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let out = &node.value;
        match &node.op {
            Op::Leaf => {}
            Op::Binary(kind, a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                let dims = g.dims();
                let (ga, gb) = match kind {
                    Binary::Add => (g.clone(), g.clone()),
                    Binary::Sub => (g.clone(), g.map(|x| -x)),
                    Binary::Mul => (
                        broadcast_zip(g, bv, dims, |x, y| x * y),
                        broadcast_zip(g, av, dims, |x, y| x * y),
                    ),
                    Binary::Div => (
                        broadcast_zip(g, bv, dims, |x, y| x / y),
                        broadcast_zip(&broadcast_zip(g, av, dims, |x, y| x * y), bv, dims, |x, y| {
                            -x / (y * y)
                        }),
                    ),
                };
                let (ar, ac) = av.dims();
                let (br, bc) = bv.dims();
                self.accumulate(grads, *a, ga.reduce_to(ar, ac));
                self.accumulate(grads, *b, gb.reduce_to(br, bc));
            }
            Op::Unary(kind, a) => {
                let av = self.value(*a);
                let local = match kind {
                    Unary::Tanh => out.map(|y| 1.0 - y * y),
                    Unary::Sigmoid => out.map(|y| y * (1.0 - y)),
                    Unary::Relu => av.map(|x| if x > 0.0 { 1.0 } else { 0.0 }),
                    Unary::Exp => out.clone(),
                    Unary::Log => av.map(|x| 1.0 / x),
                    Unary::Abs => av.map(|x| {
                        if x > 0.0 {
                            1.0
                        } else if x < 0.0 {
                            -1.0
                        } else {
                            0.0
                        }
                    }),
                    Unary::Sin => av.map(f64::cos),
                };
                let ga = g.zip_map(&local, |x, y| x * y).expect("same shape");
                self.accumulate(grads, *a, ga);
            }
            Op::Scale(a, f) => self.accumulate(grads, *a, g.map(|x| x * f)),
            Op::AddScalar(a) => self.accumulate(grads, *a, g.clone()),
            Op::MatMul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                if self.needs(*a) {
                    let ga = g.matmul(&bv.transpose()).expect("matmul dims");
                    self.accumulate(grads, *a, ga);
                }
                if self.needs(*b) {
                    let gb = av.transpose().matmul(g).expect("matmul dims");
                    self.accumulate(grads, *b, gb);
                }
            }
            Op::Transpose(a) => self.accumulate(grads, *a, g.transpose()),
            Op::SoftmaxRows(a) => {
                let (r, c) = out.dims();
                let mut data = Vec::with_capacity(r * c);
                for i in 0..r {
                    let y = out.row_slice(i);
                    let gy = g.row_slice(i);
                    let dot: f64 = y.iter().zip(gy).map(|(a, b)| a * b).sum();
                    data.extend(y.iter().zip(gy).map(|(yv, gv)| yv * (gv - dot)));
                }
                self.accumulate(grads, *a, Tensor::from_parts(vec![r, c], data));
            }
            Op::ConcatCols(parts) => {
                let rows = out.rows();
                let mut offset = 0;
                for &p in parts {
                    let pc = self.value(p).cols();
                    if self.needs(p) {
                        let mut data = Vec::with_capacity(rows * pc);
                        for i in 0..rows {
                            data.extend_from_slice(&g.row_slice(i)[offset..offset + pc]);
                        }
                        self.accumulate(grads, p, Tensor::from_parts(vec![rows, pc], data));
                    }
                    offset += pc;
                }
            }
            Op::ConcatRows(parts) => {
                let cols = out.cols();
                let mut offset = 0;
                for &p in parts {
                    let pr = self.value(p).rows();
                    if self.needs(p) {
                        let data = g.data()[offset * cols..(offset + pr) * cols].to_vec();
                        self.accumulate(grads, p, Tensor::from_parts(vec![pr, cols], data));
                    }
                    offset += pr;
                }
            }
            Op::SliceRows(a, start) => {
                let (r, c) = self.value(*a).dims();
                let mut ga = Tensor::zeros(r, c);
                let len = out.rows();
                for i in 0..len {
                    for j in 0..c {
                        ga.set(start + i, j, g.get(i, j));
                    }
                }
                self.accumulate(grads, *a, ga);
            }
            Op::SliceCols(a, start) => {
                let (r, c) = self.value(*a).dims();
                let mut ga = Tensor::zeros(r, c);
                let len = out.cols();
                for i in 0..r {
                    for j in 0..len {
                        ga.set(i, start + j, g.get(i, j));
                    }
                }
                self.accumulate(grads, *a, ga);
            }
            Op::SelectRows(a, rows) => {
                let (r, c) = self.value(*a).dims();
                let mut ga = Tensor::zeros(r, c);
                for (k, &i) in rows.iter().enumerate() {
                    for j in 0..c {
                        let v = ga.get(i, j) + g.get(k, j);
                        ga.set(i, j, v);
                    }
                }
                self.accumulate(grads, *a, ga);
            }
            Op::Reshape(a) => {
                let shape = self.value(*a).shape().to_vec();
                self.accumulate(grads, *a, Tensor::from_parts(shape, g.data().to_vec()));
            }
            Op::SumAll(a) => {
                let (r, c) = self.value(*a).dims();
                self.accumulate(grads, *a, Tensor::filled(r, c, g.item()));
            }
            Op::SumRows(a) => {
                let (r, c) = self.value(*a).dims();
                let data = (0..r).flat_map(|_| g.data().iter().copied()).collect();
                self.accumulate(grads, *a, Tensor::from_parts(vec![r, c], data));
            }
            Op::SumCols(a) => {
                let (r, c) = self.value(*a).dims();
                let data = (0..r).flat_map(|i| std::iter::repeat_n(g.data()[i], c)).collect();
                self.accumulate(grads, *a, Tensor::from_parts(vec![r, c], data));
            }
        }
    }
}

/// Result of [`Graph::backward`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
    params: BTreeMap<String, Var>,
}

impl Gradients {
    /// Gradient for any node, `None` if it was unreachable from the loss.
    pub fn wrt(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    /// Gradients aligned with `store`: one entry per parameter name, zero for
    /// parameters that never reached the tape.
    pub fn for_store(&self, store: &ParamStore) -> BTreeMap<String, Tensor> {
        store
            .iter()
            .map(|(name, t)| {
                let g = self
                    .params
                    .get(name)
                    .and_then(|v| self.wrt(*v))
                    .cloned()
                    .unwrap_or_else(|| {
                        let (r, c) = t.dims();
                        Tensor::from_parts(t.shape().to_vec(), vec![0.0; r * c])
                    });
                (name.clone(), g)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_gradient() {
        let mut g = Graph::new();
        let w = g.leaf(Tensor::scalar(3.0));
        let y = g.mul(w, w).unwrap();
        let grads = g.backward(y).unwrap();
        assert_eq!(grads.wrt(w).unwrap().item(), 6.0);
    }

    #[test]
    fn product_gradient() {
        let mut g = Graph::new();
        let a = g.leaf(Tensor::scalar(2.0));
        let b = g.leaf(Tensor::scalar(5.0));
        let y = g.mul(a, b).unwrap();
        let grads = g.backward(y).unwrap();
        assert_eq!(grads.wrt(a).unwrap().item(), 5.0);
        assert_eq!(grads.wrt(b).unwrap().item(), 2.0);
    }

    #[test]
    fn non_scalar_loss_is_usage_error() {
        let mut g = Graph::new();
        let a = g.leaf(Tensor::row(vec![1.0, 2.0]));
        assert!(matches!(g.backward(a), Err(NestError::Usage(_))));
    }

    #[test]
    fn non_finite_is_detected() {
        let mut g = Graph::new();
        let a = g.constant(Tensor::scalar(0.0));
        assert!(matches!(g.log(a), Err(NestError::NonFinite { .. })));
        let b = g.constant(Tensor::scalar(1000.0));
        assert!(matches!(g.exp(b), Err(NestError::NonFinite { .. })));
    }

    #[test]
    fn broadcast_bias_gradient_sums_rows() {
        let mut g = Graph::new();
        let x = g.constant(Tensor::matrix(3, 2, vec![1.0; 6]).unwrap());
        let b = g.leaf(Tensor::row(vec![0.5, -0.5]));
        let y = g.add(x, b).unwrap();
        let s = g.sum_all(y).unwrap();
        let grads = g.backward(s).unwrap();
        assert_eq!(grads.wrt(b).unwrap().data(), &[3.0, 3.0]);
    }

    #[test]
    fn unreachable_params_get_zero() {
        let mut store = ParamStore::new();
        store.insert("a", Tensor::scalar(1.0));
        store.insert("b", Tensor::row(vec![1.0, 2.0]));
        let mut g = Graph::new();
        let a = g.param(&store, "a").unwrap();
        let y = g.scale(a, 4.0).unwrap();
        let grads = g.backward(y).unwrap().for_store(&store);
        assert_eq!(grads["a"].item(), 4.0);
        assert_eq!(grads["b"].data(), &[0.0, 0.0]);
    }
}
