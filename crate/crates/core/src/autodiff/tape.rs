//! Tape-based reverse-mode differentiation over dense `f64` arrays.
//!
//! A [`Tape`] records every primitive in evaluation order, so the node list
//! is topologically sorted by construction. [`Tape::backward`] walks it in
//! reverse and accumulates adjoints additively across fan-out.

use crate::autodiff::Tensor;
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Add(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Exp(Var),
    Log(Var),
    Tanh(Var),
    MatMul(Var, Var),
    SoftmaxT { input: Var, axis: usize, tau: f64 },
    Mean { input: Var, axis: usize },
    Sum(Var),
    CrossEntropy { logits: Var, labels: Vec<usize> },
    Reshape(Var),
    BroadcastRows { input: Var, times: usize },
    ConcatCols(Vec<Var>),
    BatchedMatMul { a: Var, b: Var, p: usize, k: usize, q: usize },
}

#[derive(Debug, Clone)]
struct Node {
    shape: Vec<usize>,
    value: Vec<f64>,
    op: Op,
    needs_grad: bool,
}

/// Primitive kinds exposed by [`Tape::forward_primitive`].
#[derive(Debug, Clone, PartialEq)]
pub enum Primitive {
    MatMul,
    Add,
    Mul,
    Exp,
    Log,
    SoftmaxT { axis: usize, tau: f64 },
    Mean { axis: usize },
    CrossEntropy { labels: Vec<usize> },
}

/// Splits `shape` around `axis` into `(outer, len, inner)` strides.
fn axis_split(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Adjoints produced by [`Tape::backward`], indexed by [`Var`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    pub fn get(&self, var: Var) -> Option<&[f64]> {
        self.grads.get(var.0).and_then(|g| g.as_deref())
    }

    /// Adds the gradient of `var` into `tensor.grad`; a no-op when `var`
    /// does not depend on any trainable leaf.
    pub fn accumulate_into(&self, var: Var, tensor: &mut Tensor) -> Result<()> {
        if let Some(g) = self.get(var) {
            tensor.accumulate_grad(g)?;
        }
        Ok(())
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, var: Var) -> &[f64] {
        &self.nodes[var.0].value
    }

    pub fn shape(&self, var: Var) -> &[usize] {
        &self.nodes[var.0].shape
    }

    /// Copies the current contents of `t` onto the tape as a leaf.
    pub fn leaf(&mut self, t: &Tensor) -> Var {
        self.push(t.shape().to_vec(), t.values().to_vec(), Op::Leaf, t.requires_grad())
    }

    pub fn constant(&mut self, shape: Vec<usize>, value: Vec<f64>) -> Result<Var> {
        let numel: usize = shape.iter().product();
        if numel != value.len() {
            return Err(Error::Dimension {
                op: "constant",
                shapes: vec![shape, vec![value.len()]],
            });
        }
        Ok(self.push(shape, value, Op::Leaf, false))
    }

    fn push(&mut self, shape: Vec<usize>, value: Vec<f64>, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            shape,
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].needs_grad)
    }

    fn dim_err(&self, op: &'static str, vars: &[Var]) -> Error {
        Error::Dimension {
            op,
            shapes: vars.iter().map(|v| self.nodes[v.0].shape.clone()).collect(),
        }
    }

    /// Generic entry point dispatching on a [`Primitive`].
    pub fn forward_primitive(&mut self, prim: Primitive, inputs: &[Var]) -> Result<Var> {
        let arity = match prim {
            Primitive::MatMul | Primitive::Add | Primitive::Mul => 2,
            _ => 1,
        };
        if inputs.len() != arity {
            return Err(Error::Parameter(format!(
                "{prim:?} expects {arity} inputs, got {}",
                inputs.len()
            )));
        }
        match prim {
            Primitive::MatMul => self.matmul(inputs[0], inputs[1]),
            Primitive::Add => self.add(inputs[0], inputs[1]),
            Primitive::Mul => self.mul(inputs[0], inputs[1]),
            Primitive::Exp => Ok(self.exp(inputs[0])),
            Primitive::Log => Ok(self.log(inputs[0])),
            Primitive::SoftmaxT { axis, tau } => self.softmax_t(inputs[0], axis, tau),
            Primitive::Mean { axis } => self.mean(inputs[0], axis),
            Primitive::CrossEntropy { labels } => self.cross_entropy(inputs[0], &labels),
        }
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.shape(a) != self.shape(b) {
            return Err(self.dim_err("add", &[a, b]));
        }
        let value = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(x, y)| x + y)
            .collect();
        let needs = self.needs(&[a, b]);
        Ok(self.push(self.shape(a).to_vec(), value, Op::Add(a, b), needs))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.shape(a) != self.shape(b) {
            return Err(self.dim_err("mul", &[a, b]));
        }
        let value = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(x, y)| x * y)
            .collect();
        let needs = self.needs(&[a, b]);
        Ok(self.push(self.shape(a).to_vec(), value, Op::Mul(a, b), needs))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let value = self.value(a).iter().map(|x| x * c).collect();
        let needs = self.needs(&[a]);
        self.push(self.shape(a).to_vec(), value, Op::Scale(a, c), needs)
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let value = self.value(a).iter().map(|x| x.exp()).collect();
        let needs = self.needs(&[a]);
        self.push(self.shape(a).to_vec(), value, Op::Exp(a), needs)
    }

    pub fn log(&mut self, a: Var) -> Var {
        let value = self.value(a).iter().map(|x| x.ln()).collect();
        let needs = self.needs(&[a]);
        self.push(self.shape(a).to_vec(), value, Op::Log(a), needs)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let value = self.value(a).iter().map(|x| x.tanh()).collect();
        let needs = self.needs(&[a]);
        self.push(self.shape(a).to_vec(), value, Op::Tanh(a), needs)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(self.dim_err("matmul", &[a, b]));
        }
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let (va, vb) = (self.value(a), self.value(b));
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let row = &mut out[i * n..(i + 1) * n];
            for p in 0..k {
                let aip = va[i * k + p];
                if aip == 0.0 {
                    continue;
                }
                let brow = &vb[p * n..(p + 1) * n];
                row.iter_mut().zip(brow).for_each(|(o, bv)| *o += aip * bv);
            }
        }
        let needs = self.needs(&[a, b]);
        Ok(self.push(vec![m, n], out, Op::MatMul(a, b), needs))
    }

    /// Softmax of `a / tau` along `axis`, stabilized by subtracting the
    /// per-slice maximum before exponentiation.
    pub fn softmax_t(&mut self, a: Var, axis: usize, tau: f64) -> Result<Var> {
        let shape = self.shape(a).to_vec();
        if axis >= shape.len() {
            return Err(self.dim_err("softmax_t", &[a]));
        }
        if tau.is_nan() || tau <= 0.0 {
            return Err(Error::Parameter(format!("temperature must be > 0, got {tau}")));
        }
        let (outer, len, inner) = axis_split(&shape, axis);
        let input = self.value(a);
        let mut out = vec![0.0; input.len()];
        for o in 0..outer {
            for j in 0..inner {
                let idx = |i: usize| (o * len + i) * inner + j;
                let max = (0..len)
                    .map(|i| input[idx(i)])
                    .fold(f64::NEG_INFINITY, f64::max);
                let mut total = 0.0;
                for i in 0..len {
                    let e = ((input[idx(i)] - max) / tau).exp();
                    out[idx(i)] = e;
                    total += e;
                }
                for i in 0..len {
                    out[idx(i)] /= total;
                }
            }
        }
        let needs = self.needs(&[a]);
        Ok(self.push(shape, out, Op::SoftmaxT { input: a, axis, tau }, needs))
    }

    /// Mean along `axis`, keeping the reduced axis with length 1.
    pub fn mean(&mut self, a: Var, axis: usize) -> Result<Var> {
        let mut shape = self.shape(a).to_vec();
        if axis >= shape.len() || shape[axis] == 0 {
            return Err(self.dim_err("mean", &[a]));
        }
        let (outer, len, inner) = axis_split(&shape, axis);
        let input = self.value(a);
        let mut out = vec![0.0; outer * inner];
        for o in 0..outer {
            for i in 0..len {
                for j in 0..inner {
                    out[o * inner + j] += input[(o * len + i) * inner + j];
                }
            }
        }
        out.iter_mut().for_each(|v| *v /= len as f64);
        shape[axis] = 1;
        let needs = self.needs(&[a]);
        Ok(self.push(shape, out, Op::Mean { input: a, axis }, needs))
    }

    /// Sum of all entries, as a one-element tensor.
    pub fn sum(&mut self, a: Var) -> Var {
        let total = self.value(a).iter().sum();
        let needs = self.needs(&[a]);
        self.push(vec![1], vec![total], Op::Sum(a), needs)
    }

    /// Mean cross-entropy of rows of `logits` (`[B, C]` or `[C]`) against
    /// integer labels. Returns a one-element tensor.
    pub fn cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let shape = self.shape(logits).to_vec();
        let (rows, classes) = match shape.as_slice() {
            [c] => (1, *c),
            [b, c] => (*b, *c),
            _ => return Err(self.dim_err("cross_entropy", &[logits])),
        };
        if labels.len() != rows || labels.iter().any(|&y| y >= classes) || rows == 0 {
            return Err(Error::Dimension {
                op: "cross_entropy",
                shapes: vec![shape, vec![labels.len()]],
            });
        }
        let v = self.value(logits);
        let mut total = 0.0;
        for (r, &y) in labels.iter().enumerate() {
            let row = &v[r * classes..(r + 1) * classes];
            total += log_sum_exp(row) - row[y];
        }
        let needs = self.needs(&[logits]);
        Ok(self.push(
            vec![1],
            vec![total / rows as f64],
            Op::CrossEntropy {
                logits,
                labels: labels.to_vec(),
            },
            needs,
        ))
    }

    pub fn reshape(&mut self, a: Var, shape: Vec<usize>) -> Result<Var> {
        if shape.iter().product::<usize>() != self.value(a).len() {
            return Err(Error::Dimension {
                op: "reshape",
                shapes: vec![self.shape(a).to_vec(), shape],
            });
        }
        let value = self.value(a).to_vec();
        let needs = self.needs(&[a]);
        Ok(self.push(shape, value, Op::Reshape(a), needs))
    }

    /// Tiles a `[r, c]` tensor `times` times along the rows: `[times * r, c]`.
    pub fn broadcast_rows(&mut self, a: Var, times: usize) -> Result<Var> {
        let shape = self.shape(a).to_vec();
        let (r, c) = match shape.as_slice() {
            [c] => (1, *c),
            [r, c] => (*r, *c),
            _ => return Err(self.dim_err("broadcast_rows", &[a])),
        };
        let value = self.value(a).repeat(times);
        let needs = self.needs(&[a]);
        Ok(self.push(
            vec![times * r, c],
            value,
            Op::BroadcastRows { input: a, times },
            needs,
        ))
    }

    /// Concatenates rank-2 tensors with equal row counts along columns.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let Some(first) = parts.first() else {
            return Err(Error::Parameter("concat_cols needs at least one input".into()));
        };
        let rows = self.shape(*first)[0];
        if parts
            .iter()
            .any(|p| self.shape(*p).len() != 2 || self.shape(*p)[0] != rows)
        {
            return Err(self.dim_err("concat_cols", parts));
        }
        let total: usize = parts.iter().map(|p| self.shape(*p)[1]).sum();
        let mut out = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for p in parts {
                let c = self.shape(*p)[1];
                out.extend_from_slice(&self.value(*p)[r * c..(r + 1) * c]);
            }
        }
        let needs = self.needs(parts);
        Ok(self.push(vec![rows, total], out, Op::ConcatCols(parts.to_vec()), needs))
    }

    /// Per-row matrix product: row `b` of `a` is a `p x k` matrix, row `b` of
    /// `b` a `k x q` matrix (both row-major); output row `b` is `p x q`.
    pub fn batched_matmul(&mut self, a: Var, b: Var, p: usize, k: usize, q: usize) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.len() != 2 || sb.len() != 2 || sa[0] != sb[0] || sa[1] != p * k || sb[1] != k * q {
            return Err(self.dim_err("batched_matmul", &[a, b]));
        }
        let batch = sa[0];
        let (va, vb) = (self.value(a), self.value(b));
        let mut out = vec![0.0; batch * p * q];
        for n in 0..batch {
            let am = &va[n * p * k..(n + 1) * p * k];
            let bm = &vb[n * k * q..(n + 1) * k * q];
            let om = &mut out[n * p * q..(n + 1) * p * q];
            for i in 0..p {
                for kk in 0..k {
                    let w = am[i * k + kk];
                    if w == 0.0 {
                        continue;
                    }
                    let brow = &bm[kk * q..(kk + 1) * q];
                    om[i * q..(i + 1) * q]
                        .iter_mut()
                        .zip(brow)
                        .for_each(|(o, bv)| *o += w * bv);
                }
            }
        }
        let needs = self.needs(&[a, b]);
        Ok(self.push(
            vec![batch, p * q],
            out,
            Op::BatchedMatMul { a, b, p, k, q },
            needs,
        ))
    }

    /// Reverse sweep from a one-element `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let loss_node = &self.nodes[loss.0];
        if loss_node.value.len() != 1 {
            return Err(Error::NonScalarLoss(loss_node.shape.clone()));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        if loss_node.needs_grad {
            grads[loss.0] = Some(vec![1.0]);
        }
        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            self.propagate(node, &g, &mut grads);
            grads[idx] = Some(g);
        }
        for (idx, slot) in grads.iter_mut().enumerate() {
            if !self.nodes[idx].needs_grad {
                *slot = None;
            }
        }
        Ok(Gradients { grads })
    }

    fn propagate(&self, node: &Node, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let mut send = |var: Var, contrib: Vec<f64>| {
            if !self.nodes[var.0].needs_grad {
                return;
            }
            match &mut grads[var.0] {
                Some(acc) => acc.iter_mut().zip(&contrib).for_each(|(a, c)| *a += c),
                slot @ None => *slot = Some(contrib),
            }
        };
        match &node.op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                send(*a, g.to_vec());
                send(*b, g.to_vec());
            }
            Op::Mul(a, b) => {
                let (va, vb) = (self.value(*a), self.value(*b));
                send(*a, g.iter().zip(vb).map(|(g, y)| g * y).collect());
                send(*b, g.iter().zip(va).map(|(g, x)| g * x).collect());
            }
            Op::Scale(a, c) => send(*a, g.iter().map(|g| g * c).collect()),
            Op::Exp(a) => send(*a, g.iter().zip(&node.value).map(|(g, y)| g * y).collect()),
            Op::Log(a) => send(
                *a,
                g.iter().zip(self.value(*a)).map(|(g, x)| g / x).collect(),
            ),
            Op::Tanh(a) => send(
                *a,
                g.iter()
                    .zip(&node.value)
                    .map(|(g, y)| g * (1.0 - y * y))
                    .collect(),
            ),
            Op::MatMul(a, b) => {
                let (sa, sb) = (self.shape(*a), self.shape(*b));
                let (m, k, n) = (sa[0], sa[1], sb[1]);
                let (va, vb) = (self.value(*a), self.value(*b));
                if self.nodes[a.0].needs_grad {
                    let mut ga = vec![0.0; m * k];
                    for i in 0..m {
                        for p in 0..k {
                            ga[i * k + p] = (0..n).map(|j| g[i * n + j] * vb[p * n + j]).sum();
                        }
                    }
                    send(*a, ga);
                }
                if self.nodes[b.0].needs_grad {
                    let mut gb = vec![0.0; k * n];
                    for i in 0..m {
                        for p in 0..k {
                            let aip = va[i * k + p];
                            for j in 0..n {
                                gb[p * n + j] += aip * g[i * n + j];
                            }
                        }
                    }
                    send(*b, gb);
                }
            }
            Op::SoftmaxT { input, axis, tau } => {
                let (outer, len, inner) = axis_split(&node.shape, *axis);
                let y = &node.value;
                let mut ga = vec![0.0; y.len()];
                for o in 0..outer {
                    for j in 0..inner {
                        let idx = |i: usize| (o * len + i) * inner + j;
                        let dot: f64 = (0..len).map(|i| g[idx(i)] * y[idx(i)]).sum();
                        for i in 0..len {
                            ga[idx(i)] = y[idx(i)] * (g[idx(i)] - dot) / tau;
                        }
                    }
                }
                send(*input, ga);
            }
            Op::Mean { input, axis } => {
                let shape = self.shape(*input);
                let (outer, len, inner) = axis_split(shape, *axis);
                let mut ga = vec![0.0; outer * len * inner];
                for o in 0..outer {
                    for i in 0..len {
                        for j in 0..inner {
                            ga[(o * len + i) * inner + j] = g[o * inner + j] / len as f64;
                        }
                    }
                }
                send(*input, ga);
            }
            Op::Sum(a) => send(*a, vec![g[0]; self.value(*a).len()]),
            Op::CrossEntropy { logits, labels } => {
                let v = self.value(*logits);
                let rows = labels.len();
                let classes = v.len() / rows;
                let mut ga = vec![0.0; v.len()];
                for (r, &y) in labels.iter().enumerate() {
                    let row = &v[r * classes..(r + 1) * classes];
                    let lse = log_sum_exp(row);
                    for c in 0..classes {
                        let p = (row[c] - lse).exp();
                        let target = if c == y { 1.0 } else { 0.0 };
                        ga[r * classes + c] = g[0] * (p - target) / rows as f64;
                    }
                }
                send(*logits, ga);
            }
            Op::Reshape(a) => send(*a, g.to_vec()),
            Op::BroadcastRows { input, times } => {
                let n = self.value(*input).len();
                let mut ga = vec![0.0; n];
                for t in 0..*times {
                    ga.iter_mut()
                        .zip(&g[t * n..(t + 1) * n])
                        .for_each(|(a, v)| *a += v);
                }
                send(*input, ga);
            }
            Op::ConcatCols(parts) => {
                let rows = node.shape[0];
                let total = node.shape[1];
                let mut offset = 0;
                for p in parts {
                    let c = self.shape(*p)[1];
                    let mut gp = Vec::with_capacity(rows * c);
                    for r in 0..rows {
                        gp.extend_from_slice(&g[r * total + offset..r * total + offset + c]);
                    }
                    offset += c;
                    send(*p, gp);
                }
            }
            Op::BatchedMatMul { a, b, p, k, q } => {
                let (p, k, q) = (*p, *k, *q);
                let batch = node.shape[0];
                let (va, vb) = (self.value(*a), self.value(*b));
                let need_a = self.nodes[a.0].needs_grad;
                let need_b = self.nodes[b.0].needs_grad;
                let mut ga = if need_a { vec![0.0; va.len()] } else { Vec::new() };
                let mut gb = if need_b { vec![0.0; vb.len()] } else { Vec::new() };
                for n in 0..batch {
                    let am = &va[n * p * k..(n + 1) * p * k];
                    let bm = &vb[n * k * q..(n + 1) * k * q];
                    let gm = &g[n * p * q..(n + 1) * p * q];
                    for i in 0..p {
                        for kk in 0..k {
                            let grow = &gm[i * q..(i + 1) * q];
                            let brow = &bm[kk * q..(kk + 1) * q];
                            if need_a {
                                ga[n * p * k + i * k + kk] =
                                    grow.iter().zip(brow).map(|(x, y)| x * y).sum();
                            }
                            if need_b {
                                let w = am[i * k + kk];
                                gb[n * k * q + kk * q..n * k * q + (kk + 1) * q]
                                    .iter_mut()
                                    .zip(grow)
                                    .for_each(|(o, gv)| *o += w * gv);
                            }
                        }
                    }
                }
                if need_a {
                    send(*a, ga);
                }
                if need_b {
                    send(*b, gb);
                }
            }
        }
    }
}

fn log_sum_exp(row: &[f64]) -> f64 {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn var(tape: &mut Tape, shape: Vec<usize>, v: Vec<f64>) -> Var {
        tape.leaf(&Tensor::new(shape, v).unwrap().param())
    }

    #[test]
    fn square_derivative() {
        let mut tape = Tape::new();
        let x = var(&mut tape, vec![1], vec![3.0]);
        let y = tape.mul(x, x).unwrap();
        let grads = tape.backward(y).unwrap();
        assert_eq!(grads.get(x).unwrap(), &[6.0]);
    }

    #[test]
    fn constant_has_no_grad() {
        let mut tape = Tape::new();
        let x = var(&mut tape, vec![2], vec![1.0, 2.0]);
        let c = tape.constant(vec![2], vec![5.0, 7.0]).unwrap();
        let y = tape.mul(x, c).unwrap();
        let s = tape.sum(y);
        let grads = tape.backward(s).unwrap();
        assert!(grads.get(c).is_none());
        assert_eq!(grads.get(x).unwrap(), &[5.0, 7.0]);
    }

    #[test]
    fn softmax_uniform_and_limit() {
        let mut tape = Tape::new();
        let a = tape.constant(vec![3], vec![0.0; 3]).unwrap();
        let s = tape.softmax_t(a, 0, 1.0).unwrap();
        for v in tape.value(s) {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
        let b = tape.constant(vec![2], vec![1.0, 0.0]).unwrap();
        let s = tape.softmax_t(b, 0, 0.01).unwrap();
        assert!((tape.value(s)[0] - 1.0).abs() < 1e-12);
        assert!(tape.value(s)[1] < 1e-40);
    }

    #[test]
    fn softmax_survives_masked_surrogates() {
        let mut tape = Tape::new();
        let a = tape.constant(vec![1, 3], vec![30.0, -1e9, -30.0]).unwrap();
        let s = tape.softmax_t(a, 1, 0.1).unwrap();
        let out = tape.value(s);
        assert!(out.iter().all(|v| v.is_finite()));
        assert_eq!(out[1], 0.0);
    }

    #[test]
    fn cross_entropy_values() {
        // -log softmax: log(1 + e^-20) and 20 + log(1 + e^-20)
        let mut tape = Tape::new();
        let a = tape.constant(vec![2], vec![10.0, -10.0]).unwrap();
        let ce = tape.cross_entropy(a, &[0]).unwrap();
        assert!((tape.value(ce)[0] - 2.061_153_620_314_381e-9).abs() < 1e-15);
        let b = tape.constant(vec![2], vec![-10.0, 10.0]).unwrap();
        let ce = tape.cross_entropy(b, &[0]).unwrap();
        assert!((tape.value(ce)[0] - 20.000_000_002_061_153).abs() < 1e-9);
    }

    #[test]
    fn shape_errors() {
        let mut tape = Tape::new();
        let a = tape.constant(vec![2, 3], vec![0.0; 6]).unwrap();
        let b = tape.constant(vec![2, 3], vec![0.0; 6]).unwrap();
        let err = tape.matmul(a, b).unwrap_err();
        match err {
            Error::Dimension { op, shapes } => {
                assert_eq!(op, "matmul");
                assert_eq!(shapes, vec![vec![2, 3], vec![2, 3]]);
            }
            other => panic!("unexpected {other:?}"),
        }
        let c = tape.constant(vec![3], vec![0.0; 3]).unwrap();
        assert!(tape.add(a, c).is_err());
    }

    #[test]
    fn non_scalar_loss_rejected() {
        let mut tape = Tape::new();
        let a = var(&mut tape, vec![2], vec![1.0, 2.0]);
        assert!(matches!(tape.backward(a), Err(Error::NonScalarLoss(_))));
    }

    #[test]
    fn fan_out_accumulates() {
        // f = x*x + 3x -> f' = 2x + 3
        let mut tape = Tape::new();
        let x = var(&mut tape, vec![1], vec![2.0]);
        let sq = tape.mul(x, x).unwrap();
        let lin = tape.scale(x, 3.0);
        let f = tape.add(sq, lin).unwrap();
        let grads = tape.backward(f).unwrap();
        assert_eq!(grads.get(x).unwrap(), &[7.0]);
    }

    #[test]
    fn primitive_dispatch_checks_arity() {
        let mut tape = Tape::new();
        let a = tape.constant(vec![1], vec![1.0]).unwrap();
        assert!(tape.forward_primitive(Primitive::Add, &[a]).is_err());
        let e = tape.forward_primitive(Primitive::Exp, &[a]).unwrap();
        assert!((tape.value(e)[0] - std::f64::consts::E).abs() < 1e-15);
    }
}
