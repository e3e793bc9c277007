//! Reverse-mode differentiation over a recorded tape.
//!
//! A [`Graph`] records every op applied during a forward pass. Parameter
//! leaves borrow their values from a [`ParamStore`]; all other node values are
//! owned by the tape. [`Graph::backward`] walks the tape in reverse and
//! returns gradients for every trainable parameter that reached the loss.

use std::borrow::Cow;
use std::collections::HashMap;

use super::tensor::{matmul, matmul_a_bt_acc, matmul_at_b_acc};
use super::{Gradients, ParamId, ParamStore, Tensor};
use crate::error::{Error, Result};

/// Handle to a node on a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    Param { uid: u64, id: ParamId },
    MatMul(Var, Var),
    AddBias(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Affine(Var, f64),
    Sigmoid(Var),
    Tanh(Var),
    Relu(Var),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    Reshape(Var),
    GatherRows(Var, Vec<usize>),
    SumGatherRows(Var, Vec<usize>),
    SoftmaxRows(Var),
    Sum(Var),
    MeanRows(Var),
    SoftmaxXent {
        logits: Var,
        labels: Vec<usize>,
        weights: Vec<f64>,
        probs: Tensor,
    },
}

struct Node<'a> {
    value: Cow<'a, Tensor>,
    op: Op,
    requires_grad: bool,
}

#[derive(Default)]
pub struct Graph<'a> {
    nodes: Vec<Node<'a>>,
    bound: HashMap<(u64, ParamId), Var>,
}

impl<'a> Graph<'a> {
    pub fn new() -> Self {
        Graph::default()
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

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value: Cow::Owned(value),
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    /// A constant leaf that borrows its value.
    pub fn constant_ref(&mut self, value: &'a Tensor) -> Var {
        self.nodes.push(Node {
            value: Cow::Borrowed(value),
            op: Op::Leaf,
            requires_grad: false,
        });
        Var(self.nodes.len() - 1)
    }

    /// Binds a parameter. Each parameter is bound at most once per graph;
    /// parameters of a frozen store become constants.
    pub fn param(&mut self, store: &'a ParamStore, id: ParamId) -> Var {
        let key = (store.uid(), id);
        if let Some(&v) = self.bound.get(&key) {
            return v;
        }
        let requires_grad = !store.is_frozen();
        self.nodes.push(Node {
            value: Cow::Borrowed(store.value(id)),
            op: Op::Param {
                uid: store.uid(),
                id,
            },
            requires_grad,
        });
        let v = Var(self.nodes.len() - 1);
        self.bound.insert(key, v);
        v
    }

    fn matrix_dims(&self, v: Var, op: &'static str) -> Result<(usize, usize)> {
        let s = self.shape(v);
        match s.len() {
            2 => Ok((s[0], s[1])),
            _ => Err(Error::dim(op, s, &[0, 0])),
        }
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.matrix_dims(a, "matmul")?;
        let (k2, n) = self.matrix_dims(b, "matmul")?;
        if k != k2 {
            return Err(Error::dim("matmul", self.shape(a), self.shape(b)));
        }
        let out = matmul(self.value(a).data(), self.value(b).data(), m, k, n);
        let rg = self.rg(&[a, b]);
        Ok(self.push(Tensor::from_parts(vec![m, n], out), Op::MatMul(a, b), rg))
    }

    /// `x[m,n] + bias[n]` broadcast over rows.
    pub fn add_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let (m, n) = self.matrix_dims(x, "add_bias")?;
        if self.value(bias).len() != n {
            return Err(Error::dim("add_bias", self.shape(x), self.shape(bias)));
        }
        let b = self.value(bias).data();
        let mut out = self.value(x).data().to_vec();
        for row in out.chunks_mut(n) {
            for (o, bv) in row.iter_mut().zip(b) {
                *o += bv;
            }
        }
        let rg = self.rg(&[x, bias]);
        Ok(self.push(Tensor::from_parts(vec![m, n], out), Op::AddBias(x, bias), rg))
    }

    /// `input · weights + bias`.
    pub fn affine(&mut self, input: Var, weights: Var, bias: Var) -> Result<Var> {
        let (_, k) = self.matrix_dims(input, "affine")?;
        let (k2, n) = self.matrix_dims(weights, "affine")?;
        if k != k2 || self.value(bias).len() != n {
            return Err(Error::dim("affine", self.shape(input), self.shape(weights)));
        }
        let z = self.matmul(input, weights)?;
        self.add_bias(z, bias)
    }

    fn same_shape(&self, a: Var, b: Var, op: &'static str) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::dim(op, self.shape(a), self.shape(b)));
        }
        Ok(())
    }

    fn zip_with(&mut self, a: Var, b: Var, op: Op, f: impl Fn(f64, f64) -> f64) -> Var {
        let out: Vec<f64> = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| f(*x, *y))
            .collect();
        let shape = self.shape(a).to_vec();
        let rg = self.rg(&[a, b]);
        self.push(Tensor::from_parts(shape, out), op, rg)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "add")?;
        Ok(self.zip_with(a, b, Op::Add(a, b), |x, y| x + y))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "sub")?;
        Ok(self.zip_with(a, b, Op::Sub(a, b), |x, y| x - y))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "mul")?;
        Ok(self.zip_with(a, b, Op::Mul(a, b), |x, y| x * y))
    }

    fn map(&mut self, x: Var, op: Op, f: impl Fn(f64) -> f64) -> Var {
        let out: Vec<f64> = self.value(x).data().iter().map(|v| f(*v)).collect();
        let shape = self.shape(x).to_vec();
        let rg = self.rg(&[x]);
        self.push(Tensor::from_parts(shape, out), op, rg)
    }

    /// `scale · x + shift`.
    pub fn affine_scalar(&mut self, x: Var, scale: f64, shift: f64) -> Var {
        self.map(x, Op::Affine(x, scale), |v| scale * v + shift)
    }

    pub fn scale(&mut self, x: Var, scale: f64) -> Var {
        self.affine_scalar(x, scale, 0.0)
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        self.map(x, Op::Sigmoid(x), sigmoid)
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        self.map(x, Op::Tanh(x), f64::tanh)
    }

    pub fn relu(&mut self, x: Var) -> Var {
        self.map(x, Op::Relu(x), |v| v.max(0.0))
    }

    /// Concatenates matrices with equal row counts along columns.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts.first().ok_or(Error::EmptyInput("concat_cols"))?;
        let (m, _) = self.matrix_dims(first, "concat_cols")?;
        let mut widths = Vec::with_capacity(parts.len());
        for &p in parts {
            let (r, c) = self.matrix_dims(p, "concat_cols")?;
            if r != m {
                return Err(Error::dim("concat_cols", self.shape(first), self.shape(p)));
            }
            widths.push(c);
        }
        let total: usize = widths.iter().sum();
        let mut out = Vec::with_capacity(m * total);
        for i in 0..m {
            for (&p, &w) in parts.iter().zip(&widths) {
                out.extend_from_slice(&self.value(p).data()[i * w..(i + 1) * w]);
            }
        }
        let rg = self.rg(parts);
        Ok(self.push(
            Tensor::from_parts(vec![m, total], out),
            Op::ConcatCols(parts.to_vec()),
            rg,
        ))
    }

    /// Stacks matrices with equal column counts along rows.
    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts.first().ok_or(Error::EmptyInput("concat_rows"))?;
        let (_, n) = self.matrix_dims(first, "concat_rows")?;
        let mut rows = 0;
        let mut out = Vec::new();
        for &p in parts {
            let (r, c) = self.matrix_dims(p, "concat_rows")?;
            if c != n {
                return Err(Error::dim("concat_rows", self.shape(first), self.shape(p)));
            }
            rows += r;
            out.extend_from_slice(self.value(p).data());
        }
        let rg = self.rg(parts);
        Ok(self.push(
            Tensor::from_parts(vec![rows, n], out),
            Op::ConcatRows(parts.to_vec()),
            rg,
        ))
    }

    pub fn reshape(&mut self, x: Var, shape: Vec<usize>) -> Result<Var> {
        let t = self.value(x).clone().reshaped(shape)?;
        let rg = self.rg(&[x]);
        Ok(self.push(t, Op::Reshape(x), rg))
    }

    /// Row lookup into a `[rows, d]` table; output `[indices.len(), d]`.
    pub fn gather_rows(&mut self, table: Var, indices: &[usize]) -> Result<Var> {
        let (rows, d) = self.matrix_dims(table, "gather_rows")?;
        if indices.is_empty() {
            return Err(Error::EmptyInput("gather_rows"));
        }
        let mut out = Vec::with_capacity(indices.len() * d);
        for &i in indices {
            if i >= rows {
                return Err(Error::Index {
                    context: "gather_rows",
                    index: i,
                    limit: rows,
                });
            }
            out.extend_from_slice(self.value(table).row_slice(i));
        }
        let rg = self.rg(&[table]);
        Ok(self.push(
            Tensor::from_parts(vec![indices.len(), d], out),
            Op::GatherRows(table, indices.to_vec()),
            rg,
        ))
    }

    /// Sum of selected table rows as `[1, d]`; equivalent to a binary row
    /// vector times the table. An empty selection yields zeros.
    pub fn sum_gather_rows(&mut self, table: Var, indices: &[usize]) -> Result<Var> {
        let (rows, d) = self.matrix_dims(table, "sum_gather_rows")?;
        let mut out = vec![0.0; d];
        for &i in indices {
            if i >= rows {
                return Err(Error::Index {
                    context: "sum_gather_rows",
                    index: i,
                    limit: rows,
                });
            }
            for (o, v) in out.iter_mut().zip(self.value(table).row_slice(i)) {
                *o += v;
            }
        }
        let rg = self.rg(&[table]);
        Ok(self.push(
            Tensor::from_parts(vec![1, d], out),
            Op::SumGatherRows(table, indices.to_vec()),
            rg,
        ))
    }

    pub fn softmax_rows(&mut self, x: Var) -> Result<Var> {
        let (m, n) = self.matrix_dims(x, "softmax_rows")?;
        let mut out = self.value(x).data().to_vec();
        for row in out.chunks_mut(n) {
            softmax_in_place(row);
        }
        let rg = self.rg(&[x]);
        Ok(self.push(Tensor::from_parts(vec![m, n], out), Op::SoftmaxRows(x), rg))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).data().iter().sum();
        let rg = self.rg(&[x]);
        self.push(Tensor::scalar(s), Op::Sum(x), rg)
    }

    /// Column means of `[m, n]` as `[1, n]`.
    pub fn mean_rows(&mut self, x: Var) -> Result<Var> {
        let (m, n) = self.matrix_dims(x, "mean_rows")?;
        let mut out = vec![0.0; n];
        for row in self.value(x).data().chunks(n) {
            for (o, v) in out.iter_mut().zip(row) {
                *o += v;
            }
        }
        out.iter_mut().for_each(|o| *o /= m as f64);
        let rg = self.rg(&[x]);
        Ok(self.push(Tensor::from_parts(vec![1, n], out), Op::MeanRows(x), rg))
    }

    /// Mean softmax cross-entropy; see [`Graph::weighted_softmax_cross_entropy`].
    pub fn softmax_cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let w = vec![1.0; labels.len()];
        self.weighted_softmax_cross_entropy(logits, labels, &w)
    }

    /// `(1/B) Σ_b w_b · (−log softmax(logits_b)[label_b])`, stabilised by
    /// max-subtraction. Probabilities stay available via [`Graph::xent_probs`].
    pub fn weighted_softmax_cross_entropy(
        &mut self,
        logits: Var,
        labels: &[usize],
        weights: &[f64],
    ) -> Result<Var> {
        let (b, c) = self.matrix_dims(logits, "softmax_cross_entropy")?;
        if c < 2 {
            return Err(Error::Config(format!("cross-entropy needs ≥ 2 classes, got {c}")));
        }
        if labels.len() != b || weights.len() != b {
            return Err(Error::dim("softmax_cross_entropy", &[b], &[labels.len(), weights.len()]));
        }
        let x = self.value(logits).data();
        let mut probs = x.to_vec();
        let mut loss = 0.0;
        for (i, (&y, &w)) in labels.iter().zip(weights).enumerate() {
            if y >= c {
                return Err(Error::Index {
                    context: "softmax_cross_entropy label",
                    index: y,
                    limit: c,
                });
            }
            let row = &x[i * c..(i + 1) * c];
            let lse = log_sum_exp(row);
            loss -= w * (row[y] - lse);
            softmax_in_place(&mut probs[i * c..(i + 1) * c]);
        }
        loss /= b as f64;
        let rg = self.rg(&[logits]);
        Ok(self.push(
            Tensor::scalar(loss),
            Op::SoftmaxXent {
                logits,
                labels: labels.to_vec(),
                weights: weights.to_vec(),
                probs: Tensor::from_parts(vec![b, c], probs),
            },
            rg,
        ))
    }

    /// Class probabilities cached by a cross-entropy node.
    pub fn xent_probs(&self, loss: Var) -> Option<&Tensor> {
        match &self.nodes[loss.0].op {
            Op::SoftmaxXent { probs, .. } => Some(probs),
            _ => None,
        }
    }

    /// Reverse pass from a scalar node.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if loss.0 >= self.nodes.len() {
            return Err(Error::State(format!(
                "backward on node {} but the tape holds {} nodes; run a forward pass first",
                loss.0,
                self.nodes.len()
            )));
        }
        if self.value(loss).len() != 1 {
            return Err(Error::dim("backward (loss must be scalar)", self.shape(loss), &[1]));
        }
        let mut grads: Vec<Option<Tensor>> = (0..=loss.0).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::full(self.shape(loss), 1.0));
        let mut out = Gradients::default();

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            let gd = g.data();
            match &node.op {
                Op::Leaf => {}
                Op::Param { uid, id } => {
                    match out.entries.iter_mut().find(|(u, p, _)| u == uid && p == id) {
                        Some((_, _, acc)) => acc.add_assign(&g),
                        None => out.entries.push((*uid, *id, g.clone())),
                    }
                }
                Op::MatMul(a, b) => {
                    let (m, k) = dims2(self.shape(*a));
                    let n = self.shape(*b)[1];
                    if self.requires_grad(*a) {
                        let ga = slot(&mut grads, *a, self.shape(*a));
                        matmul_a_bt_acc(gd, self.value(*b).data(), ga.data_mut(), m, k, n);
                    }
                    if self.requires_grad(*b) {
                        let gb = slot(&mut grads, *b, self.shape(*b));
                        matmul_at_b_acc(self.value(*a).data(), gd, gb.data_mut(), m, k, n);
                    }
                }
                Op::AddBias(x, bias) => {
                    if self.requires_grad(*x) {
                        slot(&mut grads, *x, self.shape(*x)).add_assign(&g);
                    }
                    if self.requires_grad(*bias) {
                        let n = g.cols();
                        let gb = slot(&mut grads, *bias, self.shape(*bias));
                        for row in gd.chunks(n) {
                            for (o, v) in gb.data_mut().iter_mut().zip(row) {
                                *o += v;
                            }
                        }
                    }
                }
                Op::Add(a, b) => {
                    for v in [*a, *b] {
                        if self.requires_grad(v) {
                            slot(&mut grads, v, self.shape(v)).add_assign(&g);
                        }
                    }
                }
                Op::Sub(a, b) => {
                    if self.requires_grad(*a) {
                        slot(&mut grads, *a, self.shape(*a)).add_assign(&g);
                    }
                    if self.requires_grad(*b) {
                        let gb = slot(&mut grads, *b, self.shape(*b));
                        for (o, v) in gb.data_mut().iter_mut().zip(gd) {
                            *o -= v;
                        }
                    }
                }
                Op::Mul(a, b) => {
                    for (x, other) in [(*a, *b), (*b, *a)] {
                        if self.requires_grad(x) {
                            let ov = self.value(other).data();
                            let gx = slot(&mut grads, x, self.shape(x));
                            for ((o, gv), w) in gx.data_mut().iter_mut().zip(gd).zip(ov) {
                                *o += gv * w;
                            }
                        }
                    }
                }
                Op::Affine(x, scale) => {
                    let gx = slot(&mut grads, *x, self.shape(*x));
                    for (o, gv) in gx.data_mut().iter_mut().zip(gd) {
                        *o += scale * gv;
                    }
                }
                Op::Sigmoid(x) => {
                    let y = node.value.data();
                    let gx = slot(&mut grads, *x, self.shape(*x));
                    for ((o, gv), yv) in gx.data_mut().iter_mut().zip(gd).zip(y) {
                        *o += gv * yv * (1.0 - yv);
                    }
                }
                Op::Tanh(x) => {
                    let y = node.value.data();
                    let gx = slot(&mut grads, *x, self.shape(*x));
                    for ((o, gv), yv) in gx.data_mut().iter_mut().zip(gd).zip(y) {
                        *o += gv * (1.0 - yv * yv);
                    }
                }
                Op::Relu(x) => {
                    let xin = self.value(*x).data();
                    let gx = slot(&mut grads, *x, self.shape(*x));
                    for ((o, gv), xv) in gx.data_mut().iter_mut().zip(gd).zip(xin) {
                        if *xv > 0.0 {
                            *o += gv;
                        }
                    }
                }
                Op::ConcatCols(parts) => {
                    let total = g.cols();
                    let mut offset = 0;
                    for &p in parts {
                        let (m, w) = dims2(self.shape(p));
                        if self.requires_grad(p) {
                            let gp = slot(&mut grads, p, self.shape(p));
                            for r in 0..m {
                                let src = &gd[r * total + offset..r * total + offset + w];
                                for (o, v) in gp.data_mut()[r * w..(r + 1) * w].iter_mut().zip(src) {
                                    *o += v;
                                }
                            }
                        }
                        offset += w;
                    }
                }
                Op::ConcatRows(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let n = self.value(p).len();
                        if self.requires_grad(p) {
                            let gp = slot(&mut grads, p, self.shape(p));
                            for (o, v) in gp.data_mut().iter_mut().zip(&gd[offset..offset + n]) {
                                *o += v;
                            }
                        }
                        offset += n;
                    }
                }
                Op::Reshape(x) => {
                    let gx = slot(&mut grads, *x, self.shape(*x));
                    for (o, v) in gx.data_mut().iter_mut().zip(gd) {
                        *o += v;
                    }
                }
                Op::GatherRows(table, idx) => {
                    let d = g.cols();
                    let gt = slot(&mut grads, *table, self.shape(*table));
                    for (r, &i) in idx.iter().enumerate() {
                        let dst = &mut gt.data_mut()[i * d..(i + 1) * d];
                        for (o, v) in dst.iter_mut().zip(&gd[r * d..(r + 1) * d]) {
                            *o += v;
                        }
                    }
                }
                Op::SumGatherRows(table, idx) => {
                    let d = g.cols();
                    let gt = slot(&mut grads, *table, self.shape(*table));
                    for &i in idx {
                        let dst = &mut gt.data_mut()[i * d..(i + 1) * d];
                        for (o, v) in dst.iter_mut().zip(gd) {
                            *o += v;
                        }
                    }
                }
                Op::SoftmaxRows(x) => {
                    let y = node.value.data();
                    let n = g.cols();
                    let gx = slot(&mut grads, *x, self.shape(*x));
                    for ((orow, grow), yrow) in gx
                        .data_mut()
                        .chunks_mut(n)
                        .zip(gd.chunks(n))
                        .zip(y.chunks(n))
                    {
                        let dot: f64 = grow.iter().zip(yrow).map(|(a, b)| a * b).sum();
                        for ((o, gv), yv) in orow.iter_mut().zip(grow).zip(yrow) {
                            *o += yv * (gv - dot);
                        }
                    }
                }
                Op::Sum(x) => {
                    let gx = slot(&mut grads, *x, self.shape(*x));
                    let s = gd[0];
                    gx.data_mut().iter_mut().for_each(|o| *o += s);
                }
                Op::MeanRows(x) => {
                    let (m, n) = dims2(self.shape(*x));
                    let gx = slot(&mut grads, *x, self.shape(*x));
                    for row in gx.data_mut().chunks_mut(n) {
                        for (o, v) in row.iter_mut().zip(gd) {
                            *o += v / m as f64;
                        }
                    }
                }
                Op::SoftmaxXent {
                    logits,
                    labels,
                    weights,
                    probs,
                } => {
                    let (b, c) = dims2(probs.shape());
                    let up = gd[0] / b as f64;
                    let gx = slot(&mut grads, *logits, self.shape(*logits));
                    for (r, (&y, &w)) in labels.iter().zip(weights).enumerate() {
                        let prow = &probs.data()[r * c..(r + 1) * c];
                        let orow = &mut gx.data_mut()[r * c..(r + 1) * c];
                        for (j, (o, p)) in orow.iter_mut().zip(prow).enumerate() {
                            let target = if j == y { 1.0 } else { 0.0 };
                            *o += up * w * (p - target);
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

fn dims2(shape: &[usize]) -> (usize, usize) {
    (shape[0], shape[1])
}

fn slot<'g>(grads: &'g mut [Option<Tensor>], v: Var, shape: &[usize]) -> &'g mut Tensor {
    grads[v.0].get_or_insert_with(|| Tensor::from_parts(shape.to_vec(), vec![0.0; shape.iter().product()]))
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn log_sum_exp(row: &[f64]) -> f64 {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

pub(crate) fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    for v in row.iter_mut() {
        *v /= total;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_of_parameter_has_unit_gradient() {
        let mut store = ParamStore::new();
        let w = store.add("w", Tensor::new(vec![2, 3], vec![0.5; 6]).unwrap());
        let mut g = Graph::new();
        let wv = g.param(&store, w);
        let loss = g.sum(wv);
        let grads = g.backward(loss).unwrap();
        assert_eq!(grads.get(&store, w).unwrap().data(), &[1.0; 6]);
    }

    #[test]
    fn zero_times_anything_gives_zero_gradient() {
        let mut store = ParamStore::new();
        let w = store.add("w", Tensor::new(vec![1, 3], vec![1.0, -2.0, 3.0]).unwrap());
        let mut g = Graph::new();
        let wv = g.param(&store, w);
        let z = g.scale(wv, 0.0);
        let loss = g.sum(z);
        let grads = g.backward(loss).unwrap();
        assert!(grads.get(&store, w).unwrap().data().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn backward_before_forward_is_state_error() {
        let mut other = Graph::new();
        let v = {
            let a = other.constant(Tensor::scalar(1.0));
            other.sum(a)
        };
        let empty = Graph::new();
        assert!(matches!(empty.backward(v), Err(Error::State(_))));
    }

    #[test]
    fn frozen_store_yields_no_gradients() {
        let mut store = ParamStore::new();
        let w = store.zeros("w", &[1, 2]);
        store.freeze();
        let mut g = Graph::new();
        let wv = g.param(&store, w);
        let loss = g.sum(wv);
        assert!(g.backward(loss).unwrap().is_empty());
    }

    #[test]
    fn rebinding_returns_same_var() {
        let mut store = ParamStore::new();
        let w = store.zeros("w", &[1, 2]);
        let mut g = Graph::new();
        assert_eq!(g.param(&store, w), g.param(&store, w));
    }
}
