//! Tape-based reverse-mode differentiation.
//!
//! A [`Tape`] records every operation applied to its [`Var`] handles in
//! execution order. [`Tape::backward`] walks the records once in reverse,
//! accumulating gradients into the inputs of each record. Trainable values
//! live in a [`ParamStore`] outside the tape and are bound per forward pass
//! with [`Tape::param`] / [`Tape::bind_params`].

use super::kernels::{self, LAYER_NORM_EPS};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub usize);

#[derive(Clone, Debug, PartialEq)]
pub struct ParamEntry {
    pub name: String,
    pub value: Tensor,
    /// Whether decoupled weight decay applies to this parameter.
    pub decay: bool,
}

/// Named trainable tensors. Order of registration is the canonical order
/// used by optimizers and checkpoints.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    entries: Vec<ParamEntry>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, name: impl Into<String>, value: Tensor, decay: bool) -> ParamId {
        let name = name.into();
        assert!(
            self.find(&name).is_none(),
            "parameter {name} registered twice"
        );
        self.entries.push(ParamEntry { name, value, decay });
        ParamId(self.entries.len() - 1)
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.entries.iter().position(|e| e.name == name).map(ParamId)
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.entries[id.0].value
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.entries[id.0].value
    }

    pub fn entry(&self, id: ParamId) -> &ParamEntry {
        &self.entries[id.0]
    }

    pub fn entries(&self) -> &[ParamEntry] {
        &self.entries
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.entries.len()).map(ParamId)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn num_scalars(&self) -> usize {
        self.entries.iter().map(|e| e.value.len()).sum()
    }
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    Param,
    MatMul(Var, Var),
    Transpose(Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    /// `[M×N] + [N]` with the right operand broadcast over rows.
    AddRow(Var, Var),
    /// Tensor times a one-element tensor.
    MulScalar(Var, Var),
    Scale(Var, f64),
    Exp(Var),
    Relu(Var),
    Sum(Var),
    Mean(Var),
    MeanRows(Var),
    Softmax(Var, usize),
    LogSoftmax(Var, usize),
    LayerNorm(Var),
    L2Normalize(Var),
    Gather(Var, Vec<usize>),
    ConcatRows(Vec<Var>),
    /// Column-wise max over consecutive row segments; stores the winning
    /// input row per output element.
    SegmentMax(Var, Vec<usize>),
    Reshape(Var),
}

#[derive(Clone, Debug)]
struct Node {
    value: Tensor,
    requires_grad: bool,
    op: Op,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    params: Vec<(ParamId, Var)>,
}

/// Gradients produced by one backward pass.
#[derive(Debug, Clone)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
    params: Vec<(ParamId, Var)>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    /// Gradient with respect to `v`, zeros when nothing flowed into it.
    pub fn wrt(&self, v: Var, tape: &Tape) -> Tensor {
        self.get(v)
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(tape.value(v).shape()))
    }

    /// Gradient for a bound parameter, if it was bound and reached.
    pub fn param(&self, id: ParamId) -> Option<&Tensor> {
        self.params
            .iter()
            .find(|(p, _)| *p == id)
            .and_then(|(_, v)| self.get(*v))
    }

    /// One gradient per parameter in store order (zeros when unreached).
    pub fn for_store(&self, store: &ParamStore) -> Vec<Tensor> {
        store
            .ids()
            .map(|id| {
                self.param(id)
                    .cloned()
                    .unwrap_or_else(|| Tensor::zeros(store.get(id).shape()))
            })
            .collect()
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

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    pub fn bound_params(&self) -> &[(ParamId, Var)] {
        &self.params
    }

    fn push(&mut self, value: Tensor, requires_grad: bool, op: Op) -> Var {
        self.nodes.push(Node {
            value,
            requires_grad,
            op,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    /// A value that never receives gradients.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, false, Op::Leaf)
    }

    /// A differentiable input that is not a stored parameter.
    pub fn input(&mut self, value: Tensor) -> Var {
        self.push(value, true, Op::Leaf)
    }

    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        if let Some((_, v)) = self.params.iter().find(|(p, _)| *p == id) {
            return *v;
        }
        let v = self.push(store.get(id).clone(), true, Op::Param);
        self.params.push((id, v));
        v
    }

    /// Binds every parameter in `store`; the result is indexed by `ParamId.0`.
    pub fn bind_params(&mut self, store: &ParamStore) -> Vec<Var> {
        store.ids().map(|id| self.param(store, id)).collect()
    }

    fn matrix_dims(&self, v: Var, op: &'static str) -> Result<(usize, usize)> {
        let s = self.value(v).shape();
        if s.len() != 2 {
            return Err(Error::shape(op, s, &[0, 0]));
        }
        Ok((s[0], s[1]))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.matrix_dims(a, "matmul")?;
        let (k2, n) = self.matrix_dims(b, "matmul")?;
        if k != k2 {
            return Err(Error::shape(
                "matmul",
                self.value(a).shape(),
                self.value(b).shape(),
            ));
        }
        let out = kernels::matmul(self.value(a).data(), self.value(b).data(), m, k, n);
        let rg = self.rg(&[a, b]);
        Ok(self.push(Tensor::new(vec![m, n], out)?, rg, Op::MatMul(a, b)))
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let (m, n) = self.matrix_dims(a, "transpose")?;
        let out = kernels::transpose(self.value(a).data(), m, n);
        let rg = self.rg(&[a]);
        Ok(self.push(Tensor::new(vec![n, m], out)?, rg, Op::Transpose(a)))
    }

    fn same_shape(&self, a: Var, b: Var, op: &'static str) -> Result<()> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa != sb {
            return Err(Error::shape(op, sa, sb));
        }
        Ok(())
    }

    fn zip_with(&mut self, a: Var, b: Var, op: Op, f: impl Fn(f64, f64) -> f64) -> Var {
        let va = self.value(a);
        let vb = self.value(b);
        let out: Vec<f64> = va.data().iter().zip(vb.data()).map(|(x, y)| f(*x, *y)).collect();
        let t = Tensor::new(va.shape().to_vec(), out).expect("same shape");
        let rg = self.rg(&[a, b]);
        self.push(t, rg, op)
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

    /// Adds a bias of length `N` to every row of an `M×N` matrix.
    pub fn add_row(&mut self, x: Var, bias: Var) -> Result<Var> {
        let (_, n) = self.matrix_dims(x, "add_row")?;
        if self.value(bias).len() != n {
            return Err(Error::shape(
                "add_row",
                self.value(x).shape(),
                self.value(bias).shape(),
            ));
        }
        let b = self.value(bias).data();
        let out: Vec<f64> = self
            .value(x)
            .data()
            .chunks_exact(n)
            .flat_map(|row| row.iter().zip(b).map(|(v, bv)| v + bv))
            .collect();
        let t = Tensor::new(self.value(x).shape().to_vec(), out)?;
        let rg = self.rg(&[x, bias]);
        Ok(self.push(t, rg, Op::AddRow(x, bias)))
    }

    pub fn mul_scalar(&mut self, x: Var, s: Var) -> Result<Var> {
        if !self.value(s).is_scalar() {
            return Err(Error::shape(
                "mul_scalar",
                self.value(x).shape(),
                self.value(s).shape(),
            ));
        }
        let sv = self.value(s).item();
        let out: Vec<f64> = self.value(x).data().iter().map(|v| v * sv).collect();
        let t = Tensor::new(self.value(x).shape().to_vec(), out)?;
        let rg = self.rg(&[x, s]);
        Ok(self.push(t, rg, Op::MulScalar(x, s)))
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Var {
        let out: Vec<f64> = self.value(x).data().iter().map(|v| v * c).collect();
        let t = Tensor::new(self.value(x).shape().to_vec(), out).expect("same shape");
        let rg = self.rg(&[x]);
        self.push(t, rg, Op::Scale(x, c))
    }

    pub fn neg(&mut self, x: Var) -> Var {
        self.scale(x, -1.0)
    }

    fn map(&mut self, x: Var, op: Op, f: impl Fn(f64) -> f64) -> Var {
        let out: Vec<f64> = self.value(x).data().iter().map(|v| f(*v)).collect();
        let t = Tensor::new(self.value(x).shape().to_vec(), out).expect("same shape");
        let rg = self.rg(&[x]);
        self.push(t, rg, op)
    }

    pub fn exp(&mut self, x: Var) -> Var {
        self.map(x, Op::Exp(x), f64::exp)
    }

    pub fn relu(&mut self, x: Var) -> Var {
        self.map(x, Op::Relu(x), |v| if v > 0.0 { v } else { 0.0 })
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).data().iter().sum();
        let rg = self.rg(&[x]);
        self.push(Tensor::scalar(s), rg, Op::Sum(x))
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let v = self.value(x);
        let s = v.data().iter().sum::<f64>() / v.len() as f64;
        let rg = self.rg(&[x]);
        self.push(Tensor::scalar(s), rg, Op::Mean(x))
    }

    /// `M×N → 1×N` average over rows.
    pub fn mean_rows(&mut self, x: Var) -> Result<Var> {
        let (m, n) = self.matrix_dims(x, "mean_rows")?;
        let mut out = vec![0.0; n];
        for row in self.value(x).data().chunks_exact(n) {
            for (o, v) in out.iter_mut().zip(row) {
                *o += v;
            }
        }
        out.iter_mut().for_each(|o| *o /= m as f64);
        let rg = self.rg(&[x]);
        Ok(self.push(Tensor::new(vec![1, n], out)?, rg, Op::MeanRows(x)))
    }

    fn check_axis(&self, x: Var, axis: usize, op: &'static str) -> Result<()> {
        let rank = self.value(x).rank();
        if axis >= rank {
            return Err(Error::Contract(format!(
                "{op}: axis {axis} out of range for rank {rank}"
            )));
        }
        Ok(())
    }

    pub fn softmax(&mut self, x: Var, axis: usize) -> Result<Var> {
        self.check_axis(x, axis, "softmax")?;
        let v = self.value(x);
        let out = kernels::softmax_axis(v.data(), v.shape(), axis);
        let t = Tensor::new(v.shape().to_vec(), out)?;
        let rg = self.rg(&[x]);
        Ok(self.push(t, rg, Op::Softmax(x, axis)))
    }

    pub fn log_softmax(&mut self, x: Var, axis: usize) -> Result<Var> {
        self.check_axis(x, axis, "log_softmax")?;
        let v = self.value(x);
        let out = kernels::log_softmax_axis(v.data(), v.shape(), axis);
        let t = Tensor::new(v.shape().to_vec(), out)?;
        let rg = self.rg(&[x]);
        Ok(self.push(t, rg, Op::LogSoftmax(x, axis)))
    }

    /// Parameter-free layer normalization over the last axis.
    pub fn layer_norm(&mut self, x: Var) -> Result<Var> {
        let v = self.value(x);
        let d = v.cols();
        if d < 2 {
            return Err(Error::Contract(format!(
                "layer_norm needs at least 2 features, got {d}"
            )));
        }
        let out = kernels::layer_norm_rows(v.data(), d, LAYER_NORM_EPS);
        let t = Tensor::new(v.shape().to_vec(), out)?;
        let rg = self.rg(&[x]);
        Ok(self.push(t, rg, Op::LayerNorm(x)))
    }

    /// Row-wise L2 normalization over the last axis.
    pub fn l2_normalize(&mut self, x: Var) -> Var {
        let v = self.value(x);
        let out = kernels::l2_normalize_rows(v.data(), v.cols());
        let t = Tensor::new(v.shape().to_vec(), out).expect("same shape");
        let rg = self.rg(&[x]);
        self.push(t, rg, Op::L2Normalize(x))
    }

    /// Picks elements by flat index into a 1-D tensor.
    pub fn gather(&mut self, x: Var, indices: Vec<usize>) -> Result<Var> {
        let v = self.value(x);
        if indices.is_empty() {
            return Err(Error::Contract("gather: no indices".into()));
        }
        if let Some(bad) = indices.iter().find(|&&i| i >= v.len()) {
            return Err(Error::Contract(format!(
                "gather: index {bad} out of range for {} elements",
                v.len()
            )));
        }
        let out: Vec<f64> = indices.iter().map(|&i| v.data()[i]).collect();
        let rg = self.rg(&[x]);
        Ok(self.push(Tensor::vector(out)?, rg, Op::Gather(x, indices)))
    }

    /// Stacks matrices with equal column counts vertically.
    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts
            .first()
            .ok_or_else(|| Error::Contract("concat_rows: no inputs".into()))?;
        let cols = self.value(first).cols();
        let mut data = Vec::new();
        let mut rows = 0;
        for &p in parts {
            let v = self.value(p);
            if v.cols() != cols {
                return Err(Error::shape(
                    "concat_rows",
                    self.value(first).shape(),
                    v.shape(),
                ));
            }
            rows += v.rows();
            data.extend_from_slice(v.data());
        }
        let rg = self.rg(parts);
        Ok(self.push(
            Tensor::new(vec![rows, cols], data)?,
            rg,
            Op::ConcatRows(parts.to_vec()),
        ))
    }

    /// Column-wise max over consecutive row segments of lengths `segments`.
    /// Ties resolve to the earliest row.
    pub fn segment_max(&mut self, x: Var, segments: &[usize]) -> Result<Var> {
        let (m, n) = self.matrix_dims(x, "segment_max")?;
        if segments.iter().sum::<usize>() != m || segments.iter().any(|&s| s == 0) {
            return Err(Error::Contract(format!(
                "segment_max: segments {segments:?} do not partition {m} rows"
            )));
        }
        let data = self.value(x).data();
        let mut out = Vec::with_capacity(segments.len() * n);
        let mut arg = Vec::with_capacity(segments.len() * n);
        let mut start = 0;
        for &len in segments {
            let mut best: Vec<f64> = data[start * n..(start + 1) * n].to_vec();
            let mut best_row = vec![start; n];
            for r in start + 1..start + len {
                for (j, &v) in data[r * n..(r + 1) * n].iter().enumerate() {
                    if v > best[j] {
                        best[j] = v;
                        best_row[j] = r;
                    }
                }
            }
            out.extend_from_slice(&best);
            arg.extend(best_row.iter().enumerate().map(|(j, &r)| r * n + j));
            start += len;
        }
        let rg = self.rg(&[x]);
        Ok(self.push(
            Tensor::new(vec![segments.len(), n], out)?,
            rg,
            Op::SegmentMax(x, arg),
        ))
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let t = self.value(x).reshaped(shape)?;
        let rg = self.rg(&[x]);
        Ok(self.push(t, rg, Op::Reshape(x)))
    }

    /// Reverse pass from a scalar `loss`. Does not mutate the tape, so it can
    /// be replayed.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let node = self
            .nodes
            .get(loss.0)
            .ok_or_else(|| Error::Contract(format!("loss node {} not on tape", loss.0)))?;
        if !node.value.is_scalar() {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                node.value.shape()
            )));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![1.0]);

        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.backprop_node(node, &g, &mut grads);
            grads[i] = Some(g);
        }

        let grads = grads
            .into_iter()
            .enumerate()
            .map(|(i, g)| {
                g.map(|g| Tensor::new(self.nodes[i].value.shape().to_vec(), g).expect("grad shape"))
            })
            .collect();
        Ok(Gradients {
            grads,
            params: self.params.clone(),
        })
    }

    fn accumulate(&self, grads: &mut [Option<Vec<f64>>], v: Var, contribution: Vec<f64>) {
        if !self.nodes[v.0].requires_grad {
            return;
        }
        match &mut grads[v.0] {
            Some(acc) => acc.iter_mut().zip(&contribution).for_each(|(a, c)| *a += c),
            slot @ None => *slot = Some(contribution),
        }
    }

    fn accumulate_with(
        &self,
        grads: &mut [Option<Vec<f64>>],
        v: Var,
        f: impl FnOnce() -> Vec<f64>,
    ) {
        if self.nodes[v.0].requires_grad {
            self.accumulate(grads, v, f());
        }
    }

    fn backprop_node(&self, node: &Node, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let val = |v: Var| &self.nodes[v.0].value;
        match &node.op {
            Op::Leaf | Op::Param => {}
            Op::MatMul(a, b) => {
                let (m, k) = (val(*a).shape()[0], val(*a).shape()[1]);
                let n = val(*b).shape()[1];
                self.accumulate_with(grads, *a, || kernels::matmul_nt(g, val(*b).data(), m, n, k));
                self.accumulate_with(grads, *b, || kernels::matmul_tn(val(*a).data(), g, m, k, n));
            }
            Op::Transpose(a) => {
                let (m, n) = (val(*a).shape()[0], val(*a).shape()[1]);
                self.accumulate(grads, *a, kernels::transpose(g, n, m));
            }
            Op::Add(a, b) => {
                self.accumulate_with(grads, *a, || g.to_vec());
                self.accumulate_with(grads, *b, || g.to_vec());
            }
            Op::Sub(a, b) => {
                self.accumulate_with(grads, *a, || g.to_vec());
                self.accumulate_with(grads, *b, || g.iter().map(|v| -v).collect());
            }
            Op::Mul(a, b) => {
                self.accumulate_with(grads, *a, || {
                    g.iter().zip(val(*b).data()).map(|(x, y)| x * y).collect()
                });
                self.accumulate_with(grads, *b, || {
                    g.iter().zip(val(*a).data()).map(|(x, y)| x * y).collect()
                });
            }
            Op::AddRow(x, bias) => {
                self.accumulate_with(grads, *x, || g.to_vec());
                self.accumulate_with(grads, *bias, || {
                    let n = val(*bias).len();
                    let mut acc = vec![0.0; n];
                    for row in g.chunks_exact(n) {
                        acc.iter_mut().zip(row).for_each(|(a, r)| *a += r);
                    }
                    acc
                });
            }
            Op::MulScalar(x, s) => {
                let sv = val(*s).item();
                self.accumulate_with(grads, *x, || g.iter().map(|v| v * sv).collect());
                self.accumulate_with(grads, *s, || vec![kernels::dot(g, val(*x).data())]);
            }
            Op::Scale(x, c) => {
                self.accumulate(grads, *x, g.iter().map(|v| v * c).collect());
            }
            Op::Exp(x) => {
                let y = node.value.data();
                self.accumulate(grads, *x, g.iter().zip(y).map(|(a, b)| a * b).collect());
            }
            Op::Relu(x) => {
                let xv = val(*x).data();
                self.accumulate(
                    grads,
                    *x,
                    g.iter()
                        .zip(xv)
                        .map(|(gi, xi)| if *xi > 0.0 { *gi } else { 0.0 })
                        .collect(),
                );
            }
            Op::Sum(x) => {
                self.accumulate(grads, *x, vec![g[0]; val(*x).len()]);
            }
            Op::Mean(x) => {
                let n = val(*x).len();
                self.accumulate(grads, *x, vec![g[0] / n as f64; n]);
            }
            Op::MeanRows(x) => {
                let (m, _) = (val(*x).shape()[0], val(*x).shape()[1]);
                let row: Vec<f64> = g.iter().map(|v| v / m as f64).collect();
                self.accumulate(grads, *x, row.repeat(m));
            }
            Op::Softmax(x, axis) => {
                let y = &node.value;
                self.accumulate(
                    grads,
                    *x,
                    kernels::softmax_backward(y.data(), g, y.shape(), *axis),
                );
            }
            Op::LogSoftmax(x, axis) => {
                let y = &node.value;
                self.accumulate(
                    grads,
                    *x,
                    kernels::log_softmax_backward(y.data(), g, y.shape(), *axis),
                );
            }
            Op::LayerNorm(x) => {
                let xv = val(*x);
                self.accumulate(
                    grads,
                    *x,
                    kernels::layer_norm_backward(xv.data(), g, xv.cols(), LAYER_NORM_EPS),
                );
            }
            Op::L2Normalize(x) => {
                let xv = val(*x);
                self.accumulate(
                    grads,
                    *x,
                    kernels::l2_normalize_backward(xv.data(), g, xv.cols()),
                );
            }
            Op::Gather(x, idx) => {
                let mut acc = vec![0.0; val(*x).len()];
                for (gi, &i) in g.iter().zip(idx) {
                    acc[i] += gi;
                }
                self.accumulate(grads, *x, acc);
            }
            Op::ConcatRows(parts) => {
                let mut offset = 0;
                for p in parts {
                    let n = val(*p).len();
                    self.accumulate(grads, *p, g[offset..offset + n].to_vec());
                    offset += n;
                }
            }
            Op::SegmentMax(x, arg) => {
                let mut acc = vec![0.0; val(*x).len()];
                for (gi, &i) in g.iter().zip(arg) {
                    acc[i] += gi;
                }
                self.accumulate(grads, *x, acc);
            }
            Op::Reshape(x) => {
                self.accumulate(grads, *x, g.to_vec());
            }
        }
    }
}
