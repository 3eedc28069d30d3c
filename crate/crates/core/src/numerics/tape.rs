//! Reverse-mode gradient accumulation over dense matrices.
//!
//! A [`Tape`] records one forward computation. Trainable matrices live in a
//! [`ParamSet`]; they enter a tape through [`Tape::param`] and receive their
//! gradients from [`Tape::backward`], which adds into `Param::grad` so that
//! repeated backward passes accumulate until the grads are zeroed.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::activation::{apply, Activation};
use super::Matrix;

/// A named trainable matrix with its gradient buffer.
#[derive(Debug, Clone)]
pub struct Param<T: Scalar> {
    pub name: String,
    pub value: Matrix<T>,
    pub grad: Matrix<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Default)]
pub struct ParamSet<T: Scalar> {
    params: Vec<Param<T>>,
}

impl<T: Scalar> ParamSet<T> {
    pub fn new() -> Self {
        ParamSet { params: Vec::new() }
    }

    pub fn add(&mut self, name: impl Into<String>, value: Matrix<T>) -> ParamId {
        let (r, c) = value.shape();
        self.params.push(Param {
            name: name.into(),
            value,
            grad: Matrix::zeros(r, c),
        });
        ParamId(self.params.len() - 1)
    }

    pub fn get(&self, id: ParamId) -> &Param<T> {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Param<T> {
        &mut self.params[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Matrix<T> {
        &self.params[id.0].value
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Param<T>> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Param<T>> {
        self.params.iter_mut()
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            p.grad.fill(T::zero());
        }
    }

    pub fn grad_norm(&self) -> T {
        self.params
            .iter()
            .map(|p| p.grad.squared_norm())
            .sum::<T>()
            .sqrt()
    }

    /// Total number of scalar coordinates.
    pub fn num_values(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }
}

/// Handle to a node recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

/// Backward rule for an operation whose forward value was computed outside
/// the tape (e.g. the CRF negative log-likelihood).
pub trait CustomOp<T: Scalar> {
    fn name(&self) -> &'static str;

    /// Returns one gradient per input, each shaped like that input.
    fn backward(&self, inputs: &[&Matrix<T>], grad_out: &Matrix<T>) -> Vec<Matrix<T>>;
}

enum Op<T: Scalar> {
    Constant,
    Param(ParamId),
    MatMul(Var, Var),
    Add(Var, Var),
    AddBias(Var, Var),
    Mul(Var, Var),
    Scale(Var, T),
    ScaleCols(Var, Vec<T>),
    Act(Var, Activation),
    Transpose(Var),
    SliceRows(Var, usize),
    SliceCols(Var, usize),
    ConcatRows(Vec<Var>),
    ConcatCols(Vec<Var>),
    Pick(Var, Vec<(usize, usize)>),
    Sum(Var),
    Lookup(Var, Vec<usize>),
    Custom(Vec<Var>, Box<dyn CustomOp<T>>),
}

struct Node<T: Scalar> {
    value: Matrix<T>,
    op: Op<T>,
    tracked: bool,
}

#[derive(Default)]
pub struct Tape<T: Scalar> {
    nodes: Vec<Node<T>>,
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Matrix<T> {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Matrix<T>, op: Op<T>, tracked: bool) -> Var {
        self.nodes.push(Node { value, op, tracked });
        Var(self.nodes.len() - 1)
    }

    fn tracked(&self, v: Var) -> bool {
        self.nodes[v.0].tracked
    }

    fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    /// A value that receives no gradient.
    pub fn constant(&mut self, value: Matrix<T>) -> Var {
        self.push(value, Op::Constant, false)
    }

    pub fn param(&mut self, params: &ParamSet<T>, id: ParamId) -> Var {
        self.push(params.value(id).clone(), Op::Param(id), true)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.cols() != vb.rows() {
            return Err(Error::dim("matmul", va.shape(), vb.shape()));
        }
        let mut out = Matrix::zeros(va.rows(), vb.cols());
        out.gemm_acc(va, vb);
        let t = self.tracked(a) || self.tracked(b);
        Ok(self.push(out, Op::MatMul(a, b), t))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::dim("add", self.shape(a), self.shape(b)));
        }
        let mut out = self.value(a).clone();
        out.add_assign(self.value(b));
        let t = self.tracked(a) || self.tracked(b);
        Ok(self.push(out, Op::Add(a, b), t))
    }

    /// `a + b·1ᵀ`: adds the column vector `b` to every column of `a`.
    pub fn add_bias(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ra, ca) = self.shape(a);
        if self.shape(b) != (ra, 1) {
            return Err(Error::dim("add_bias", (ra, ca), self.shape(b)));
        }
        let mut out = self.value(a).clone();
        let bias = self.value(b).as_slice().to_vec();
        for r in 0..ra {
            let br = bias[r];
            out.row_mut(r).iter_mut().for_each(|v| *v += br);
        }
        let t = self.tracked(a) || self.tracked(b);
        Ok(self.push(out, Op::AddBias(a, b), t))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::dim("mul", self.shape(a), self.shape(b)));
        }
        let mut out = self.value(a).clone();
        for (o, &y) in out.as_mut_slice().iter_mut().zip(self.value(b).as_slice()) {
            *o *= y;
        }
        let t = self.tracked(a) || self.tracked(b);
        Ok(self.push(out, Op::Mul(a, b), t))
    }

    pub fn scale(&mut self, a: Var, k: T) -> Var {
        let out = self.value(a).map(|v| v * k);
        let t = self.tracked(a);
        self.push(out, Op::Scale(a, k), t)
    }

    /// Multiplies column `j` by `factors[j]` (constant factors).
    pub fn scale_cols(&mut self, a: Var, factors: Vec<T>) -> Result<Var> {
        let (r, c) = self.shape(a);
        if factors.len() != c {
            return Err(Error::dim("scale_cols", (r, c), (1, factors.len())));
        }
        let mut out = self.value(a).clone();
        for i in 0..r {
            for (v, &f) in out.row_mut(i).iter_mut().zip(&factors) {
                *v *= f;
            }
        }
        let t = self.tracked(a);
        Ok(self.push(out, Op::ScaleCols(a, factors), t))
    }

    pub fn activation(&mut self, a: Var, kind: Activation) -> Var {
        let out = apply(self.value(a), kind);
        let t = self.tracked(a);
        self.push(out, Op::Act(a, kind), t)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.activation(a, Activation::Sigmoid)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.activation(a, Activation::Tanh)
    }

    pub fn log_softmax_rows(&mut self, a: Var) -> Var {
        self.activation(a, Activation::LogSoftmaxRows)
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let out = self.value(a).transpose();
        let t = self.tracked(a);
        self.push(out, Op::Transpose(a), t)
    }

    pub fn slice_rows(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let (r, c) = self.shape(a);
        if start >= end || end > r {
            return Err(Error::dim("slice_rows", (r, c), (start, end)));
        }
        let out = self.value(a).slice_rows(start, end);
        let t = self.tracked(a);
        Ok(self.push(out, Op::SliceRows(a, start), t))
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let (r, c) = self.shape(a);
        if start >= end || end > c {
            return Err(Error::dim("slice_cols", (r, c), (start, end)));
        }
        let out = self.value(a).slice_cols(start, end);
        let t = self.tracked(a);
        Ok(self.push(out, Op::SliceCols(a, start), t))
    }

    /// Vertical concatenation.
    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let cols = parts.first().map(|&p| self.shape(p).1).ok_or_else(|| {
            Error::Graph("concat_rows needs at least one input".into())
        })?;
        let mut data = Vec::new();
        let mut rows = 0;
        for &p in parts {
            let v = self.value(p);
            if v.cols() != cols {
                return Err(Error::dim("concat_rows", (rows, cols), v.shape()));
            }
            rows += v.rows();
            data.extend_from_slice(v.as_slice());
        }
        let out = Matrix::from_vec(rows, cols, data)?;
        let t = parts.iter().any(|&p| self.tracked(p));
        Ok(self.push(out, Op::ConcatRows(parts.to_vec()), t))
    }

    /// Horizontal concatenation.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let rows = parts.first().map(|&p| self.shape(p).0).ok_or_else(|| {
            Error::Graph("concat_cols needs at least one input".into())
        })?;
        let mut cols = 0;
        for &p in parts {
            let s = self.shape(p);
            if s.0 != rows {
                return Err(Error::dim("concat_cols", (rows, cols), s));
            }
            cols += s.1;
        }
        let mut out = Matrix::zeros(rows, cols);
        let mut off = 0;
        for &p in parts {
            let v = self.value(p);
            for r in 0..rows {
                out.row_mut(r)[off..off + v.cols()].copy_from_slice(v.row(r));
            }
            off += v.cols();
        }
        let t = parts.iter().any(|&p| self.tracked(p));
        Ok(self.push(out, Op::ConcatCols(parts.to_vec()), t))
    }

    /// Gathers the listed `(row, col)` entries into an `n × 1` column.
    pub fn pick(&mut self, a: Var, entries: Vec<(usize, usize)>) -> Result<Var> {
        let (r, c) = self.shape(a);
        if let Some(&bad) = entries.iter().find(|&&(i, j)| i >= r || j >= c) {
            return Err(Error::dim("pick", (r, c), bad));
        }
        let v = self.value(a);
        let vals: Vec<T> = entries.iter().map(|&(i, j)| v[(i, j)]).collect();
        let t = self.tracked(a);
        Ok(self.push(Matrix::column(&vals), Op::Pick(a, entries), t))
    }

    /// Sum of all entries as a `1 × 1` matrix.
    pub fn sum(&mut self, a: Var) -> Var {
        let out = Matrix::scalar(self.value(a).sum());
        let t = self.tracked(a);
        self.push(out, Op::Sum(a), t)
    }

    /// Column `j` of the output is row `ids[j]` of `table`.
    pub fn lookup(&mut self, table: Var, ids: &[usize]) -> Result<Var> {
        let (v, e) = self.shape(table);
        if let Some(&bad) = ids.iter().find(|&&i| i >= v) {
            return Err(Error::dim("lookup", (v, e), (bad, 1)));
        }
        let tv = self.value(table);
        let mut out = Matrix::zeros(e, ids.len());
        for (j, &id) in ids.iter().enumerate() {
            for (k, &x) in tv.row(id).iter().enumerate() {
                out[(k, j)] = x;
            }
        }
        let t = self.tracked(table);
        Ok(self.push(out, Op::Lookup(table, ids.to_vec()), t))
    }

    /// Records an externally computed value together with its backward rule.
    pub fn custom(&mut self, inputs: &[Var], value: Matrix<T>, op: Box<dyn CustomOp<T>>) -> Var {
        let t = inputs.iter().any(|&p| self.tracked(p));
        self.push(value, Op::Custom(inputs.to_vec(), op), t)
    }

    /// Propagates d`loss`/d· back to every parameter reachable from `loss`
    /// and adds the result into the parameters' `grad` buffers.
    pub fn backward(&self, loss: Var, params: &mut ParamSet<T>) -> Result<()> {
        let node = &self.nodes[loss.0];
        if node.value.shape() != (1, 1) {
            return Err(Error::Graph(format!(
                "backward needs a 1x1 loss, got {:?}",
                node.value.shape()
            )));
        }
        if !node.tracked {
            return Err(Error::Graph(
                "loss does not depend on any parameter (detached value)".into(),
            ));
        }

        let mut grads: Vec<Option<Matrix<T>>> = Vec::with_capacity(loss.0 + 1);
        grads.resize_with(loss.0 + 1, || None);
        grads[loss.0] = Some(Matrix::scalar(T::one()));

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            match &node.op {
                Op::Constant => {}
                Op::Param(id) => {
                    let p = params.get_mut(*id);
                    if p.grad.shape() != g.shape() {
                        return Err(Error::Graph(format!(
                            "parameter {} changed shape since it was recorded",
                            p.name
                        )));
                    }
                    p.grad.add_assign(&g);
                }
                Op::MatMul(a, b) => {
                    if self.tracked(*a) {
                        let vb = self.value(*b);
                        let ga = self.grad_slot(&mut grads, *a);
                        ga.gemm_nt_acc(&g, vb);
                    }
                    if self.tracked(*b) {
                        let va = self.value(*a);
                        let gb = self.grad_slot(&mut grads, *b);
                        gb.gemm_tn_acc(va, &g);
                    }
                }
                Op::Add(a, b) => {
                    self.accumulate(&mut grads, *a, &g);
                    self.accumulate(&mut grads, *b, &g);
                }
                Op::AddBias(a, b) => {
                    self.accumulate(&mut grads, *a, &g);
                    if self.tracked(*b) {
                        let gb = self.grad_slot(&mut grads, *b);
                        for r in 0..g.rows() {
                            gb[(r, 0)] += g.row(r).iter().copied().sum::<T>();
                        }
                    }
                }
                Op::Mul(a, b) => {
                    for (x, y) in [(*a, *b), (*b, *a)] {
                        if self.tracked(x) {
                            let other = self.value(y);
                            let gx = self.grad_slot(&mut grads, x);
                            for ((o, &gv), &ov) in gx
                                .as_mut_slice()
                                .iter_mut()
                                .zip(g.as_slice())
                                .zip(other.as_slice())
                            {
                                *o += gv * ov;
                            }
                        }
                    }
                }
                Op::Scale(a, k) => {
                    if self.tracked(*a) {
                        let gx = self.grad_slot(&mut grads, *a);
                        for (o, &gv) in gx.as_mut_slice().iter_mut().zip(g.as_slice()) {
                            *o += gv * *k;
                        }
                    }
                }
                Op::ScaleCols(a, factors) => {
                    if self.tracked(*a) {
                        let gx = self.grad_slot(&mut grads, *a);
                        for r in 0..g.rows() {
                            for ((o, &gv), &f) in
                                gx.row_mut(r).iter_mut().zip(g.row(r)).zip(factors)
                            {
                                *o += gv * f;
                            }
                        }
                    }
                }
                Op::Act(a, kind) => {
                    if self.tracked(*a) {
                        let y = &node.value;
                        let gx = self.grad_slot(&mut grads, *a);
                        act_backward(*kind, y, &g, gx);
                    }
                }
                Op::Transpose(a) => {
                    self.accumulate(&mut grads, *a, &g.transpose());
                }
                Op::SliceRows(a, start) => {
                    if self.tracked(*a) {
                        let gx = self.grad_slot(&mut grads, *a);
                        for r in 0..g.rows() {
                            for (o, &gv) in gx.row_mut(start + r).iter_mut().zip(g.row(r)) {
                                *o += gv;
                            }
                        }
                    }
                }
                Op::SliceCols(a, start) => {
                    if self.tracked(*a) {
                        let gx = self.grad_slot(&mut grads, *a);
                        let w = g.cols();
                        for r in 0..g.rows() {
                            for (o, &gv) in
                                gx.row_mut(r)[*start..start + w].iter_mut().zip(g.row(r))
                            {
                                *o += gv;
                            }
                        }
                    }
                }
                Op::ConcatRows(parts) => {
                    let mut off = 0;
                    for &p in parts {
                        let n = self.shape(p).0;
                        if self.tracked(p) {
                            let piece = g.slice_rows(off, off + n);
                            self.accumulate(&mut grads, p, &piece);
                        }
                        off += n;
                    }
                }
                Op::ConcatCols(parts) => {
                    let mut off = 0;
                    for &p in parts {
                        let n = self.shape(p).1;
                        if self.tracked(p) {
                            let piece = g.slice_cols(off, off + n);
                            self.accumulate(&mut grads, p, &piece);
                        }
                        off += n;
                    }
                }
                Op::Pick(a, entries) => {
                    if self.tracked(*a) {
                        let gx = self.grad_slot(&mut grads, *a);
                        for (k, &(r, c)) in entries.iter().enumerate() {
                            gx[(r, c)] += g.as_slice()[k];
                        }
                    }
                }
                Op::Sum(a) => {
                    if self.tracked(*a) {
                        let s = g.item();
                        let gx = self.grad_slot(&mut grads, *a);
                        gx.as_mut_slice().iter_mut().for_each(|o| *o += s);
                    }
                }
                Op::Lookup(table, ids) => {
                    if self.tracked(*table) {
                        let gx = self.grad_slot(&mut grads, *table);
                        for (j, &id) in ids.iter().enumerate() {
                            for k in 0..g.rows() {
                                gx[(id, k)] += g[(k, j)];
                            }
                        }
                    }
                }
                Op::Custom(inputs, op) => {
                    let vals: Vec<&Matrix<T>> = inputs.iter().map(|&v| self.value(v)).collect();
                    let gs = op.backward(&vals, &g);
                    if gs.len() != inputs.len() {
                        return Err(Error::Graph(format!(
                            "custom op {} returned {} gradients for {} inputs",
                            op.name(),
                            gs.len(),
                            inputs.len()
                        )));
                    }
                    for (&v, gv) in inputs.iter().zip(&gs) {
                        if gv.shape() != self.shape(v) {
                            return Err(Error::dim(op.name(), self.shape(v), gv.shape()));
                        }
                        self.accumulate(&mut grads, v, gv);
                    }
                }
            }
        }
        Ok(())
    }

    fn grad_slot<'g>(&self, grads: &'g mut [Option<Matrix<T>>], v: Var) -> &'g mut Matrix<T> {
        let (r, c) = self.shape(v);
        grads[v.0].get_or_insert_with(|| Matrix::zeros(r, c))
    }

    fn accumulate(&self, grads: &mut [Option<Matrix<T>>], v: Var, g: &Matrix<T>) {
        if !self.tracked(v) {
            return;
        }
        match &mut grads[v.0] {
            Some(existing) => existing.add_assign(g),
            slot @ None => *slot = Some(g.clone()),
        }
    }
}

fn act_backward<T: Scalar>(kind: Activation, y: &Matrix<T>, g: &Matrix<T>, gx: &mut Matrix<T>) {
    match kind {
        Activation::Sigmoid => {
            for ((o, &gv), &yv) in gx.as_mut_slice().iter_mut().zip(g.as_slice()).zip(y.as_slice())
            {
                *o += gv * yv * (T::one() - yv);
            }
        }
        Activation::Tanh => {
            for ((o, &gv), &yv) in gx.as_mut_slice().iter_mut().zip(g.as_slice()).zip(y.as_slice())
            {
                *o += gv * (T::one() - yv * yv);
            }
        }
        Activation::SoftmaxRows => {
            for r in 0..y.rows() {
                let yr = y.row(r);
                let gr = g.row(r);
                let dot: T = yr.iter().zip(gr).map(|(&a, &b)| a * b).sum();
                for ((o, &yv), &gv) in gx.row_mut(r).iter_mut().zip(yr).zip(gr) {
                    *o += yv * (gv - dot);
                }
            }
        }
        Activation::LogSoftmaxRows => {
            for r in 0..y.rows() {
                let yr = y.row(r);
                let gr = g.row(r);
                let total: T = gr.iter().copied().sum();
                for ((o, &yv), &gv) in gx.row_mut(r).iter_mut().zip(yr).zip(gr) {
                    *o += gv - yv.exp() * total;
                }
            }
        }
    }
}
