//! Reverse-mode differentiation over dense matrices.
//!
//! A [`Tape`] records every operation in execution order; [`Var`] is a
//! cheap handle into it. [`Tape::backward`] walks the tape once in reverse
//! and returns the gradient of a scalar output with respect to every
//! recorded value that depends on a leaf created with `requires_grad`.
//!
//! ```
//! use unigraph::autodiff::Tape;
//! use unigraph::matrix::Matrix;
//!
//! let mut tape = Tape::new(0);
//! let x = tape.leaf(Matrix::from_rows(&[[0.0, 2.0]]), true);
//! let y = tape.sigmoid(x);
//! let s = tape.sum(y);
//! let grads = tape.backward(s).unwrap();
//! assert_eq!(grads.get(x).unwrap()[(0, 0)], 0.25);
//! ```

mod check;

use std::sync::Arc;

use rand::Rng as _;

pub use check::grad_check;

use crate::error::{Error, Result};
use crate::matrix::{gemm_nt_acc, gemm_tn_acc, Matrix, SparseMatrix};
use crate::rng::{self, Rng};

/// Probabilities entering [`Tape::bce`] are clamped to `[P_CLAMP, 1 − P_CLAMP]`.
pub const P_CLAMP: f64 = 1e-7;

/// Variance offset in batch normalization.
pub const BN_EPS: f64 = 1e-7;

/// Weight of the old running statistics in each batch-norm update.
pub const BN_MOMENTUM: f64 = 0.9;

/// Handle to a value on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    /// Along rows: reduces to a single row, or stacks vertically.
    Rows,
    /// Along columns: reduces to a single column, or stacks side by side.
    Cols,
}

/// Running mean and (biased) variance per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct RunningStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

impl RunningStats {
    pub fn new(channels: usize) -> Self {
        RunningStats {
            mean: vec![0.0; channels],
            var: vec![1.0; channels],
        }
    }

    pub fn channels(&self) -> usize {
        self.mean.len()
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    SparseMatMul(Arc<SparseMatrix>, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Scale(Var, f64),
    Pow(Var, u32),
    Sigmoid(Var),
    Relu(Var),
    Concat(Vec<Var>, Axis),
    SumAll(Var),
    Sum(Var, Axis),
    Transpose(Var),
    SliceRows(Var, usize),
    Softmax(Var),
    Bce(Var, Matrix),
    BceWithLogits(Var, Matrix),
    Mse(Var, Matrix),
    SoftmaxCrossEntropy(Var, Vec<usize>),
    /// Per-entry multiplier (0 or 1/(1 − rate)).
    Dropout(Var, Matrix),
    /// Normalized output and per-channel `1/sqrt(var + eps)`; `batch` is
    /// false when running statistics were used.
    BatchNorm {
        x: Var,
        inv_std: Vec<f64>,
        batch: bool,
    },
}

#[derive(Debug)]
struct Node {
    value: Matrix,
    op: Op,
    requires_grad: bool,
}

/// Gradients produced by [`Tape::backward`], indexed by [`Var`].
#[derive(Debug, Clone)]
pub struct Gradients {
    grads: Vec<Option<Matrix>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Matrix> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    /// Takes ownership of a gradient, leaving `None` behind.
    pub fn take(&mut self, v: Var) -> Option<Matrix> {
        self.grads.get_mut(v.0).and_then(Option::take)
    }
}

pub struct Tape {
    nodes: Vec<Node>,
    rng: Rng,
}

impl Tape {
    /// An empty tape; `seed` drives dropout masks.
    pub fn new(seed: u64) -> Self {
        Tape {
            nodes: Vec::new(),
            rng: rng::seeded(seed),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> [usize; 2] {
        self.nodes[v.0].value.shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    pub fn leaf(&mut self, value: Matrix, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    /// A leaf that never receives a gradient.
    pub fn constant(&mut self, value: Matrix) -> Var {
        self.leaf(value, false)
    }

    fn push(&mut self, value: Matrix, op: Op, inputs: &[Var]) -> Var {
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn check_same(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(Error::shape(op, &sa, &sb));
        }
        Ok(())
    }

    fn check_target(&self, op: &'static str, x: Var, t: &Matrix) -> Result<()> {
        if self.shape(x) != t.shape() {
            return Err(Error::shape(op, &self.shape(x), &t.shape()));
        }
        Ok(())
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).matmul(self.value(b))?;
        Ok(self.push(value, Op::MatMul(a, b), &[a, b]))
    }

    /// `s · x` for a constant sparse `s`.
    pub fn sparse_matmul(&mut self, s: &Arc<SparseMatrix>, x: Var) -> Result<Var> {
        let value = s.matmul_dense(self.value(x))?;
        Ok(self.push(value, Op::SparseMatMul(Arc::clone(s), x), &[x]))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.check_same("add", a, b)?;
        let value = self.value(a).add(self.value(b))?;
        Ok(self.push(value, Op::Add(a, b), &[a, b]))
    }

    /// Adds the `1 × c` row `b` to every row of `x`.
    pub fn add_row(&mut self, x: Var, b: Var) -> Result<Var> {
        let [n, c] = self.shape(x);
        if self.shape(b) != [1, c] {
            return Err(Error::shape("add_row", &[n, c], &self.shape(b)));
        }
        let bias = self.value(b).data().to_vec();
        let mut value = self.value(x).clone();
        for i in 0..n {
            for (v, bv) in value.row_mut(i).iter_mut().zip(&bias) {
                *v += bv;
            }
        }
        Ok(self.push(value, Op::AddRow(x, b), &[x, b]))
    }

    pub fn scalar_mul(&mut self, x: Var, s: f64) -> Var {
        let value = self.value(x).scale(s);
        self.push(value, Op::Scale(x, s), &[x])
    }

    /// Elementwise integer power, `p ≥ 1`.
    pub fn pow(&mut self, x: Var, p: u32) -> Result<Var> {
        if p == 0 {
            return Err(Error::InvalidArgument("pow exponent must be >= 1".into()));
        }
        if p == 1 {
            return Ok(x);
        }
        let value = self.value(x).map(|v| v.powi(p as i32));
        Ok(self.push(value, Op::Pow(x, p), &[x]))
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let value = self.value(x).map(sigmoid);
        self.push(value, Op::Sigmoid(x), &[x])
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let value = self.value(x).map(|v| v.max(0.0));
        self.push(value, Op::Relu(x), &[x])
    }

    pub fn concat(&mut self, parts: &[Var], axis: Axis) -> Result<Var> {
        let Some(&first) = parts.first() else {
            return Err(Error::InvalidArgument("concat of zero parts".into()));
        };
        if parts.len() == 1 {
            return Ok(first);
        }
        let mats: Vec<&Matrix> = parts.iter().map(|&p| self.value(p)).collect();
        let value = match axis {
            Axis::Rows => Matrix::vstack(&mats)?,
            Axis::Cols => {
                let n = mats[0].rows();
                if let Some(m) = mats.iter().find(|m| m.rows() != n) {
                    return Err(Error::shape("concat", &mats[0].shape(), &m.shape()));
                }
                let width: usize = mats.iter().map(|m| m.cols()).sum();
                let mut out = Matrix::zeros(n, width);
                for i in 0..n {
                    let mut off = 0;
                    for m in &mats {
                        out.row_mut(i)[off..off + m.cols()].copy_from_slice(m.row(i));
                        off += m.cols();
                    }
                }
                out
            }
        };
        Ok(self.push(value, Op::Concat(parts.to_vec(), axis), parts))
    }

    /// Sum of all entries as a `1 × 1` value.
    pub fn sum(&mut self, x: Var) -> Var {
        let value = Matrix::from_vec(1, 1, vec![self.value(x).sum()]).expect("1x1");
        self.push(value, Op::SumAll(x), &[x])
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let n = self.value(x).len().max(1);
        let s = self.sum(x);
        self.scalar_mul(s, 1.0 / n as f64)
    }

    /// `Axis::Rows` sums each column into a `1 × c` row; `Axis::Cols` sums
    /// each row into an `n × 1` column.
    pub fn sum_axis(&mut self, x: Var, axis: Axis) -> Var {
        let m = self.value(x);
        let value = match axis {
            Axis::Rows => Matrix::from_vec(1, m.cols(), m.column_sums()).expect("row"),
            Axis::Cols => Matrix::column(&(0..m.rows()).map(|i| m.row(i).iter().sum()).collect::<Vec<_>>()),
        };
        self.push(value, Op::Sum(x, axis), &[x])
    }

    pub fn mean_axis(&mut self, x: Var, axis: Axis) -> Var {
        let [n, c] = self.shape(x);
        let count = match axis {
            Axis::Rows => n,
            Axis::Cols => c,
        };
        let s = self.sum_axis(x, axis);
        self.scalar_mul(s, 1.0 / count.max(1) as f64)
    }

    pub fn transpose(&mut self, x: Var) -> Var {
        let value = self.value(x).transpose();
        self.push(value, Op::Transpose(x), &[x])
    }

    /// `a · w · bᵀ`; for row vectors this is the bilinear form `aᵀ W b`,
    /// for row-stacked batches it is the matrix of all pairwise forms.
    pub fn bilinear(&mut self, a: Var, w: Var, b: Var) -> Result<Var> {
        let aw = self.matmul(a, w)?;
        let bt = self.transpose(b);
        self.matmul(aw, bt)
    }

    /// Rows `start..end`.
    pub fn slice_rows(&mut self, x: Var, start: usize, end: usize) -> Result<Var> {
        let n = self.shape(x)[0];
        if start > end || end > n {
            return Err(Error::IndexOutOfRange { index: end, len: n });
        }
        let value = self.value(x).slice_rows(start, end);
        Ok(self.push(value, Op::SliceRows(x, start), &[x]))
    }

    /// Row-wise softmax.
    pub fn softmax(&mut self, x: Var) -> Var {
        let value = softmax_rows(self.value(x));
        self.push(value, Op::Softmax(x), &[x])
    }

    /// Mean binary cross-entropy of probabilities `p` against `target`.
    /// Probabilities are clamped to `[P_CLAMP, 1 − P_CLAMP]`; the clamp
    /// passes no gradient.
    pub fn bce(&mut self, p: Var, target: &Matrix) -> Result<Var> {
        self.check_target("bce", p, target)?;
        let pv = self.value(p);
        let n = pv.len().max(1) as f64;
        let total: f64 = pv
            .data()
            .iter()
            .zip(target.data())
            .map(|(&p, &t)| {
                let p = p.clamp(P_CLAMP, 1.0 - P_CLAMP);
                -(t * p.ln() + (1.0 - t) * (1.0 - p).ln())
            })
            .sum();
        let value = Matrix::from_vec(1, 1, vec![total / n])?;
        Ok(self.push(value, Op::Bce(p, target.clone()), &[p]))
    }

    /// Mean binary cross-entropy of `sigmoid(x)` against `target`, computed
    /// from the logits without saturation.
    pub fn bce_with_logits(&mut self, x: Var, target: &Matrix) -> Result<Var> {
        self.check_target("bce_with_logits", x, target)?;
        let xv = self.value(x);
        let n = xv.len().max(1) as f64;
        let total: f64 = xv
            .data()
            .iter()
            .zip(target.data())
            .map(|(&x, &t)| x.max(0.0) - x * t + (-x.abs()).exp().ln_1p())
            .sum();
        let value = Matrix::from_vec(1, 1, vec![total / n])?;
        Ok(self.push(value, Op::BceWithLogits(x, target.clone()), &[x]))
    }

    /// Mean squared error against a constant target.
    pub fn mse(&mut self, x: Var, target: &Matrix) -> Result<Var> {
        self.check_target("mse", x, target)?;
        let xv = self.value(x);
        let n = xv.len().max(1) as f64;
        let total: f64 = xv
            .data()
            .iter()
            .zip(target.data())
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        let value = Matrix::from_vec(1, 1, vec![total / n])?;
        Ok(self.push(value, Op::Mse(x, target.clone()), &[x]))
    }

    /// Mean over rows of `−ln softmax(logits)[row, label]`.
    pub fn softmax_cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let [n, c] = self.shape(logits);
        if labels.len() != n {
            return Err(Error::shape("softmax_cross_entropy", &[n, c], &[labels.len()]));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= c) {
            return Err(Error::IndexOutOfRange { index: bad, len: c });
        }
        let lv = self.value(logits);
        let mut total = 0.0;
        for (i, &l) in labels.iter().enumerate() {
            let row = lv.row(i);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            total += lse - row[l];
        }
        let value = Matrix::from_vec(1, 1, vec![total / n.max(1) as f64])?;
        Ok(self.push(value, Op::SoftmaxCrossEntropy(logits, labels.to_vec()), &[logits]))
    }

    /// Inverted dropout: in training, each entry is zeroed with probability
    /// `rate` and survivors are scaled by `1/(1 − rate)`. Identity otherwise.
    pub fn dropout(&mut self, x: Var, rate: f64, train: bool) -> Result<Var> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::InvalidArgument(format!("dropout rate {rate} outside [0, 1)")));
        }
        if !train || rate == 0.0 {
            return Ok(x);
        }
        let keep = 1.0 / (1.0 - rate);
        let [n, c] = self.shape(x);
        let mask = Matrix::from_fn(n, c, |_, _| if self.rng.random::<f64>() < rate { 0.0 } else { keep });
        let value = self.value(x).zip_with(&mask, "dropout", |a, m| a * m)?;
        Ok(self.push(value, Op::Dropout(x, mask), &[x]))
    }

    /// Per-column normalization over the rows of `x`.
    ///
    /// In training the batch mean and biased variance are used and the
    /// running statistics move towards them with [`BN_MOMENTUM`]; in
    /// evaluation the running statistics are used as constants.
    pub fn batch_norm(&mut self, x: Var, stats: &mut RunningStats, train: bool) -> Result<Var> {
        let [n, c] = self.shape(x);
        if stats.channels() != c {
            return Err(Error::shape("batch_norm", &[n, c], &[stats.channels()]));
        }
        let xv = self.value(x);
        let (mean, var) = if train && n > 0 {
            let mean: Vec<f64> = xv.column_sums().iter().map(|s| s / n as f64).collect();
            let mut var = vec![0.0; c];
            for i in 0..n {
                for (j, v) in xv.row(i).iter().enumerate() {
                    var[j] += (v - mean[j]) * (v - mean[j]);
                }
            }
            var.iter_mut().for_each(|v| *v /= n as f64);
            for j in 0..c {
                stats.mean[j] = BN_MOMENTUM * stats.mean[j] + (1.0 - BN_MOMENTUM) * mean[j];
                stats.var[j] = BN_MOMENTUM * stats.var[j] + (1.0 - BN_MOMENTUM) * var[j];
            }
            (mean, var)
        } else {
            (stats.mean.clone(), stats.var.clone())
        };
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + BN_EPS).sqrt()).collect();
        let value = Matrix::from_fn(n, c, |i, j| (xv[(i, j)] - mean[j]) * inv_std[j]);
        Ok(self.push(
            value,
            Op::BatchNorm {
                x,
                inv_std,
                batch: train && n > 0,
            },
            &[x],
        ))
    }

    /// Gradients of the scalar `output` with respect to every value that
    /// requires them.
    pub fn backward(&self, output: Var) -> Result<Gradients> {
        let shape = self.shape(output);
        if shape != [1, 1] {
            return Err(Error::shape("backward (scalar output)", &shape, &[1, 1]));
        }
        let mut grads: Vec<Option<Matrix>> = vec![None; output.0 + 1];
        grads[output.0] = Some(Matrix::filled(1, 1, 1.0));
        for idx in (0..=output.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else {
                continue;
            };
            self.propagate(node, &g, &mut grads);
            grads[idx] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn propagate(&self, node: &Node, g: &Matrix, grads: &mut [Option<Matrix>]) {
        let out = &node.value;
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                if let Some(ga) = self.slot(grads, *a) {
                    gemm_nt_acc(g, bv, ga);
                }
                if let Some(gb) = self.slot(grads, *b) {
                    gemm_tn_acc(av, g, gb);
                }
            }
            Op::SparseMatMul(s, x) => {
                if let Some(gx) = self.slot(grads, *x) {
                    s.transpose_matmul_acc(g, gx);
                }
            }
            Op::Add(a, b) => {
                for v in [*a, *b] {
                    if let Some(gv) = self.slot(grads, v) {
                        gv.add_assign(g);
                    }
                }
            }
            Op::AddRow(x, b) => {
                if let Some(gx) = self.slot(grads, *x) {
                    gx.add_assign(g);
                }
                if let Some(gb) = self.slot(grads, *b) {
                    for (o, s) in gb.data_mut().iter_mut().zip(g.column_sums()) {
                        *o += s;
                    }
                }
            }
            Op::Scale(x, s) => {
                if let Some(gx) = self.slot(grads, *x) {
                    accumulate(gx, g, |gi, _| gi * s);
                }
            }
            Op::Pow(x, p) => {
                let xv = self.value(*x);
                if let Some(gx) = self.slot(grads, *x) {
                    let p = *p;
                    let d = xv.map(|v| p as f64 * v.powi(p as i32 - 1));
                    accumulate(gx, g, |gi, k| gi * d.data()[k]);
                }
            }
            Op::Sigmoid(x) => {
                if let Some(gx) = self.slot(grads, *x) {
                    accumulate(gx, g, |gi, k| {
                        let s = out.data()[k];
                        gi * s * (1.0 - s)
                    });
                }
            }
            Op::Relu(x) => {
                let xv = self.value(*x);
                if let Some(gx) = self.slot(grads, *x) {
                    accumulate(gx, g, |gi, k| if xv.data()[k] > 0.0 { gi } else { 0.0 });
                }
            }
            Op::Concat(parts, axis) => {
                let mut off = 0;
                for &p in parts {
                    let [n, c] = self.shape(p);
                    if let Some(gp) = self.slot(grads, p) {
                        match axis {
                            Axis::Rows => {
                                for i in 0..n {
                                    for (o, v) in gp.row_mut(i).iter_mut().zip(g.row(off + i)) {
                                        *o += v;
                                    }
                                }
                            }
                            Axis::Cols => {
                                for i in 0..n {
                                    for (o, v) in gp.row_mut(i).iter_mut().zip(&g.row(i)[off..off + c]) {
                                        *o += v;
                                    }
                                }
                            }
                        }
                    }
                    off += match axis {
                        Axis::Rows => n,
                        Axis::Cols => c,
                    };
                }
            }
            Op::SumAll(x) => {
                let s = g.scalar();
                if let Some(gx) = self.slot(grads, *x) {
                    gx.data_mut().iter_mut().for_each(|o| *o += s);
                }
            }
            Op::Sum(x, axis) => {
                if let Some(gx) = self.slot(grads, *x) {
                    let c = gx.cols();
                    for (k, o) in gx.data_mut().iter_mut().enumerate() {
                        *o += match axis {
                            Axis::Rows => g.data()[k % c],
                            Axis::Cols => g.data()[k / c],
                        };
                    }
                }
            }
            Op::Transpose(x) => {
                if let Some(gx) = self.slot(grads, *x) {
                    gx.add_assign(&g.transpose());
                }
            }
            Op::SliceRows(x, start) => {
                if let Some(gx) = self.slot(grads, *x) {
                    for i in 0..g.rows() {
                        for (o, v) in gx.row_mut(start + i).iter_mut().zip(g.row(i)) {
                            *o += v;
                        }
                    }
                }
            }
            Op::Softmax(x) => {
                if let Some(gx) = self.slot(grads, *x) {
                    for i in 0..out.rows() {
                        let y = out.row(i);
                        let gi = g.row(i);
                        let dot: f64 = y.iter().zip(gi).map(|(a, b)| a * b).sum();
                        for (j, o) in gx.row_mut(i).iter_mut().enumerate() {
                            *o += y[j] * (gi[j] - dot);
                        }
                    }
                }
            }
            Op::Bce(p, t) => {
                let pv = self.value(*p);
                let scale = g.scalar() / pv.len().max(1) as f64;
                if let Some(gp) = self.slot(grads, *p) {
                    accumulate(gp, pv, |p, k| {
                        if !(P_CLAMP..=1.0 - P_CLAMP).contains(&p) {
                            return 0.0;
                        }
                        let t = t.data()[k];
                        scale * (p - t) / (p * (1.0 - p))
                    });
                }
            }
            Op::BceWithLogits(x, t) => {
                let xv = self.value(*x);
                let scale = g.scalar() / xv.len().max(1) as f64;
                if let Some(gx) = self.slot(grads, *x) {
                    accumulate(gx, xv, |x, k| scale * (sigmoid(x) - t.data()[k]));
                }
            }
            Op::Mse(x, t) => {
                let xv = self.value(*x);
                let scale = g.scalar() / xv.len().max(1) as f64;
                if let Some(gx) = self.slot(grads, *x) {
                    accumulate(gx, xv, |x, k| scale * 2.0 * (x - t.data()[k]));
                }
            }
            Op::SoftmaxCrossEntropy(x, labels) => {
                let probs = softmax_rows(self.value(*x));
                let scale = g.scalar() / labels.len().max(1) as f64;
                if let Some(gx) = self.slot(grads, *x) {
                    let c = probs.cols();
                    accumulate(gx, &probs, |p, k| {
                        let hit = labels[k / c] == k % c;
                        scale * (p - if hit { 1.0 } else { 0.0 })
                    });
                }
            }
            Op::Dropout(x, mask) => {
                if let Some(gx) = self.slot(grads, *x) {
                    accumulate(gx, g, |gi, k| gi * mask.data()[k]);
                }
            }
            Op::BatchNorm { x, inv_std, batch } => {
                if let Some(gx) = self.slot(grads, *x) {
                    let [n, c] = g.shape();
                    if !batch {
                        accumulate(gx, g, |gi, k| gi * inv_std[k % c]);
                        return;
                    }
                    let nf = n as f64;
                    let mut sum_g = vec![0.0; c];
                    let mut sum_gx = vec![0.0; c];
                    for i in 0..n {
                        for j in 0..c {
                            sum_g[j] += g[(i, j)];
                            sum_gx[j] += g[(i, j)] * out[(i, j)];
                        }
                    }
                    for i in 0..n {
                        for j in 0..c {
                            gx[(i, j)] += inv_std[j] / nf * (nf * g[(i, j)] - sum_g[j] - out[(i, j)] * sum_gx[j]);
                        }
                    }
                }
            }
        }
    }

    /// Gradient accumulator for `v`, allocated on first use; `None` when `v`
    /// needs no gradient.
    fn slot<'g>(&self, grads: &'g mut [Option<Matrix>], v: Var) -> Option<&'g mut Matrix> {
        if !self.nodes[v.0].requires_grad {
            return None;
        }
        let [n, c] = self.shape(v);
        Some(grads[v.0].get_or_insert_with(|| Matrix::zeros(n, c)))
    }
}

/// `dst[k] += f(src[k], k)`.
fn accumulate(dst: &mut Matrix, src: &Matrix, f: impl Fn(f64, usize) -> f64) {
    for (k, (o, &s)) in dst.data_mut().iter_mut().zip(src.data()).enumerate() {
        *o += f(s, k);
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn softmax_rows(m: &Matrix) -> Matrix {
    let mut out = m.clone();
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            total += *v;
        }
        row.iter_mut().for_each(|v| *v /= total);
    }
    out
}
