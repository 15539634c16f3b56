//! Reverse-mode differentiation over dense row-major matrices.
//!
//! A [`Tape`] records every primitive in evaluation order; [`Var`] is an index
//! into it. Binary elementwise primitives broadcast any dimension of extent 1,
//! which is how per-row scalars (`n×1`) and shared points (`1×c`) combine with
//! node batches. [`Tape::backward`] walks the record once in reverse, returns a
//! [`Gradients`] table for the leaves and frees the recorded values.
//!
//! Kinked primitives (`relu`, `clamp_min`, the clamped `arcosh`) fold the side
//! of the kink they took into [`Tape::branch_signature`]; the gradient checker
//! uses it to exclude coordinates whose finite-difference stencil straddles a
//! kink.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::graph::Csr;
use crate::linalg::Matrix;

pub mod geometry;
pub mod gradcheck;
pub mod special;

pub use gradcheck::{grad_check, GradCheckReport, Objective};

/// Smallest argument `arcosh` differentiates at; below it the input is clamped
/// and the gradient is zero.
pub const ARCOSH_FLOOR: f64 = 1.0 + 1e-12;

/// Handle to a recorded value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Deliberate backward-rule corruption for negative-control tests.
#[doc(hidden)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Fault {
    /// Scales the left-operand gradient of every matmul by `1 + 1e-2`.
    MatMulBackward,
}

#[derive(Clone, Copy, Debug)]
enum Binary {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Clone, Copy, Debug)]
enum Unary {
    Neg,
    Exp,
    Ln,
    Sqrt,
    Cosh,
    Sinh,
    Arcosh,
    Relu,
    CoshSqrt,
    SinhcSqrt,
    ArcoshRatio,
}

#[derive(Debug)]
enum Op {
    Leaf,
    Binary(Binary, Var, Var),
    Unary(Unary, Var),
    Scale(Var, f64),
    AddScalar(Var),
    ClampMin(Var, f64),
    MatMul(Var, Var),
    Transpose(Var),
    SpMM(Arc<Csr>, Var),
    SliceCols(Var, usize),
    ConcatCols(Vec<Var>),
    SumRows(Var),
    Sum(Var),
    LogSoftmax(Var),
    Nll(Var, Vec<(usize, usize)>),
}

#[derive(Debug)]
struct Node {
    value: Matrix,
    op: Op,
    requires_grad: bool,
}

/// Recording of one forward evaluation.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    consumed: bool,
    branch: u64,
    fault: Option<Fault>,
}

/// Leaf gradients produced by [`Tape::backward`].
#[derive(Debug, Clone)]
pub struct Gradients {
    grads: Vec<Option<Matrix>>,
    shapes: Vec<(usize, usize)>,
}

impl Gradients {
    /// Gradient of the loss with respect to a leaf; zero if the loss does not
    /// depend on it.
    pub fn wrt(&self, v: Var) -> Matrix {
        match self.grads.get(v.0).and_then(Option::as_ref) {
            Some(g) => g.clone(),
            None => {
                let (r, c) = self.shapes.get(v.0).copied().unwrap_or((0, 0));
                Matrix::zeros(r, c)
            }
        }
    }
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn broadcast_shape(a: (usize, usize), b: (usize, usize)) -> Option<(usize, usize)> {
    fn dim(x: usize, y: usize) -> Option<usize> {
        if x == y || y == 1 {
            Some(x)
        } else if x == 1 {
            Some(y)
        } else {
            None
        }
    }
    Some((dim(a.0, b.0)?, dim(a.1, b.1)?))
}

#[inline]
fn bidx(m: &Matrix, i: usize, j: usize) -> usize {
    let r = if m.rows() == 1 { 0 } else { i };
    let c = if m.cols() == 1 { 0 } else { j };
    r * m.cols() + c
}

fn accumulate(slot: &mut Option<Matrix>, g: Matrix) {
    match slot {
        Some(acc) => {
            for (a, b) in acc.as_mut_slice().iter_mut().zip(g.as_slice()) {
                *a += b;
            }
        }
        None => *slot = Some(g),
    }
}

/// Sums a broadcast gradient back down to `shape`.
fn reduce_to(g: &Matrix, shape: (usize, usize)) -> Matrix {
    if g.shape() == shape {
        return g.clone();
    }
    let mut out = Matrix::zeros(shape.0, shape.1);
    for i in 0..g.rows() {
        for j in 0..g.cols() {
            let k = bidx(&out, i, j);
            out.as_mut_slice()[k] += g.get(i, j);
        }
    }
    out
}

impl Tape {
    pub fn new() -> Self {
        Self { nodes: Vec::new(), consumed: false, branch: FNV_OFFSET, fault: None }
    }

    #[doc(hidden)]
    pub fn with_fault(fault: Fault) -> Self {
        Self { fault: Some(fault), ..Self::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Hash of every kink side taken so far.
    pub fn branch_signature(&self) -> u64 {
        self.branch
    }

    fn push(&mut self, value: Matrix, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node { value, op, requires_grad });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn note_branch(&mut self, took_upper: bool) {
        self.branch = (self.branch ^ took_upper as u64).wrapping_mul(FNV_PRIME);
    }

    /// Current value of a recorded variable.
    ///
    /// # Panics
    /// If `v` does not belong to this tape or the tape was consumed.
    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    /// Trainable leaf.
    pub fn param(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Leaf that receives no gradient.
    pub fn constant(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Leaf, false)
    }

    fn check_live(&self) -> Result<()> {
        if self.consumed {
            bail!(Usage, "tape was consumed by backward; record a new forward pass");
        }
        Ok(())
    }

    fn binary(&mut self, kind: Binary, a: Var, b: Var) -> Result<Var> {
        self.check_live()?;
        let (va, vb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        let Some((r, c)) = broadcast_shape(va.shape(), vb.shape()) else {
            bail!(Dimension, "cannot broadcast {:?} with {:?}", va.shape(), vb.shape());
        };
        let mut out = Vec::with_capacity(r * c);
        let (sa, sb) = (va.as_slice(), vb.as_slice());
        for i in 0..r {
            for j in 0..c {
                let x = sa[bidx(va, i, j)];
                let y = sb[bidx(vb, i, j)];
                out.push(match kind {
                    Binary::Add => x + y,
                    Binary::Sub => x - y,
                    Binary::Mul => x * y,
                    Binary::Div => x / y,
                });
            }
        }
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Matrix::from_vec(r, c, out)?, Op::Binary(kind, a, b), rg))
    }

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
        self.check_live()?;
        let x = &self.nodes[a.0].value;
        let mut branches = Vec::new();
        let y = x.map(|v| match kind {
            Unary::Neg => -v,
            Unary::Exp => libm::exp(v),
            Unary::Ln => libm::log(v),
            Unary::Sqrt => libm::sqrt(v),
            Unary::Cosh => libm::cosh(v),
            Unary::Sinh => libm::sinh(v),
            Unary::Arcosh => libm::acosh(v.max(ARCOSH_FLOOR)),
            Unary::Relu => v.max(0.0),
            Unary::CoshSqrt => special::cosh_sqrt(v),
            Unary::SinhcSqrt => special::sinhc_sqrt(v),
            Unary::ArcoshRatio => special::arcosh_ratio(v),
        });
        match kind {
            Unary::Arcosh => branches.extend(x.as_slice().iter().map(|&v| v > ARCOSH_FLOOR)),
            Unary::Relu => branches.extend(x.as_slice().iter().map(|&v| v > 0.0)),
            _ => {}
        }
        for b in branches {
            self.note_branch(b);
        }
        let rg = self.rg(a);
        Ok(self.push(y, Op::Unary(kind, a), rg))
    }

    pub fn neg(&mut self, a: Var) -> Result<Var> {
        self.unary(Unary::Neg, a)
    }

    pub fn exp(&mut self, a: Var) -> Result<Var> {
        self.unary(Unary::Exp, a)
    }

    pub fn ln(&mut self, a: Var) -> Result<Var> {
        self.unary(Unary::Ln, a)
    }

    pub fn sqrt(&mut self, a: Var) -> Result<Var> {
        self.unary(Unary::Sqrt, a)
    }

    pub fn cosh(&mut self, a: Var) -> Result<Var> {
        self.unary(Unary::Cosh, a)
    }

    pub fn sinh(&mut self, a: Var) -> Result<Var> {
        self.unary(Unary::Sinh, a)
    }

    /// `arcosh(max(x, 1 + 1e-12))`; zero gradient where the clamp is active.
    pub fn arcosh(&mut self, a: Var) -> Result<Var> {
        self.unary(Unary::Arcosh, a)
    }

    /// Subgradient 0 at the kink.
    pub fn relu(&mut self, a: Var) -> Result<Var> {
        self.unary(Unary::Relu, a)
    }

    /// `cosh √q`, continued analytically to `q < 0`.
    pub fn cosh_sqrt(&mut self, a: Var) -> Result<Var> {
        self.unary(Unary::CoshSqrt, a)
    }

    /// `sinh √q / √q`, equal to 1 at `q = 0`.
    pub fn sinhc_sqrt(&mut self, a: Var) -> Result<Var> {
        self.unary(Unary::SinhcSqrt, a)
    }

    /// `arcosh(a) / √(a² − 1)`, equal to 1 at `a = 1`.
    pub fn arcosh_ratio(&mut self, a: Var) -> Result<Var> {
        self.unary(Unary::ArcoshRatio, a)
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Result<Var> {
        self.check_live()?;
        let y = self.nodes[a.0].value.scale(s);
        let rg = self.rg(a);
        Ok(self.push(y, Op::Scale(a, s), rg))
    }

    pub fn add_scalar(&mut self, a: Var, s: f64) -> Result<Var> {
        self.check_live()?;
        let y = self.nodes[a.0].value.map(|v| v + s);
        let rg = self.rg(a);
        Ok(self.push(y, Op::AddScalar(a), rg))
    }

    /// `max(x, lo)`: gradient 1 where `x > lo`, 0 where clamped.
    pub fn clamp_min(&mut self, a: Var, lo: f64) -> Result<Var> {
        self.check_live()?;
        let x = &self.nodes[a.0].value;
        let y = x.map(|v| v.max(lo));
        let sides: Vec<bool> = x.as_slice().iter().map(|&v| v > lo).collect();
        for s in sides {
            self.note_branch(s);
        }
        let rg = self.rg(a);
        Ok(self.push(y, Op::ClampMin(a, lo), rg))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.check_live()?;
        let y = self.nodes[a.0].value.matmul(&self.nodes[b.0].value)?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(y, Op::MatMul(a, b), rg))
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        self.check_live()?;
        let y = self.nodes[a.0].value.transpose();
        let rg = self.rg(a);
        Ok(self.push(y, Op::Transpose(a), rg))
    }

    /// Sparse-times-dense `S·X`.
    pub fn spmm(&mut self, s: &Arc<Csr>, a: Var) -> Result<Var> {
        self.check_live()?;
        let y = s.mul_dense(&self.nodes[a.0].value)?;
        let rg = self.rg(a);
        Ok(self.push(y, Op::SpMM(Arc::clone(s), a), rg))
    }

    /// Columns `start..end`.
    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        self.check_live()?;
        let x = &self.nodes[a.0].value;
        if start >= end || end > x.cols() {
            bail!(Dimension, "column range {start}..{end} invalid for {} columns", x.cols());
        }
        let y = x.columns(start, end);
        let rg = self.rg(a);
        Ok(self.push(y, Op::SliceCols(a, start), rg))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        self.check_live()?;
        let Some(first) = parts.first() else {
            bail!(Dimension, "concatenation of zero matrices");
        };
        let rows = self.shape(*first).0;
        let mut cols = 0;
        for p in parts {
            let (r, c) = self.shape(*p);
            if r != rows {
                bail!(Dimension, "concatenating {r} rows onto {rows}");
            }
            cols += c;
        }
        let mut out = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for p in parts {
                out.extend_from_slice(self.nodes[p.0].value.row(i));
            }
        }
        let rg = parts.iter().any(|p| self.rg(*p));
        Ok(self.push(Matrix::from_vec(rows, cols, out)?, Op::ConcatCols(parts.to_vec()), rg))
    }

    /// Row sums as an `n×1` column.
    pub fn sum_rows(&mut self, a: Var) -> Result<Var> {
        self.check_live()?;
        let x = &self.nodes[a.0].value;
        let sums: Vec<f64> = x.row_iter().map(|r| r.iter().sum()).collect();
        let rg = self.rg(a);
        Ok(self.push(Matrix::column_vector(&sums), Op::SumRows(a), rg))
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        self.check_live()?;
        let s: f64 = self.nodes[a.0].value.as_slice().iter().sum();
        let rg = self.rg(a);
        Ok(self.push(Matrix::scalar(s), Op::Sum(a), rg))
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        let n = self.shape(a);
        let s = self.sum(a)?;
        self.scale(s, 1.0 / (n.0 * n.1).max(1) as f64)
    }

    /// Row-wise log-softmax.
    pub fn log_softmax(&mut self, a: Var) -> Result<Var> {
        self.check_live()?;
        let x = &self.nodes[a.0].value;
        let mut out = Vec::with_capacity(x.len());
        for row in x.row_iter() {
            let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = m + libm::log(row.iter().map(|v| libm::exp(v - m)).sum::<f64>());
            out.extend(row.iter().map(|v| v - lse));
        }
        let y = Matrix::from_vec(x.rows(), x.cols(), out)?;
        let rg = self.rg(a);
        Ok(self.push(y, Op::LogSoftmax(a), rg))
    }

    /// Mean of `−logp[i, targets[i]]` over the listed rows.
    pub fn nll(&mut self, logp: Var, rows: &[usize], targets: &[usize]) -> Result<Var> {
        self.check_live()?;
        if rows.is_empty() {
            bail!(Usage, "negative log-likelihood over an empty index set");
        }
        if rows.len() != targets.len() {
            bail!(Dimension, "{} rows but {} targets", rows.len(), targets.len());
        }
        let x = &self.nodes[logp.0].value;
        let mut total = 0.0;
        let mut pairs = Vec::with_capacity(rows.len());
        for (&i, &t) in rows.iter().zip(targets) {
            if i >= x.rows() {
                return Err(crate::Error::Index { index: i, bound: x.rows() });
            }
            if t >= x.cols() {
                return Err(crate::Error::Index { index: t, bound: x.cols() });
            }
            total -= x.get(i, t);
            pairs.push((i, t));
        }
        let y = Matrix::scalar(total / rows.len() as f64);
        let rg = self.rg(logp);
        Ok(self.push(y, Op::Nll(logp, pairs), rg))
    }

    /// Propagates from a `1×1` loss to every trainable leaf and frees the
    /// recorded values. A second call without re-recording is a usage error.
    pub fn backward(&mut self, loss: Var) -> Result<Gradients> {
        self.check_live()?;
        if loss.0 >= self.nodes.len() {
            return Err(crate::Error::Index { index: loss.0, bound: self.nodes.len() });
        }
        if self.shape(loss) != (1, 1) {
            bail!(Usage, "loss must be a scalar, found shape {:?}", self.shape(loss));
        }
        let shapes: Vec<(usize, usize)> = self.nodes.iter().map(|n| n.value.shape()).collect();
        let mut grads: Vec<Option<Matrix>> = vec![None; self.nodes.len()];
        let mut leaf_grads: Vec<Option<Matrix>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Matrix::scalar(1.0));

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let val = |v: Var| &self.nodes[v.0].value;
            match &node.op {
                Op::Leaf => leaf_grads[idx] = Some(g),
                Op::Binary(kind, a, b) => {
                    let (va, vb) = (val(*a), val(*b));
                    let need_a = self.rg(*a);
                    let need_b = self.rg(*b);
                    let (r, c) = g.shape();
                    let mut ga = Matrix::zeros(r, c);
                    let mut gb = Matrix::zeros(r, c);
                    for i in 0..r {
                        for j in 0..c {
                            let x = va.as_slice()[bidx(va, i, j)];
                            let y = vb.as_slice()[bidx(vb, i, j)];
                            let gij = g.get(i, j);
                            let (da, db) = match kind {
                                Binary::Add => (gij, gij),
                                Binary::Sub => (gij, -gij),
                                Binary::Mul => (gij * y, gij * x),
                                Binary::Div => (gij / y, -gij * x / (y * y)),
                            };
                            ga.set(i, j, da);
                            gb.set(i, j, db);
                        }
                    }
                    if need_a {
                        accumulate(&mut grads[a.0], reduce_to(&ga, va.shape()));
                    }
                    if need_b {
                        accumulate(&mut grads[b.0], reduce_to(&gb, vb.shape()));
                    }
                }
                Op::Unary(kind, a) => {
                    let x = val(*a);
                    let y = &node.value;
                    let mut out = g;
                    for ((o, &xv), &yv) in out.as_mut_slice().iter_mut().zip(x.as_slice()).zip(y.as_slice()) {
                        let d = match kind {
                            Unary::Neg => -1.0,
                            Unary::Exp => yv,
                            Unary::Ln => 1.0 / xv,
                            Unary::Sqrt => 0.5 / yv,
                            Unary::Cosh => libm::sinh(xv),
                            Unary::Sinh => libm::cosh(xv),
                            Unary::Arcosh => {
                                if xv > ARCOSH_FLOOR {
                                    1.0 / libm::sqrt((xv - 1.0) * (xv + 1.0))
                                } else {
                                    0.0
                                }
                            }
                            Unary::Relu => {
                                if xv > 0.0 {
                                    1.0
                                } else {
                                    0.0
                                }
                            }
                            Unary::CoshSqrt => special::d_cosh_sqrt(xv),
                            Unary::SinhcSqrt => special::d_sinhc_sqrt(xv),
                            Unary::ArcoshRatio => special::d_arcosh_ratio(xv),
                        };
                        *o *= d;
                    }
                    accumulate(&mut grads[a.0], out);
                }
                Op::Scale(a, s) => accumulate(&mut grads[a.0], g.scale(*s)),
                Op::AddScalar(a) => accumulate(&mut grads[a.0], g),
                Op::ClampMin(a, lo) => {
                    let x = val(*a);
                    let mut out = g;
                    for (o, &xv) in out.as_mut_slice().iter_mut().zip(x.as_slice()) {
                        if xv <= *lo {
                            *o = 0.0;
                        }
                    }
                    accumulate(&mut grads[a.0], out);
                }
                Op::MatMul(a, b) => {
                    if self.rg(*a) {
                        let mut ga = g.matmul(&val(*b).transpose())?;
                        if self.fault == Some(Fault::MatMulBackward) {
                            ga = ga.scale(1.0 + 1e-2);
                        }
                        accumulate(&mut grads[a.0], ga);
                    }
                    if self.rg(*b) {
                        accumulate(&mut grads[b.0], val(*a).transpose().matmul(&g)?);
                    }
                }
                Op::Transpose(a) => accumulate(&mut grads[a.0], g.transpose()),
                Op::SpMM(s, a) => accumulate(&mut grads[a.0], s.mul_dense_transposed(&g)?),
                Op::SliceCols(a, start) => {
                    let (r, c) = shapes[a.0];
                    let mut out = Matrix::zeros(r, c);
                    let w = g.cols();
                    for i in 0..r {
                        out.row_mut(i)[*start..*start + w].copy_from_slice(g.row(i));
                    }
                    accumulate(&mut grads[a.0], out);
                }
                Op::ConcatCols(parts) => {
                    let mut offset = 0;
                    for p in parts {
                        let w = shapes[p.0].1;
                        if self.rg(*p) {
                            accumulate(&mut grads[p.0], g.columns(offset, offset + w));
                        }
                        offset += w;
                    }
                }
                Op::SumRows(a) => {
                    let (r, c) = shapes[a.0];
                    let mut out = Matrix::zeros(r, c);
                    for i in 0..r {
                        let gi = g.get(i, 0);
                        out.row_mut(i).iter_mut().for_each(|v| *v = gi);
                    }
                    accumulate(&mut grads[a.0], out);
                }
                Op::Sum(a) => {
                    let (r, c) = shapes[a.0];
                    accumulate(&mut grads[a.0], Matrix::filled(r, c, g.get(0, 0)));
                }
                Op::LogSoftmax(a) => {
                    // dx = g − softmax · rowsum(g)
                    let y = &node.value;
                    let mut out = g.clone();
                    for i in 0..y.rows() {
                        let gs: f64 = g.row(i).iter().sum();
                        for (o, &yv) in out.row_mut(i).iter_mut().zip(y.row(i)) {
                            *o -= libm::exp(yv) * gs;
                        }
                    }
                    accumulate(&mut grads[a.0], out);
                }
                Op::Nll(a, pairs) => {
                    let (r, c) = shapes[a.0];
                    let mut out = Matrix::zeros(r, c);
                    let w = g.get(0, 0) / pairs.len() as f64;
                    for &(i, t) in pairs {
                        out.set(i, t, out.get(i, t) - w);
                    }
                    accumulate(&mut grads[a.0], out);
                }
            }
        }
        self.nodes = Vec::new();
        self.consumed = true;
        Ok(Gradients { grads: leaf_grads, shapes })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    fn scalar_grad(f: impl Fn(&mut Tape, Var) -> Result<Var>, x: f64) -> f64 {
        let mut t = Tape::new();
        let v = t.param(Matrix::scalar(x));
        let y = f(&mut t, v).unwrap();
        t.backward(y).unwrap().wrt(v).get(0, 0)
    }

    #[test]
    fn elementary_derivatives() {
        assert_eq!(scalar_grad(|t, v| t.cosh(v), 0.0), 0.0);
        assert!((scalar_grad(|t, v| t.arcosh(v), 2.0) - 1.0 / 3f64.sqrt()).abs() < 1e-15);
        assert_eq!(scalar_grad(|t, v| t.arcosh(v), 1.0), 0.0);
        assert_eq!(scalar_grad(|t, v| t.clamp_min(v, 0.5), 0.2), 0.0);
        assert_eq!(scalar_grad(|t, v| t.clamp_min(v, 0.5), 0.7), 1.0);
        assert!((scalar_grad(|t, v| t.arcosh_ratio(v), 1.0) + 1.0 / 3.0).abs() < 1e-15);
        assert!((scalar_grad(|t, v| t.sinhc_sqrt(v), 0.0) - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn sum_and_quadratic_form() {
        let x = m(&[&[1.0, -2.0], &[0.5, 3.0]]);
        let mut t = Tape::new();
        let v = t.param(x.clone());
        let s = t.sum(v).unwrap();
        assert_eq!(t.backward(s).unwrap().wrt(v), Matrix::filled(2, 2, 1.0));

        let mut t = Tape::new();
        let v = t.param(x.clone());
        let sq = t.mul(v, v).unwrap();
        let s = t.sum(sq).unwrap();
        assert_eq!(t.backward(s).unwrap().wrt(v), x.scale(2.0));
    }

    #[test]
    fn backward_contract() {
        let mut t = Tape::new();
        let a = t.param(Matrix::filled(2, 2, 1.0));
        let unused = t.param(Matrix::filled(3, 1, 1.0));
        assert!(matches!(t.backward(a), Err(crate::Error::Usage(_))));
        let s = t.sum(a).unwrap();
        let g = t.backward(s).unwrap();
        assert_eq!(g.wrt(unused), Matrix::zeros(3, 1));
        assert!(t.is_empty());
        assert!(matches!(t.backward(s), Err(crate::Error::Usage(_))));
        assert!(matches!(t.sum(a), Err(crate::Error::Usage(_))));
    }

    #[test]
    fn shape_errors() {
        let mut t = Tape::new();
        let a = t.constant(Matrix::zeros(2, 3));
        let b = t.constant(Matrix::zeros(3, 2));
        assert!(matches!(t.add(a, b), Err(crate::Error::Dimension(_))));
        let c = t.constant(Matrix::zeros(2, 3));
        assert!(matches!(t.matmul(a, c), Err(crate::Error::Dimension(_))));
        assert!(matches!(t.slice_cols(a, 2, 4), Err(crate::Error::Dimension(_))));
    }

    #[test]
    fn broadcasting_reduces_gradients() {
        let mut t = Tape::new();
        let col = t.param(m(&[&[1.0], &[2.0]]));
        let row = t.param(m(&[&[3.0, 4.0, 5.0]]));
        let p = t.mul(col, row).unwrap();
        assert_eq!(t.value(p), &m(&[&[3.0, 4.0, 5.0], &[6.0, 8.0, 10.0]]));
        let s = t.sum(p).unwrap();
        let g = t.backward(s).unwrap();
        assert_eq!(g.wrt(col), m(&[&[12.0], &[12.0]]));
        assert_eq!(g.wrt(row), m(&[&[3.0, 3.0, 3.0]]));
    }

    #[test]
    fn nll_and_log_softmax() {
        let mut t = Tape::new();
        let z = t.param(Matrix::zeros(3, 4));
        let lp = t.log_softmax(z).unwrap();
        let l = t.nll(lp, &[0, 2], &[1, 3]).unwrap();
        assert!((t.value(l).get(0, 0) - 4f64.ln()).abs() < 1e-15);
        assert!(matches!(t.nll(lp, &[], &[]), Err(crate::Error::Usage(_))));
        let g = t.backward(l).unwrap().wrt(z);
        assert!((g.get(0, 1) - (0.25 - 1.0) / 2.0).abs() < 1e-15);
        assert!((g.get(0, 0) - 0.125).abs() < 1e-15);
        assert_eq!(g.row(1), &[0.0; 4]);
    }

    #[test]
    fn branch_signature_tracks_kink_sides() {
        let sig = |x: f64| {
            let mut t = Tape::new();
            let v = t.constant(Matrix::scalar(x));
            t.relu(v).unwrap();
            t.branch_signature()
        };
        assert_eq!(sig(0.3), sig(0.4));
        assert_ne!(sig(0.3), sig(-0.3));
    }
}
