//! Reverse-mode automatic differentiation on an operation tape.
//!
//! Nodes are recorded in construction order, which is already topological:
//! every operand of a node has a smaller index. `backward` walks the tape
//! once in reverse, accumulating gradients into parents. Tapes are cheap and
//! are rebuilt for every batch; a tape is confined to one worker.

use thiserror::Error;

use super::special::{digamma, SpecialError};
use super::tensor::{Tensor, TensorError};
use crate::scalar::Real;

#[derive(Debug, Error, PartialEq)]
pub enum TapeError {
    #[error(transparent)]
    Shape(#[from] TensorError),
    #[error("loss is not a scalar recorded on this tape")]
    DetachedLoss,
    #[error(transparent)]
    Special(#[from] SpecialError),
}

/// Handle to a value recorded on a tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ValueId(usize);

#[derive(Debug, Clone)]
enum Op<T> {
    Leaf,
    MatMul(ValueId, ValueId),
    Add(ValueId, ValueId),
    Sub(ValueId, ValueId),
    Mul(ValueId, ValueId),
    Div(ValueId, ValueId),
    AddRowBroadcast(ValueId, ValueId),
    Relu(ValueId),
    Softplus(ValueId),
    LogSoftmax(ValueId),
    Ln(ValueId),
    Abs(ValueId),
    LnGamma(ValueId),
    Scale(ValueId, T),
    AddConst(ValueId, T),
    MeanPoolRows(ValueId),
    ConcatCols(ValueId, ValueId),
    Reshape(ValueId),
    Sum(ValueId),
    Pick(ValueId, usize),
}

struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
}

/// Recorded computation graph.
pub struct Tape<T: Real> {
    nodes: Vec<Node<T>>,
}

/// Gradients keyed by [`ValueId`]; parameters the loss never touched get zero.
pub struct Gradients<T> {
    grads: Vec<Option<Tensor<T>>>,
    shapes: Vec<Vec<usize>>,
}

impl<T: Real> Gradients<T> {
    pub fn get(&self, id: ValueId) -> Option<&Tensor<T>> {
        self.grads[id.0].as_ref()
    }

    /// Gradient of `id`, materializing zeros for untouched nodes.
    pub fn take(&mut self, id: ValueId) -> Tensor<T> {
        let shape = &self.shapes[id.0];
        self.grads[id.0]
            .take()
            .unwrap_or_else(|| Tensor::zeros(shape[0], shape[1]))
    }
}

impl<T: Real> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> Tape<T> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>) -> ValueId {
        self.nodes.push(Node { value, op });
        ValueId(self.nodes.len() - 1)
    }

    /// Registers a differentiable leaf (a parameter).
    pub fn watch(&mut self, value: &Tensor<T>) -> ValueId {
        self.push(value.clone(), Op::Leaf)
    }

    /// Registers a non-parameter input. Gradients still flow to it, they are
    /// simply never read.
    pub fn constant(&mut self, value: Tensor<T>) -> ValueId {
        self.push(value, Op::Leaf)
    }

    pub fn scalar(&mut self, v: T) -> ValueId {
        self.constant(Tensor::scalar(v))
    }

    pub fn value(&self, id: ValueId) -> &Tensor<T> {
        &self.nodes[id.0].value
    }

    pub fn matmul(&mut self, a: ValueId, b: ValueId) -> Result<ValueId, TapeError> {
        let v = self.value(a).matmul(self.value(b))?;
        Ok(self.push(v, Op::MatMul(a, b)))
    }

    pub fn add(&mut self, a: ValueId, b: ValueId) -> Result<ValueId, TapeError> {
        let v = self.value(a).add(self.value(b))?;
        Ok(self.push(v, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: ValueId, b: ValueId) -> Result<ValueId, TapeError> {
        let v = self.value(a).sub(self.value(b))?;
        Ok(self.push(v, Op::Sub(a, b)))
    }

    pub fn mul(&mut self, a: ValueId, b: ValueId) -> Result<ValueId, TapeError> {
        let v = self.value(a).mul(self.value(b))?;
        Ok(self.push(v, Op::Mul(a, b)))
    }

    pub fn div(&mut self, a: ValueId, b: ValueId) -> Result<ValueId, TapeError> {
        let v = self.value(a).div(self.value(b))?;
        Ok(self.push(v, Op::Div(a, b)))
    }

    /// Matrix plus a `1 x cols` bias row added to every row.
    pub fn add_row_broadcast(&mut self, m: ValueId, row: ValueId) -> Result<ValueId, TapeError> {
        let v = self.value(m).add_row_broadcast(self.value(row))?;
        Ok(self.push(v, Op::AddRowBroadcast(m, row)))
    }

    pub fn relu(&mut self, a: ValueId) -> ValueId {
        let v = self.value(a).map(|x| if x > T::zero() { x } else { T::zero() });
        self.push(v, Op::Relu(a))
    }

    pub fn softplus(&mut self, a: ValueId) -> ValueId {
        let v = self.value(a).map(softplus_stable);
        self.push(v, Op::Softplus(a))
    }

    /// Row-wise log-softmax.
    pub fn log_softmax(&mut self, a: ValueId) -> ValueId {
        let x = self.value(a);
        let (rows, cols) = (x.rows(), x.cols());
        let mut out = Tensor::zeros(rows, cols);
        for r in 0..rows {
            let row = &x.values()[r * cols..(r + 1) * cols];
            let max = row.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
            let lse = row
                .iter()
                .fold(T::zero(), |acc, &v| acc + (v - max).exp())
                .ln()
                + max;
            for c in 0..cols {
                out.set(r, c, row[c] - lse);
            }
        }
        self.push(out, Op::LogSoftmax(a))
    }

    pub fn ln(&mut self, a: ValueId) -> ValueId {
        let v = self.value(a).map(|x| x.ln());
        self.push(v, Op::Ln(a))
    }

    pub fn abs(&mut self, a: ValueId) -> ValueId {
        let v = self.value(a).map(|x| x.abs());
        self.push(v, Op::Abs(a))
    }

    /// Elementwise ln Γ; inputs must be strictly positive.
    pub fn ln_gamma(&mut self, a: ValueId) -> Result<ValueId, TapeError> {
        if self.value(a).values().iter().any(|&x| x <= T::zero()) {
            return Err(SpecialError::NonPositiveArgument.into());
        }
        let v = self
            .value(a)
            .map(|x| super::special::log_gamma(x).expect("positive checked"));
        Ok(self.push(v, Op::LnGamma(a)))
    }

    pub fn scale(&mut self, a: ValueId, s: T) -> ValueId {
        let v = self.value(a).scale(s);
        self.push(v, Op::Scale(a, s))
    }

    pub fn add_const(&mut self, a: ValueId, c: T) -> ValueId {
        let v = self.value(a).map(|x| x + c);
        self.push(v, Op::AddConst(a, c))
    }

    pub fn mean_pool_rows(&mut self, a: ValueId) -> ValueId {
        let v = self.value(a).mean_pool_rows();
        self.push(v, Op::MeanPoolRows(a))
    }

    pub fn concat_cols(&mut self, a: ValueId, b: ValueId) -> Result<ValueId, TapeError> {
        let v = self.value(a).concat_cols(self.value(b))?;
        Ok(self.push(v, Op::ConcatCols(a, b)))
    }

    /// Flattens to a single row.
    pub fn flatten_row(&mut self, a: ValueId) -> ValueId {
        let n = self.value(a).len();
        let v = self.value(a).reshaped(vec![1, n]);
        self.push(v, Op::Reshape(a))
    }

    /// Sum of all entries, as a scalar node.
    pub fn sum(&mut self, a: ValueId) -> ValueId {
        let v = Tensor::scalar(self.value(a).sum());
        self.push(v, Op::Sum(a))
    }

    /// Selects one flat element, as a scalar node.
    pub fn pick(&mut self, a: ValueId, index: usize) -> ValueId {
        let v = Tensor::scalar(self.value(a).values()[index]);
        self.push(v, Op::Pick(a, index))
    }

    /// Reverse pass from a scalar loss. Each node is visited exactly once in
    /// reverse topological order.
    pub fn backward(&self, loss: ValueId) -> Result<Gradients<T>, TapeError> {
        if loss.0 >= self.nodes.len() || !self.nodes[loss.0].value.is_scalar() {
            return Err(TapeError::DetachedLoss);
        }
        let mut grads: Vec<Option<Tensor<T>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Tensor::scalar(T::one()));
        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].clone() else {
                continue;
            };
            match &self.nodes[idx].op {
                Op::Leaf => {}
                Op::MatMul(a, b) => {
                    let da = g.matmul_t(self.value(*b))?;
                    let db = self.value(*a).t_matmul(&g)?;
                    accumulate(&mut grads[a.0], da);
                    accumulate(&mut grads[b.0], db);
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads[a.0], g.clone());
                    accumulate(&mut grads[b.0], g);
                }
                Op::Sub(a, b) => {
                    accumulate(&mut grads[a.0], g.clone());
                    accumulate(&mut grads[b.0], g.scale(-T::one()));
                }
                Op::Mul(a, b) => {
                    let da = g.mul(self.value(*b))?;
                    let db = g.mul(self.value(*a))?;
                    accumulate(&mut grads[a.0], da);
                    accumulate(&mut grads[b.0], db);
                }
                Op::Div(a, b) => {
                    let bv = self.value(*b);
                    let da = g.div(bv)?;
                    // d(a/b)/db = -a / b²
                    let db = g.mul(&self.nodes[idx].value)?.div(bv)?.scale(-T::one());
                    accumulate(&mut grads[a.0], da);
                    accumulate(&mut grads[b.0], db);
                }
                Op::AddRowBroadcast(m, row) => {
                    accumulate(&mut grads[m.0], g.clone());
                    let cols = g.cols();
                    let mut row_grad = Tensor::zeros(1, cols);
                    for r in 0..g.rows() {
                        for c in 0..cols {
                            let v = row_grad.at(0, c) + g.at(r, c);
                            row_grad.set(0, c, v);
                        }
                    }
                    accumulate(&mut grads[row.0], row_grad);
                }
                Op::Relu(a) => {
                    let x = self.value(*a);
                    let mut dx = g;
                    for (d, &xv) in dx.values_mut().iter_mut().zip(x.values()) {
                        if xv <= T::zero() {
                            *d = T::zero();
                        }
                    }
                    accumulate(&mut grads[a.0], dx);
                }
                Op::Softplus(a) => {
                    let x = self.value(*a);
                    let mut dx = g;
                    for (d, &xv) in dx.values_mut().iter_mut().zip(x.values()) {
                        *d = *d * sigmoid_stable(xv);
                    }
                    accumulate(&mut grads[a.0], dx);
                }
                Op::LogSoftmax(a) => {
                    let y = &self.nodes[idx].value;
                    let (rows, cols) = (y.rows(), y.cols());
                    let mut dx = Tensor::zeros(rows, cols);
                    for r in 0..rows {
                        let mut gsum = T::zero();
                        for c in 0..cols {
                            gsum += g.at(r, c);
                        }
                        for c in 0..cols {
                            let softmax = y.at(r, c).exp();
                            dx.set(r, c, g.at(r, c) - softmax * gsum);
                        }
                    }
                    accumulate(&mut grads[a.0], dx);
                }
                Op::Ln(a) => {
                    let dx = g.div(self.value(*a))?;
                    accumulate(&mut grads[a.0], dx);
                }
                Op::Abs(a) => {
                    let x = self.value(*a);
                    let mut dx = g;
                    for (d, &xv) in dx.values_mut().iter_mut().zip(x.values()) {
                        // Subgradient 0 at the kink.
                        *d = *d * if xv > T::zero() {
                            T::one()
                        } else if xv < T::zero() {
                            -T::one()
                        } else {
                            T::zero()
                        };
                    }
                    accumulate(&mut grads[a.0], dx);
                }
                Op::LnGamma(a) => {
                    let x = self.value(*a);
                    let mut dx = g;
                    for (d, &xv) in dx.values_mut().iter_mut().zip(x.values()) {
                        *d = *d * digamma(xv).expect("positive checked at record time");
                    }
                    accumulate(&mut grads[a.0], dx);
                }
                Op::Scale(a, s) => {
                    accumulate(&mut grads[a.0], g.scale(*s));
                }
                Op::AddConst(a, _) => {
                    accumulate(&mut grads[a.0], g);
                }
                Op::MeanPoolRows(a) => {
                    let x = self.value(*a);
                    let (rows, cols) = (x.rows(), x.cols());
                    let inv = T::one() / T::of_usize(rows);
                    let mut dx = Tensor::zeros(rows, cols);
                    for r in 0..rows {
                        for c in 0..cols {
                            dx.set(r, c, g.at(0, c) * inv);
                        }
                    }
                    accumulate(&mut grads[a.0], dx);
                }
                Op::ConcatCols(a, b) => {
                    let (ca, cb) = (self.value(*a).cols(), self.value(*b).cols());
                    let rows = g.rows();
                    let mut da = Tensor::zeros(rows, ca);
                    let mut db = Tensor::zeros(rows, cb);
                    for r in 0..rows {
                        for c in 0..ca {
                            da.set(r, c, g.at(r, c));
                        }
                        for c in 0..cb {
                            db.set(r, c, g.at(r, ca + c));
                        }
                    }
                    accumulate(&mut grads[a.0], da);
                    accumulate(&mut grads[b.0], db);
                }
                Op::Reshape(a) => {
                    let shape = self.value(*a).shape().to_vec();
                    accumulate(&mut grads[a.0], g.reshaped(shape));
                }
                Op::Sum(a) => {
                    let x = self.value(*a);
                    let gv = g.item();
                    let dx = Tensor::new(x.shape().to_vec(), vec![gv; x.len()]);
                    accumulate(&mut grads[a.0], dx);
                }
                Op::Pick(a, index) => {
                    let x = self.value(*a);
                    let mut dx = Tensor::new(x.shape().to_vec(), vec![T::zero(); x.len()]);
                    dx.values_mut()[*index] = g.item();
                    accumulate(&mut grads[a.0], dx);
                }
            }
        }
        let shapes = self
            .nodes
            .iter()
            .map(|n| n.value.shape().to_vec())
            .collect();
        Ok(Gradients { grads, shapes })
    }
}

fn accumulate<T: Real>(slot: &mut Option<Tensor<T>>, delta: Tensor<T>) {
    match slot {
        Some(existing) => {
            *existing = existing.add(&delta).expect("gradient shapes agree");
        }
        None => *slot = Some(delta),
    }
}

fn softplus_stable<T: Real>(x: T) -> T {
    // ln(1 + e^x) = max(x, 0) + ln(1 + e^{-|x|})
    x.max(T::zero()) + (-x.abs()).exp().ln_1p()
}

fn sigmoid_stable<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}
