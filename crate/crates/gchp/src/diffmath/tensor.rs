//! Dense row-major tensors.
//!
//! Shapes are small here (window-sized matrices and head weights), so the
//! representation is a plain `Vec` with a shape vector and straightforward
//! loops. Tensors are value-semantic.

use thiserror::Error;

use crate::scalar::Real;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TensorError {
    #[error("shape mismatch: {context} with shapes {lhs:?} and {rhs:?}")]
    ShapeMismatch {
        context: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
}

/// Dense tensor with row-major storage. Scalars are `1x1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    shape: Vec<usize>,
    values: Vec<T>,
}

impl<T: Real> Tensor<T> {
    pub fn new(shape: Vec<usize>, values: Vec<T>) -> Self {
        let n: usize = shape.iter().product();
        assert_eq!(n, values.len(), "value count must equal product of shape");
        Tensor { shape, values }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Tensor {
            shape: vec![rows, cols],
            values: vec![T::zero(); rows * cols],
        }
    }

    pub fn scalar(v: T) -> Self {
        Tensor {
            shape: vec![1, 1],
            values: vec![v],
        }
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut values = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            values.extend_from_slice(row);
        }
        Tensor {
            shape: vec![r, c],
            values,
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Self::zeros(n, n);
        for i in 0..n {
            t.values[i * n + i] = T::one();
        }
        t
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rows(&self) -> usize {
        self.shape[0]
    }

    pub fn cols(&self) -> usize {
        self.shape[1]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn at(&self, r: usize, c: usize) -> T {
        self.values[r * self.cols() + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: T) {
        let cols = self.cols();
        self.values[r * cols + c] = v;
    }

    /// The single element of a `1x1` tensor.
    pub fn item(&self) -> T {
        assert_eq!(self.values.len(), 1, "item() requires a scalar tensor");
        self.values[0]
    }

    pub fn is_scalar(&self) -> bool {
        self.values.len() == 1
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Tensor {
            shape: self.shape.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Reinterprets the buffer with a new shape of equal length.
    pub fn reshaped(&self, shape: Vec<usize>) -> Self {
        let n: usize = shape.iter().product();
        assert_eq!(n, self.values.len(), "reshape must preserve length");
        Tensor {
            shape,
            values: self.values.clone(),
        }
    }

    pub fn matmul(&self, rhs: &Self) -> Result<Self, TensorError> {
        if self.cols() != rhs.rows() {
            return Err(TensorError::ShapeMismatch {
                context: "matmul",
                lhs: self.shape.clone(),
                rhs: rhs.shape.clone(),
            });
        }
        let (m, k, n) = (self.rows(), self.cols(), rhs.cols());
        let mut out = Self::zeros(m, n);
        for i in 0..m {
            for p in 0..k {
                let a = self.values[i * k + p];
                if a == T::zero() {
                    continue;
                }
                let lhs_row = &rhs.values[p * n..(p + 1) * n];
                let out_row = &mut out.values[i * n..(i + 1) * n];
                for (o, &b) in out_row.iter_mut().zip(lhs_row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `self^T * rhs` without materializing the transpose.
    pub fn t_matmul(&self, rhs: &Self) -> Result<Self, TensorError> {
        if self.rows() != rhs.rows() {
            return Err(TensorError::ShapeMismatch {
                context: "t_matmul",
                lhs: self.shape.clone(),
                rhs: rhs.shape.clone(),
            });
        }
        let (k, m, n) = (self.rows(), self.cols(), rhs.cols());
        let mut out = Self::zeros(m, n);
        for p in 0..k {
            for i in 0..m {
                let a = self.values[p * m + i];
                if a == T::zero() {
                    continue;
                }
                let rhs_row = &rhs.values[p * n..(p + 1) * n];
                let out_row = &mut out.values[i * n..(i + 1) * n];
                for (o, &b) in out_row.iter_mut().zip(rhs_row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `self * rhs^T` without materializing the transpose.
    pub fn matmul_t(&self, rhs: &Self) -> Result<Self, TensorError> {
        if self.cols() != rhs.cols() {
            return Err(TensorError::ShapeMismatch {
                context: "matmul_t",
                lhs: self.shape.clone(),
                rhs: rhs.shape.clone(),
            });
        }
        let (m, k, n) = (self.rows(), self.cols(), rhs.rows());
        let mut out = Self::zeros(m, n);
        for i in 0..m {
            for j in 0..n {
                let mut acc = T::zero();
                let a_row = &self.values[i * k..(i + 1) * k];
                let b_row = &rhs.values[j * k..(j + 1) * k];
                for (&a, &b) in a_row.iter().zip(b_row) {
                    acc += a * b;
                }
                out.values[i * n + j] = acc;
            }
        }
        Ok(out)
    }

    pub fn transpose(&self) -> Self {
        let (m, n) = (self.rows(), self.cols());
        let mut out = Self::zeros(n, m);
        for i in 0..m {
            for j in 0..n {
                out.values[j * m + i] = self.values[i * n + j];
            }
        }
        out
    }

    fn zip_same_shape(
        &self,
        rhs: &Self,
        context: &'static str,
        f: impl Fn(T, T) -> T,
    ) -> Result<Self, TensorError> {
        if self.shape != rhs.shape {
            return Err(TensorError::ShapeMismatch {
                context,
                lhs: self.shape.clone(),
                rhs: rhs.shape.clone(),
            });
        }
        Ok(Tensor {
            shape: self.shape.clone(),
            values: self
                .values
                .iter()
                .zip(&rhs.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn add(&self, rhs: &Self) -> Result<Self, TensorError> {
        self.zip_same_shape(rhs, "add", |a, b| a + b)
    }

    pub fn sub(&self, rhs: &Self) -> Result<Self, TensorError> {
        self.zip_same_shape(rhs, "sub", |a, b| a - b)
    }

    pub fn mul(&self, rhs: &Self) -> Result<Self, TensorError> {
        self.zip_same_shape(rhs, "mul", |a, b| a * b)
    }

    pub fn div(&self, rhs: &Self) -> Result<Self, TensorError> {
        self.zip_same_shape(rhs, "div", |a, b| a / b)
    }

    /// Adds a `1 x cols` row vector to every row.
    pub fn add_row_broadcast(&self, row: &Self) -> Result<Self, TensorError> {
        if row.rows() != 1 || row.cols() != self.cols() {
            return Err(TensorError::ShapeMismatch {
                context: "add_row_broadcast",
                lhs: self.shape.clone(),
                rhs: row.shape.clone(),
            });
        }
        let mut out = self.clone();
        let n = self.cols();
        for r in 0..self.rows() {
            for c in 0..n {
                out.values[r * n + c] += row.values[c];
            }
        }
        Ok(out)
    }

    pub fn scale(&self, s: T) -> Self {
        self.map(|v| v * s)
    }

    pub fn sum(&self) -> T {
        self.values.iter().fold(T::zero(), |acc, &v| acc + v)
    }

    /// Column means: `m x n -> 1 x n`.
    pub fn mean_pool_rows(&self) -> Self {
        let (m, n) = (self.rows(), self.cols());
        let inv = T::one() / T::of_usize(m);
        let mut out = Self::zeros(1, n);
        for r in 0..m {
            for c in 0..n {
                out.values[c] += self.values[r * n + c];
            }
        }
        for c in 0..n {
            out.values[c] *= inv;
        }
        out
    }

    /// Column-wise concatenation `[self : rhs]`.
    pub fn concat_cols(&self, rhs: &Self) -> Result<Self, TensorError> {
        if self.rows() != rhs.rows() {
            return Err(TensorError::ShapeMismatch {
                context: "concat_cols",
                lhs: self.shape.clone(),
                rhs: rhs.shape.clone(),
            });
        }
        let (m, a, b) = (self.rows(), self.cols(), rhs.cols());
        let mut out = Self::zeros(m, a + b);
        for r in 0..m {
            out.values[r * (a + b)..r * (a + b) + a]
                .copy_from_slice(&self.values[r * a..(r + 1) * a]);
            out.values[r * (a + b) + a..(r + 1) * (a + b)]
                .copy_from_slice(&rhs.values[r * b..(r + 1) * b]);
        }
        Ok(out)
    }
}
