use std::ops::{Index, IndexMut};

use crate::error::{dim_mismatch, Error, Result};
use crate::scalar::Scalar;

/// Dense row-major real matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    /// Builds a matrix from row-major entries. Entries must be finite.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(dim_mismatch(rows * cols, data.len()));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite matrix entry".into()));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_diag(values: &[T]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    /// Single column matrix.
    pub fn column(values: &[T]) -> Self {
        Self {
            rows: values.len(),
            cols: 1,
            data: values.to_vec(),
        }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn set_col(&mut self, j: usize, values: &[T]) {
        debug_assert_eq!(values.len(), self.rows);
        for (i, &v) in values.iter().enumerate() {
            self[(i, j)] = v;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    /// Matrix product `self * rhs`.
    pub fn matmul(&self, rhs: &Matrix<T>) -> Self {
        assert_eq!(self.cols, rhs.rows, "matmul inner dimension");
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == T::zero() {
                    continue;
                }
                let rhs_row = &rhs.data[k * rhs.cols..(k + 1) * rhs.cols];
                for (o, &b) in out_row.iter_mut().zip(rhs_row) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `selfᵀ * rhs` without materializing the transpose.
    pub fn tr_matmul(&self, rhs: &Matrix<T>) -> Self {
        assert_eq!(self.rows, rhs.rows, "tr_matmul inner dimension");
        let mut out = Self::zeros(self.cols, rhs.cols);
        for k in 0..self.rows {
            let lhs_row = self.row(k);
            let rhs_row = rhs.row(k);
            for (i, &a) in lhs_row.iter().enumerate() {
                if a == T::zero() {
                    continue;
                }
                let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
                for (o, &b) in out_row.iter_mut().zip(rhs_row) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `self * rhsᵀ`.
    pub fn matmul_tr(&self, rhs: &Matrix<T>) -> Self {
        assert_eq!(self.cols, rhs.cols, "matmul_tr inner dimension");
        Self::from_fn(self.rows, rhs.rows, |i, j| dot(self.row(i), rhs.row(j)))
    }

    pub fn matvec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(self.cols, v.len(), "matvec dimension");
        (0..self.rows).map(|i| dot(self.row(i), v)).collect()
    }

    pub fn scale(&self, c: T) -> Self {
        self.map(|v| v * c)
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn add(&self, rhs: &Matrix<T>) -> Self {
        self.zip_with(rhs, |a, b| a + b)
    }

    pub fn sub(&self, rhs: &Matrix<T>) -> Self {
        self.zip_with(rhs, |a, b| a - b)
    }

    /// `self += c * rhs`.
    pub fn axpy(&mut self, c: T, rhs: &Matrix<T>) {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        for (a, &b) in self.data.iter_mut().zip(&rhs.data) {
            *a += c * b;
        }
    }

    fn zip_with(&self, rhs: &Matrix<T>, f: impl Fn(T, T) -> T) -> Self {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "shape mismatch");
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    pub fn trace(&self) -> T {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    /// Frobenius inner product `Σ aᵢⱼ bᵢⱼ`.
    pub fn frobenius_dot(&self, rhs: &Matrix<T>) -> T {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "shape mismatch");
        dot(&self.data, &rhs.data)
    }

    pub fn frobenius_norm(&self) -> T {
        dot(&self.data, &self.data).sqrt()
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    /// Symmetric part `(A + Aᵀ)/2`.
    pub fn symmetrized(&self) -> Self {
        assert!(self.is_square());
        let half = T::of(0.5);
        Self::from_fn(self.rows, self.cols, |i, j| half * (self[(i, j)] + self[(j, i)]))
    }

    pub fn max_abs_diff(&self, rhs: &Matrix<T>) -> T {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "shape mismatch");
        self.data
            .iter()
            .zip(&rhs.data)
            .fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs()))
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

#[inline]
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

pub fn norm2<T: Scalar>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

/// Dense symmetric matrix with full storage.
///
/// Construction symmetrizes the input so `a[(i,j)] == a[(j,i)]` holds exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix<T> {
    inner: Matrix<T>,
}

impl<T: Scalar> SymMatrix<T> {
    pub fn zeros(n: usize) -> Self {
        Self {
            inner: Matrix::zeros(n, n),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            inner: Matrix::identity(n),
        }
    }

    pub fn from_diag(values: &[T]) -> Self {
        Self {
            inner: Matrix::from_diag(values),
        }
    }

    /// Symmetrizes `m` as `(m + mᵀ)/2`.
    pub fn from_matrix(m: &Matrix<T>) -> Result<Self> {
        if !m.is_square() {
            return Err(dim_mismatch("square matrix", format!("{}x{}", m.rows(), m.cols())));
        }
        if !m.is_finite() {
            return Err(Error::InvalidInput("non-finite matrix entry".into()));
        }
        Ok(Self {
            inner: m.symmetrized(),
        })
    }

    pub fn from_vec(n: usize, data: Vec<T>) -> Result<Self> {
        Self::from_matrix(&Matrix::from_vec(n, n, data)?)
    }

    /// Wraps a matrix the caller guarantees to be exactly symmetric.
    pub(crate) fn from_symmetric_unchecked(m: Matrix<T>) -> Self {
        debug_assert!(m.is_square());
        Self { inner: m }
    }

    /// Builds from a function evaluated on the upper triangle and mirrored.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = f(i, j);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        Self { inner: m }
    }

    /// `v vᵀ`.
    pub fn outer(v: &[T]) -> Self {
        Self::from_fn(v.len(), |i, j| v[i] * v[j])
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.inner.rows()
    }

    #[inline]
    pub fn as_matrix(&self) -> &Matrix<T> {
        &self.inner
    }

    pub fn into_matrix(self) -> Matrix<T> {
        self.inner
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.inner[(i, j)]
    }

    /// Sets both `(i,j)` and `(j,i)`.
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.inner[(i, j)] = v;
        self.inner[(j, i)] = v;
    }

    /// Adds `v` to `(i,j)` and, off the diagonal, to `(j,i)`.
    pub fn add_sym(&mut self, i: usize, j: usize, v: T) {
        self.inner[(i, j)] += v;
        if i != j {
            self.inner[(j, i)] += v;
        }
    }

    pub fn trace(&self) -> T {
        self.inner.trace()
    }

    pub fn frobenius_dot(&self, rhs: &SymMatrix<T>) -> T {
        self.inner.frobenius_dot(&rhs.inner)
    }

    pub fn frobenius_norm(&self) -> T {
        self.inner.frobenius_norm()
    }

    pub fn scale(&self, c: T) -> Self {
        Self {
            inner: self.inner.scale(c),
        }
    }

    pub fn add(&self, rhs: &SymMatrix<T>) -> Self {
        Self {
            inner: self.inner.add(&rhs.inner),
        }
    }

    pub fn sub(&self, rhs: &SymMatrix<T>) -> Self {
        Self {
            inner: self.inner.sub(&rhs.inner),
        }
    }

    pub fn axpy(&mut self, c: T, rhs: &SymMatrix<T>) {
        self.inner.axpy(c, &rhs.inner);
    }

    /// Quadratic form `vᵀ A v`.
    pub fn quad_form(&self, v: &[T]) -> T {
        dot(v, &self.inner.matvec(v))
    }

    /// Congruence `Bᵀ A B`, result symmetrized.
    pub fn congruence(&self, b: &Matrix<T>) -> Self {
        let ab = self.inner.matmul(b);
        Self {
            inner: b.tr_matmul(&ab).symmetrized(),
        }
    }

    /// Congruence `B A Bᵀ`, result symmetrized.
    pub fn congruence_tr(&self, b: &Matrix<T>) -> Self {
        let ba = b.matmul(&self.inner);
        Self {
            inner: ba.matmul_tr(b).symmetrized(),
        }
    }

    pub fn max_abs_diff(&self, rhs: &SymMatrix<T>) -> T {
        self.inner.max_abs_diff(&rhs.inner)
    }
}

impl<T> Index<(usize, usize)> for SymMatrix<T> {
    type Output = T;

    #[inline]
    fn index(&self, idx: (usize, usize)) -> &T {
        &self.inner[idx]
    }
}
