//! Channel representations: pure and mixed states, Kraus sets, Choi matrices,
//! and the transforms between them.

mod adjust;
mod io;
mod ops;

pub use adjust::{adjust_choi, adjust_kraus, adjust_tp, adjust_unit, kraus_gram};
pub use io::{ChoiDocument, KrausDocument};
pub(crate) use ops::canonical_sign;
pub use ops::{
    apply_choi, apply_kraus, choi_to_kraus, constraint_residual, kraus_to_choi, numerical_rank,
    numerical_rank_with, partial_trace, swap_io, RankRule, NEGATIVE_EIG_CLIP,
};

use serde::{Deserialize, Serialize};

use crate::error::{dim_mismatch, Error, Result};
use crate::linalg::{norm2, sym_eig, Matrix, SymMatrix};
use crate::scalar::Scalar;

/// Which partial trace of the Choi matrix is pinned to the identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintKind {
    /// `Σ_s B_sᵀ B_s = I_n`; partial trace over the output index.
    TracePreserving,
    /// `Σ_s B_s B_sᵀ = I_D`; maps the unit matrix to the unit matrix.
    UnitPreserving,
}

impl ConstraintKind {
    /// Size of the identity the constraint pins (`n` for TP, `D` for unit).
    pub fn constrained_dim(self, d_in: usize, d_out: usize) -> usize {
        match self {
            ConstraintKind::TracePreserving => d_in,
            ConstraintKind::UnitPreserving => d_out,
        }
    }
}

/// Unit-norm real state vector.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState<T> {
    amplitudes: Vec<T>,
}

const STATE_NORM_TOL: f64 = 1e-12;

impl<T: Scalar> PureState<T> {
    /// Accepts amplitudes that are already unit norm to 1e-12.
    pub fn new(amplitudes: Vec<T>) -> Result<Self> {
        if amplitudes.is_empty() || amplitudes.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("state amplitudes must be finite and non-empty".into()));
        }
        let norm = norm2(&amplitudes);
        if (norm - T::one()).abs().as_f64() > STATE_NORM_TOL.max(10.0 * T::epsilon().as_f64()) {
            return Err(Error::InvalidInput(format!("state norm {} is not 1", norm)));
        }
        Ok(Self { amplitudes })
    }

    /// Normalizes arbitrary non-zero amplitudes.
    pub fn normalized(mut amplitudes: Vec<T>) -> Result<Self> {
        if amplitudes.is_empty() || amplitudes.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("state amplitudes must be finite and non-empty".into()));
        }
        let norm = norm2(&amplitudes);
        if norm <= T::min_positive_value() {
            return Err(Error::InvalidInput("cannot normalize a zero vector".into()));
        }
        for a in amplitudes.iter_mut() {
            *a /= norm;
        }
        Ok(Self { amplitudes })
    }

    /// Computational basis vector `e_i`.
    pub fn basis(dim: usize, i: usize) -> Self {
        let mut amplitudes = vec![T::zero(); dim];
        amplitudes[i] = T::one();
        Self { amplitudes }
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[T] {
        &self.amplitudes
    }

    pub fn negated(&self) -> Self {
        Self {
            amplitudes: self.amplitudes.iter().map(|&v| -v).collect(),
        }
    }

    /// `|ψ⟩⟨ψ|`.
    pub fn to_density(&self) -> DensityMatrix<T> {
        DensityMatrix {
            matrix: SymMatrix::outer(&self.amplitudes),
            trace_normalized: true,
        }
    }
}

/// Real symmetric PSD density matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix<T> {
    matrix: SymMatrix<T>,
    trace_normalized: bool,
}

const DENSITY_TOL: f64 = 1e-10;

impl<T: Scalar> DensityMatrix<T> {
    /// Validates PSD and unit trace to 1e-10.
    pub fn new(matrix: SymMatrix<T>) -> Result<Self> {
        let rho = Self::unnormalized(matrix)?;
        let tr = rho.matrix.trace();
        if (tr - T::one()).abs().as_f64() > DENSITY_TOL.max(100.0 * T::epsilon().as_f64()) {
            return Err(Error::InvalidInput(format!("density matrix trace {} is not 1", tr)));
        }
        Ok(Self {
            trace_normalized: true,
            ..rho
        })
    }

    /// PSD check only; for outputs of trace-decreasing maps.
    pub fn unnormalized(matrix: SymMatrix<T>) -> Result<Self> {
        let eig = sym_eig(&matrix)?;
        let scale = eig.max_value().abs().max(T::one());
        let tol = T::of(DENSITY_TOL).max(T::of(100.0) * T::epsilon());
        if eig.min_value() < -tol * scale {
            return Err(Error::NotPsd {
                min_eig: eig.min_value().as_f64(),
            });
        }
        Ok(Self {
            matrix,
            trace_normalized: false,
        })
    }

    /// Wraps a matrix produced by a CP map; no validation.
    pub(crate) fn from_channel_output(matrix: SymMatrix<T>) -> Self {
        Self {
            matrix,
            trace_normalized: false,
        }
    }

    /// Maximally mixed state `I/d`.
    pub fn maximally_mixed(dim: usize) -> Self {
        Self {
            matrix: SymMatrix::identity(dim).scale(T::one() / T::of(dim as f64)),
            trace_normalized: true,
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn matrix(&self) -> &SymMatrix<T> {
        &self.matrix
    }

    pub fn trace(&self) -> T {
        self.matrix.trace()
    }

    /// Whether unit trace was verified at construction.
    pub fn is_trace_normalized(&self) -> bool {
        self.trace_normalized
    }
}

/// Channel in Kraus form: `N_s` real `D×n` operators.
#[derive(Debug, Clone, PartialEq)]
pub struct KrausSet<T> {
    d_out: usize,
    d_in: usize,
    operators: Vec<Matrix<T>>,
}

impl<T: Scalar> KrausSet<T> {
    pub fn new(operators: Vec<Matrix<T>>) -> Result<Self> {
        let first = operators
            .first()
            .ok_or_else(|| Error::InvalidInput("a Kraus set needs at least one operator".into()))?;
        let (d_out, d_in) = (first.rows(), first.cols());
        if d_out == 0 || d_in == 0 {
            return Err(Error::InvalidInput("Kraus operators must be non-empty".into()));
        }
        for op in &operators {
            if (op.rows(), op.cols()) != (d_out, d_in) {
                return Err(dim_mismatch(
                    format!("{d_out}x{d_in}"),
                    format!("{}x{}", op.rows(), op.cols()),
                ));
            }
            if !op.is_finite() {
                return Err(Error::InvalidInput("non-finite Kraus operator entry".into()));
            }
        }
        Ok(Self {
            d_out,
            d_in,
            operators,
        })
    }

    /// Single-operator channel `ρ → U ρ Uᵀ`.
    pub fn single(op: Matrix<T>) -> Result<Self> {
        Self::new(vec![op])
    }

    pub fn identity(n: usize) -> Self {
        Self {
            d_out: n,
            d_in: n,
            operators: vec![Matrix::identity(n)],
        }
    }

    /// The `D = 1` channel `ρ → Tr ρ`, with operators `e_sᵀ`.
    pub fn trace_channel(n: usize) -> Self {
        let operators = (0..n)
            .map(|s| Matrix::from_fn(1, n, |_, k| if k == s { T::one() } else { T::zero() }))
            .collect();
        Self {
            d_out: 1,
            d_in: n,
            operators,
        }
    }

    /// Kraus matrix in column layout: row `j·n + k`, column `s`.
    pub fn from_columns(d_out: usize, d_in: usize, b: &Matrix<T>) -> Result<Self> {
        if b.rows() != d_out * d_in || b.cols() == 0 {
            return Err(dim_mismatch(
                format!("{}xN_s", d_out * d_in),
                format!("{}x{}", b.rows(), b.cols()),
            ));
        }
        let operators = (0..b.cols())
            .map(|s| Matrix::from_fn(d_out, d_in, |j, k| b[(j * d_in + k, s)]))
            .collect();
        Self::new(operators)
    }

    /// Inverse of [`KrausSet::from_columns`].
    pub fn to_columns(&self) -> Matrix<T> {
        let n = self.d_in;
        Matrix::from_fn(self.d_out * n, self.n_s(), |i, s| self.operators[s][(i / n, i % n)])
    }

    pub fn d_out(&self) -> usize {
        self.d_out
    }

    pub fn d_in(&self) -> usize {
        self.d_in
    }

    pub fn n_s(&self) -> usize {
        self.operators.len()
    }

    pub fn operators(&self) -> &[Matrix<T>] {
        &self.operators
    }

    pub fn into_operators(self) -> Vec<Matrix<T>> {
        self.operators
    }

    pub fn scale(&self, c: T) -> Self {
        Self {
            operators: self.operators.iter().map(|op| op.scale(c)).collect(),
            ..self.clone()
        }
    }
}

/// Choi matrix `J_{jk;j'k'} = Σ_s B_{jk;s} B_{j'k';s}` of dimension `D·n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChoiMatrix<T> {
    d_out: usize,
    d_in: usize,
    j: SymMatrix<T>,
}

impl<T: Scalar> ChoiMatrix<T> {
    pub fn new(d_out: usize, d_in: usize, j: SymMatrix<T>) -> Result<Self> {
        if d_out == 0 || d_in == 0 || j.dim() != d_out * d_in {
            return Err(dim_mismatch(d_out * d_in, j.dim()));
        }
        Ok(Self { d_out, d_in, j })
    }

    pub fn d_out(&self) -> usize {
        self.d_out
    }

    pub fn d_in(&self) -> usize {
        self.d_in
    }

    pub fn dim(&self) -> usize {
        self.j.dim()
    }

    pub fn matrix(&self) -> &SymMatrix<T> {
        &self.j
    }

    pub fn into_matrix(self) -> SymMatrix<T> {
        self.j
    }

    /// Scalar index of the multi-index `(j, k)`.
    #[inline]
    pub fn index(&self, j: usize, k: usize) -> usize {
        j * self.d_in + k
    }

    #[inline]
    pub fn at(&self, j: usize, k: usize, jp: usize, kp: usize) -> T {
        self.j.get(j * self.d_in + k, jp * self.d_in + kp)
    }

    /// Ascending eigenvalues of `J`.
    pub fn eigenvalues(&self) -> Result<Vec<T>> {
        Ok(sym_eig(&self.j)?.values)
    }

    /// Paper-rule numerical rank of `J` (see [`numerical_rank`]).
    pub fn numerical_rank(&self) -> Result<usize> {
        Ok(numerical_rank(&self.eigenvalues()?))
    }

    pub fn scale(&self, c: T) -> Self {
        Self {
            j: self.j.scale(c),
            ..self.clone()
        }
    }
}
