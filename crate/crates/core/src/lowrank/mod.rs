//! Fixed-Kraus-rank eigeniteration over lower-diagonal Kraus matrices.
//!
//! The Choi matrix is parametrized as `J = B Bᵀ` with `B` a `Dn×N_s` matrix
//! that vanishes above its diagonal (`B_{i;s} = 0` for `s > i`, `i = j·n + k`).
//! Each iteration maximizes `Σ_s B_sᵀ (S − λ⊗δ) B_s` under the single norm
//! constraint `|B|² = n` (TP) or `D` (unit) on the subspace orthogonal to
//! the linearized Gram constraints, then restores the full constraints with
//! `G^{-1/2}`, returns to the lower-diagonal gauge by QR, and updates the
//! multipliers `λ`.

mod iterate;

pub use iterate::{
    eig_step, helper_constraints, lagrange_update, restore_and_regauge, run, run_from, run_ratio, write_trace_csv,
    LowRankResult, LowRankStatus, TraceRecord,
};

use crate::channel::{ConstraintKind, KrausSet};
use crate::error::{dim_mismatch, Error, Result};
use crate::linalg::{Matrix, SymMatrix};
use crate::scalar::Scalar;

/// `(full, reduced)` eigenproblem sizes: the number of stencil entries, and
/// that count less the `n(n+1)/2 − 1` (TP) or `D(D+1)/2 − 1` (unit) helper
/// constraints.
pub fn dims(n: usize, d: usize, n_s: usize, kind: ConstraintKind) -> Result<(usize, usize)> {
    let dn = d * n;
    if n == 0 || d == 0 || n_s == 0 || n_s > dn {
        return Err(Error::RankOutOfRange { n_s, max: dn });
    }
    let full = (2 * dn - n_s + 1) * n_s / 2;
    let c = kind.constrained_dim(n, d);
    let helpers = c * (c + 1) / 2 - 1;
    Ok((full, full.saturating_sub(helpers)))
}

/// Number of helper constraints, `c(c+1)/2 − 1` with `c` the constrained
/// dimension.
pub fn helper_count(n: usize, d: usize, kind: ConstraintKind) -> usize {
    let c = kind.constrained_dim(n, d);
    c * (c + 1) / 2 - 1
}

/// Lower-diagonal `Dn×N_s` Kraus matrix stored as its stencil entries in
/// row-major order: for each row `i`, the columns `0..=min(i, N_s − 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LowerDiagB<T> {
    n: usize,
    d: usize,
    n_s: usize,
    entries: Vec<T>,
}

impl<T: Scalar> LowerDiagB<T> {
    pub fn zeros(n: usize, d: usize, n_s: usize) -> Result<Self> {
        let (full, _) = dims(n, d, n_s, ConstraintKind::TracePreserving)?;
        Ok(Self {
            n,
            d,
            n_s,
            entries: vec![T::zero(); full],
        })
    }

    pub fn from_packed(n: usize, d: usize, n_s: usize, entries: Vec<T>) -> Result<Self> {
        let (full, _) = dims(n, d, n_s, ConstraintKind::TracePreserving)?;
        if entries.len() != full {
            return Err(dim_mismatch(full, entries.len()));
        }
        Ok(Self { n, d, n_s, entries })
    }

    /// Packs a `Dn×N_s` matrix; any non-zero above the diagonal is an error.
    pub fn pack(n: usize, d: usize, b: &Matrix<T>) -> Result<Self> {
        let n_s = b.cols();
        if b.rows() != d * n {
            return Err(dim_mismatch(d * n, b.rows()));
        }
        let mut out = Self::zeros(n, d, n_s)?;
        let mut p = 0;
        for i in 0..d * n {
            for s in 0..n_s {
                if s <= i {
                    out.entries[p] = b[(i, s)];
                    p += 1;
                } else if b[(i, s)] != T::zero() {
                    return Err(Error::InvalidInput(format!(
                        "entry ({i}, {s}) lies above the diagonal but is non-zero"
                    )));
                }
            }
        }
        Ok(out)
    }

    pub fn unpack(&self) -> Matrix<T> {
        let mut b = Matrix::zeros(self.d * self.n, self.n_s);
        let mut p = 0;
        for i in 0..self.d * self.n {
            for s in 0..self.active(i) {
                b[(i, s)] = self.entries[p];
                p += 1;
            }
        }
        b
    }

    /// Columns stored for row `i`.
    #[inline]
    pub fn active(&self, i: usize) -> usize {
        (i + 1).min(self.n_s)
    }

    /// Packed position of `(i, s)`, if on the stencil.
    pub fn index(&self, i: usize, s: usize) -> Option<usize> {
        if s > i || s >= self.n_s || i >= self.d * self.n {
            return None;
        }
        // rows before i: those with i' < n_s contribute i' + 1, the rest n_s
        let full_rows = i.min(self.n_s);
        let before = full_rows * (full_rows + 1) / 2 + (i - full_rows) * self.n_s;
        Some(before + s)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n_s(&self) -> usize {
        self.n_s
    }

    pub fn entries(&self) -> &[T] {
        &self.entries
    }

    pub fn entries_mut(&mut self) -> &mut [T] {
        &mut self.entries
    }

    /// `|B|²`.
    pub fn norm_sq(&self) -> T {
        self.entries.iter().map(|&v| v * v).sum()
    }

    pub fn to_kraus(&self) -> KrausSet<T> {
        KrausSet::from_columns(self.d, self.n, &self.unpack()).expect("stencil dims are consistent")
    }
}

/// Which eigenvector of the reduced problem the step takes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EigPick {
    MaxEigenvalue,
    /// The eigenvector `k` places below the top.
    IndexOffset(usize),
}

/// Starting point of the first run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LowRankInit {
    /// Top `N_s` eigenvectors of `S`, restored to the constraints; falls back
    /// to `Random` when their Gram matrix is singular.
    Spectral,
    /// Seeded uniform lower-diagonal `B`, restored to the constraints.
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowRankConfig {
    pub max_iter: usize,
    /// Relative fidelity change regarded as converged.
    pub fidelity_tol: f64,
    pub eig_pick: EigPick,
    pub init: LowRankInit,
    pub seed: u64,
    /// Stagnant iterations before a one-step switch to `IndexOffset(1)`.
    pub escape_after: usize,
    pub escape_retries: usize,
    /// Runs in total: the first from `init`, the others from random
    /// starts. The best result is returned.
    pub starts: usize,
    pub trace: bool,
}

impl Default for LowRankConfig {
    fn default() -> Self {
        Self {
            max_iter: 500,
            fidelity_tol: 1e-10,
            eig_pick: EigPick::MaxEigenvalue,
            init: LowRankInit::Spectral,
            seed: 0,
            escape_after: 25,
            escape_retries: 3,
            starts: 1,
            trace: false,
        }
    }
}

/// Current iterate, multipliers, and its fidelity.
#[derive(Debug, Clone, PartialEq)]
pub struct IterState<T> {
    pub b: LowerDiagB<T>,
    /// `n×n` for TP, `D×D` for unit.
    pub lambda: SymMatrix<T>,
    pub fidelity: T,
    pub iteration: usize,
}

impl<T: Scalar> IterState<T> {
    pub fn new(b: LowerDiagB<T>, kind: ConstraintKind) -> Self {
        let c = kind.constrained_dim(b.n(), b.d());
        Self {
            b,
            lambda: SymMatrix::zeros(c),
            fidelity: T::zero(),
            iteration: 0,
        }
    }
}
