use crate::channel::{ChoiMatrix, ConstraintKind, DensityMatrix, KrausSet};
use crate::error::{dim_mismatch, Error, Result};
use crate::linalg::{sym_eig, Matrix, SymMatrix};
use crate::scalar::Scalar;

/// Solver outputs are PSD only to tolerance; eigenvalues down to this value
/// are clipped to zero before rank and Kraus extraction.
pub const NEGATIVE_EIG_CLIP: f64 = 1e-8;

/// `ϱ = Σ_s B_s ρ B_sᵀ`.
pub fn apply_kraus<T: Scalar>(ch: &KrausSet<T>, rho: &DensityMatrix<T>) -> Result<DensityMatrix<T>> {
    if rho.dim() != ch.d_in() {
        return Err(dim_mismatch(ch.d_in(), rho.dim()));
    }
    let mut out = SymMatrix::zeros(ch.d_out());
    for b in ch.operators() {
        out.axpy(T::one(), &rho.matrix().congruence_tr(b));
    }
    Ok(DensityMatrix::from_channel_output(out))
}

/// `ϱ_{jj'} = Σ_{k,k'} J_{jk;j'k'} ρ_{kk'}`.
pub fn apply_choi<T: Scalar>(choi: &ChoiMatrix<T>, rho: &DensityMatrix<T>) -> Result<DensityMatrix<T>> {
    let (d, n) = (choi.d_out(), choi.d_in());
    if rho.dim() != n {
        return Err(dim_mismatch(n, rho.dim()));
    }
    let r = rho.matrix();
    let out = SymMatrix::from_fn(d, |j, jp| {
        let mut acc = T::zero();
        for k in 0..n {
            for kp in 0..n {
                acc += choi.at(j, k, jp, kp) * r.get(k, kp);
            }
        }
        acc
    });
    Ok(DensityMatrix::from_channel_output(out))
}

/// `J = B Bᵀ` with `B` the column layout of the Kraus set.
pub fn kraus_to_choi<T: Scalar>(ch: &KrausSet<T>) -> ChoiMatrix<T> {
    let b = ch.to_columns();
    let j = SymMatrix::from_symmetric_unchecked(b.matmul_tr(&b).symmetrized());
    ChoiMatrix::new(ch.d_out(), ch.d_in(), j).expect("dimensions consistent by construction")
}

/// Kraus set from the eigendecomposition `J = Σ λ_s v_s v_sᵀ`,
/// `B_s = √λ_s · unvec(v_s)`.
///
/// Eigenvalues at or below `rank_tol · λ_max` are dropped. Operators come
/// out in descending eigenvalue order, each with its largest-magnitude
/// entry positive.
pub fn choi_to_kraus<T: Scalar>(choi: &ChoiMatrix<T>, rank_tol: T) -> Result<KrausSet<T>> {
    let eig = sym_eig(choi.matrix())?;
    let max = eig.max_value();
    let neg_floor = T::of(NEGATIVE_EIG_CLIP).max(rank_tol) * max.abs().max(T::one());
    if eig.min_value() < -neg_floor {
        return Err(Error::NotPsd {
            min_eig: eig.min_value().as_f64(),
        });
    }
    if max <= T::zero() {
        return Err(Error::InvalidInput("Choi matrix is zero".into()));
    }
    let (d, n) = (choi.d_out(), choi.d_in());
    let mut ops = Vec::new();
    for idx in (0..eig.dim()).rev() {
        let lam = eig.values[idx];
        if lam <= rank_tol * max {
            break;
        }
        let mut v = eig.vector(idx);
        canonical_sign(&mut v);
        let w = lam.sqrt();
        ops.push(Matrix::from_fn(d, n, |j, k| w * v[j * n + k]));
    }
    KrausSet::new(ops)
}

/// Flips `v` so its largest-magnitude entry is positive.
pub(crate) fn canonical_sign<T: Scalar>(v: &mut [T]) {
    let mut best = T::zero();
    for &x in v.iter() {
        if x.abs() > best.abs() {
            best = x;
        }
    }
    if best < T::zero() {
        for x in v.iter_mut() {
            *x = -*x;
        }
    }
}

/// Partial trace pinned by `kind`: `Σ_j J_{jk;jk'}` (TP, `n×n`) or
/// `Σ_k J_{jk;j'k}` (unit, `D×D`).
pub fn partial_trace<T: Scalar>(choi: &ChoiMatrix<T>, kind: ConstraintKind) -> SymMatrix<T> {
    let (d, n) = (choi.d_out(), choi.d_in());
    match kind {
        ConstraintKind::TracePreserving => SymMatrix::from_fn(n, |k, kp| {
            (0..d).map(|j| choi.at(j, k, j, kp)).sum()
        }),
        ConstraintKind::UnitPreserving => SymMatrix::from_fn(d, |j, jp| {
            (0..n).map(|k| choi.at(j, k, jp, k)).sum()
        }),
    }
}

/// Max-abs deviation of the pinned partial trace from the identity.
pub fn constraint_residual<T: Scalar>(choi: &ChoiMatrix<T>, kind: ConstraintKind) -> T {
    let g = partial_trace(choi, kind);
    let mut worst = T::zero();
    for a in 0..g.dim() {
        for b in 0..g.dim() {
            let target = if a == b { T::one() } else { T::zero() };
            worst = worst.max((g.get(a, b) - target).abs());
        }
    }
    worst
}

/// Thresholds of the numerical-rank rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankRule {
    /// Eigenvalues below this absolute value end the count.
    pub abs_cut: f64,
    /// A drop `previous/current` above this ratio ends the count.
    pub ratio_cut: f64,
}

impl Default for RankRule {
    fn default() -> Self {
        Self {
            abs_cut: 1e-5,
            ratio_cut: 1e4,
        }
    }
}

/// Numerical rank with the default [`RankRule`].
pub fn numerical_rank<T: Scalar>(values: &[T]) -> usize {
    numerical_rank_with(values, RankRule::default())
}

/// Scans eigenvalues from the largest down and counts until one falls below
/// `abs_cut` or the ratio to the previous one exceeds `ratio_cut`.
/// Negative values are clipped to zero.
pub fn numerical_rank_with<T: Scalar>(values: &[T], rule: RankRule) -> usize {
    let mut sorted: Vec<f64> = values.iter().map(|v| v.as_f64().max(0.0)).collect();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    let mut rank = 0;
    let mut prev: Option<f64> = None;
    for v in sorted {
        if v < rule.abs_cut {
            break;
        }
        if let Some(p) = prev {
            if p > rule.ratio_cut * v {
                break;
            }
        }
        rank += 1;
        prev = Some(v);
    }
    rank
}

/// Exchanges the roles of input and output: `J'_{kj;k'j'} = J_{jk;j'k'}`.
pub fn swap_io<T: Scalar>(choi: &ChoiMatrix<T>) -> ChoiMatrix<T> {
    let (d, n) = (choi.d_out(), choi.d_in());
    let dim = d * n;
    let mut m = Matrix::zeros(dim, dim);
    for j in 0..d {
        for k in 0..n {
            for jp in 0..d {
                for kp in 0..n {
                    m[(k * d + j, kp * d + jp)] = choi.at(j, k, jp, kp);
                }
            }
        }
    }
    ChoiMatrix::new(n, d, SymMatrix::from_symmetric_unchecked(m)).expect("swapped dims consistent")
}
