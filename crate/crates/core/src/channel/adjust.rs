//! `G^{-1/2}` adjustments that restore the partial-trace constraints with
//! minimal disturbance.

use crate::channel::ops::partial_trace;
use crate::channel::{ChoiMatrix, ConstraintKind, KrausSet};
use crate::error::Result;
use crate::linalg::{inv_sqrt_psd, Matrix, SymMatrix, DEFAULT_RANK_TOL};
use crate::scalar::Scalar;

/// Gram matrix of the constraint: `Σ_s B_sᵀ B_s` (TP, `n×n`) or
/// `Σ_s B_s B_sᵀ` (unit, `D×D`).
pub fn kraus_gram<T: Scalar>(ch: &KrausSet<T>, kind: ConstraintKind) -> SymMatrix<T> {
    let dim = kind.constrained_dim(ch.d_in(), ch.d_out());
    let mut g = Matrix::zeros(dim, dim);
    for b in ch.operators() {
        let term = match kind {
            ConstraintKind::TracePreserving => b.tr_matmul(b),
            ConstraintKind::UnitPreserving => b.matmul_tr(b),
        };
        g.axpy(T::one(), &term);
    }
    SymMatrix::from_symmetric_unchecked(g.symmetrized())
}

/// `B̃_s = B_s G^{-1/2}` with `G = Σ_s B_sᵀ B_s`.
pub fn adjust_tp<T: Scalar>(ch: &KrausSet<T>) -> Result<KrausSet<T>> {
    adjust_kraus(ch, ConstraintKind::TracePreserving)
}

/// `B̃_s = G^{-1/2} B_s` with `G = Σ_s B_s B_sᵀ`.
pub fn adjust_unit<T: Scalar>(ch: &KrausSet<T>) -> Result<KrausSet<T>> {
    adjust_kraus(ch, ConstraintKind::UnitPreserving)
}

/// Extra `G^{-1/2}` passes applied while the residual `max |G − I|` stays
/// above a few ulps. With an ill-conditioned `G` one pass leaves an error of
/// order `κ(G)·ε`; the second pass sees `G ≈ I` and is exact to rounding.
const REFINE_PASSES: usize = 3;

fn refined_enough<T: Scalar>(g: &SymMatrix<T>) -> bool {
    let tol = T::of(16.0 * g.dim().max(1) as f64) * T::epsilon();
    g.max_abs_diff(&SymMatrix::identity(g.dim())) <= tol
}

pub fn adjust_kraus<T: Scalar>(ch: &KrausSet<T>, kind: ConstraintKind) -> Result<KrausSet<T>> {
    let mut out = adjust_kraus_once(ch, kind)?;
    for _ in 1..REFINE_PASSES {
        if refined_enough(&kraus_gram(&out, kind)) {
            break;
        }
        out = adjust_kraus_once(&out, kind)?;
    }
    Ok(out)
}

fn adjust_kraus_once<T: Scalar>(ch: &KrausSet<T>, kind: ConstraintKind) -> Result<KrausSet<T>> {
    let g = kraus_gram(ch, kind);
    let w = inv_sqrt_psd(&g, T::of(DEFAULT_RANK_TOL))?;
    let w = w.as_matrix();
    let ops = ch
        .operators()
        .iter()
        .map(|b| match kind {
            ConstraintKind::TracePreserving => b.matmul(w),
            ConstraintKind::UnitPreserving => w.matmul(b),
        })
        .collect();
    KrausSet::new(ops)
}

/// Sandwiches `J` with `G^{-1/2}` on the index pair the constraint acts on,
/// `G` being the corresponding partial trace of `J`.
pub fn adjust_choi<T: Scalar>(choi: &ChoiMatrix<T>, kind: ConstraintKind) -> Result<ChoiMatrix<T>> {
    let mut out = adjust_choi_once(choi, kind)?;
    for _ in 1..REFINE_PASSES {
        if refined_enough(&partial_trace(&out, kind)) {
            break;
        }
        out = adjust_choi_once(&out, kind)?;
    }
    Ok(out)
}

fn adjust_choi_once<T: Scalar>(choi: &ChoiMatrix<T>, kind: ConstraintKind) -> Result<ChoiMatrix<T>> {
    let g = partial_trace(choi, kind);
    let w = inv_sqrt_psd(&g, T::of(DEFAULT_RANK_TOL))?;
    let (d, n) = (choi.d_out(), choi.d_in());
    let dim = d * n;
    // block transform acting as (I_D ⊗ W) or (W ⊗ I_n)
    let mut t = Matrix::zeros(dim, dim);
    match kind {
        ConstraintKind::TracePreserving => {
            for j in 0..d {
                for k in 0..n {
                    for kp in 0..n {
                        t[(j * n + k, j * n + kp)] = w.get(k, kp);
                    }
                }
            }
        }
        ConstraintKind::UnitPreserving => {
            for j in 0..d {
                for jp in 0..d {
                    for k in 0..n {
                        t[(j * n + k, jp * n + k)] = w.get(j, jp);
                    }
                }
            }
        }
    }
    ChoiMatrix::new(d, n, choi.matrix().congruence_tr(&t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{constraint_residual, kraus_to_choi};
    use crate::error::Error;

    fn rotation(theta: f64) -> Matrix<f64> {
        let (s, c) = theta.sin_cos();
        Matrix::from_vec(2, 2, vec![c, -s, s, c]).unwrap()
    }

    #[test]
    fn tp_channel_unchanged() {
        let ch = KrausSet::single(rotation(0.3)).unwrap();
        let adj = adjust_tp(&ch).unwrap();
        assert!(adj.operators()[0].max_abs_diff(&ch.operators()[0]) < 1e-12);
        let adj = adjust_unit(&ch).unwrap();
        assert!(adj.operators()[0].max_abs_diff(&ch.operators()[0]) < 1e-12);
    }

    #[test]
    fn scaled_channel_restored() {
        let ch = KrausSet::single(rotation(1.1)).unwrap();
        for kind in [ConstraintKind::TracePreserving, ConstraintKind::UnitPreserving] {
            let adj = adjust_kraus(&ch.scale(2.0), kind).unwrap();
            assert!(adj.operators()[0].max_abs_diff(&ch.operators()[0]) < 1e-12);
        }
    }

    #[test]
    fn isometry_with_d_less_than_n_is_singular_for_tp() {
        let b = Matrix::from_vec(1, 2, vec![1.0, 0.0]).unwrap();
        let ch = KrausSet::single(b).unwrap();
        assert!(matches!(adjust_tp(&ch), Err(Error::SingularGram { .. })));
        assert!(adjust_unit(&ch).is_ok());
    }

    #[test]
    fn choi_adjust_matches_known_cases() {
        let j = kraus_to_choi(&KrausSet::single(rotation(0.7)).unwrap());
        let adj = adjust_choi(&j, ConstraintKind::TracePreserving).unwrap();
        assert!(adj.matrix().max_abs_diff(j.matrix()) < 1e-12);
        let adj = adjust_choi(&j.scale(3.0), ConstraintKind::UnitPreserving).unwrap();
        assert!(adj.matrix().max_abs_diff(j.matrix()) < 1e-12);
        assert!(constraint_residual(&adj, ConstraintKind::UnitPreserving) < 1e-12);
    }
}
