//! Semidefinite program `max Tr(J S)` subject to `Tr(J A_c) = β_c`, `J ⪰ 0`,
//! with a primal-dual interior-point solver.
//!
//! Internally the problem is posed in the standard form
//! `min C•X  s.t.  A(X) = b, X ⪰ 0` with `C = −S/‖S‖_F` and every constraint
//! row scaled to unit Frobenius norm. The dual
//! `max bᵀy  s.t.  A*(y) + Z = C, Z ⪰ 0` is carried along, and reported
//! multipliers are mapped back so that `Σ_c y_c A_c − S = slack ⪰ 0`.

mod interchange;
mod solver;
mod verify;

pub use interchange::{export_interchange, import_interchange, write_interchange};
pub use solver::{solve, solve_from, write_trace_csv, IterationRecord};
pub use verify::{lp_limit_diagnostic, verify, LpDiagnostic, VerifyReport};

use crate::channel::{ChoiMatrix, ConstraintKind};
use crate::error::{dim_mismatch, Error, Result};
use crate::fidelity::{DenominatorTensor, FidelityTensor};
use crate::linalg::{sym_eig, SymMatrix};
use crate::scalar::Scalar;

/// `Tr(J a) = beta`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraint<T> {
    pub a: SymMatrix<T>,
    pub beta: T,
}

impl<T: Scalar> LinearConstraint<T> {
    pub fn new(a: SymMatrix<T>, beta: T) -> Self {
        Self { a, beta }
    }

    /// `Tr(J a) − beta`.
    pub fn residual(&self, j: &SymMatrix<T>) -> T {
        j.frobenius_dot(&self.a) - self.beta
    }
}

/// Symmetric sparse view of a constraint matrix with both triangles listed.
pub(crate) type SparseSym<T> = Vec<(usize, usize, T)>;

pub(crate) fn sparse_of<T: Scalar>(a: &SymMatrix<T>) -> SparseSym<T> {
    let n = a.dim();
    let mut out = Vec::new();
    for i in 0..n {
        for (j, &v) in a.as_matrix().row(i).iter().enumerate() {
            if v != T::zero() {
                out.push((i, j, v));
            }
        }
    }
    out
}

/// Objective tensor plus linear equality constraints.
#[derive(Debug, Clone, PartialEq)]
pub struct SdpProblem<T> {
    s: FidelityTensor<T>,
    constraints: Vec<LinearConstraint<T>>,
    sparse: Vec<SparseSym<T>>,
}

/// Threshold on the smallest eigenvalue of the normalized constraint Gram.
pub const INDEPENDENCE_TOL: f64 = 1e-10;

impl<T: Scalar> SdpProblem<T> {
    /// Validates dimensions and linear independence of the constraints.
    pub fn new(s: FidelityTensor<T>, constraints: Vec<LinearConstraint<T>>) -> Result<Self> {
        let dim = s.dim();
        for (c, lc) in constraints.iter().enumerate() {
            if lc.a.dim() != dim {
                return Err(dim_mismatch(dim, format!("constraint {c} of dim {}", lc.a.dim())));
            }
            if !lc.beta.is_finite() || !lc.a.as_matrix().is_finite() {
                return Err(Error::InvalidInput(format!("constraint {c} has non-finite entries")));
            }
        }
        check_independence(&constraints)?;
        let sparse = constraints.iter().map(|c| sparse_of(&c.a)).collect();
        Ok(Self {
            s,
            constraints,
            sparse,
        })
    }

    /// Partial-trace constraints of the given kind.
    pub fn with_kind(s: FidelityTensor<T>, kind: ConstraintKind) -> Result<Self> {
        let cons = build_constraints(s.n(), s.d(), kind);
        Self::new(s, cons)
    }

    pub fn objective(&self) -> &FidelityTensor<T> {
        &self.s
    }

    pub fn constraints(&self) -> &[LinearConstraint<T>] {
        &self.constraints
    }

    pub fn dim(&self) -> usize {
        self.s.dim()
    }

    pub fn n(&self) -> usize {
        self.s.n()
    }

    pub fn d(&self) -> usize {
        self.s.d()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub(crate) fn sparse(&self) -> &[SparseSym<T>] {
        &self.sparse
    }

    /// `Tr(J S)`.
    pub fn objective_value(&self, j: &SymMatrix<T>) -> T {
        j.frobenius_dot(self.s.matrix())
    }

    /// Largest `|Tr(J A_c) − β_c|`.
    pub fn max_primal_residual(&self, j: &SymMatrix<T>) -> T {
        self.constraints
            .iter()
            .map(|c| c.residual(j).abs())
            .fold(T::zero(), T::max)
    }
}

fn check_independence<T: Scalar>(cons: &[LinearConstraint<T>]) -> Result<()> {
    let m = cons.len();
    if m == 0 {
        return Ok(());
    }
    let norms: Vec<T> = cons.iter().map(|c| c.a.frobenius_norm()).collect();
    if let Some(c) = norms.iter().position(|&v| v == T::zero()) {
        return Err(Error::DependentConstraints(format!("constraint {c} has a zero matrix")));
    }
    let gram = SymMatrix::from_fn(m, |i, j| cons[i].a.frobenius_dot(&cons[j].a) / (norms[i] * norms[j]));
    for i in 0..m {
        for j in (i + 1)..m {
            if (gram.get(i, j).abs() - T::one()).abs() < T::of(INDEPENDENCE_TOL) {
                return Err(Error::DependentConstraints(format!(
                    "constraints {i} and {j} are duplicates up to scale"
                )));
            }
        }
    }
    let min_eig = sym_eig(&gram)?.min_value();
    if min_eig < T::of(INDEPENDENCE_TOL) {
        return Err(Error::DependentConstraints(format!(
            "constraint Gram matrix has eigenvalue {:e}", min_eig.as_f64()
        )));
    }
    Ok(())
}

/// Solver tolerances and limits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub tol_gap: f64,
    pub tol_feas: f64,
    pub max_iter: usize,
    pub step_fraction: f64,
    /// Keep per-iteration records in the solution.
    pub trace: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol_gap: 1e-8,
            tol_feas: 1e-9,
            max_iter: 200,
            step_fraction: 0.98,
            trace: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.tol_gap > 0.0
            && self.tol_feas > 0.0
            && self.max_iter > 0
            && self.step_fraction > 0.0
            && self.step_fraction < 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("invalid solver config {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SdpStatus {
    Optimal,
    MaxIterations,
    NumericalFailure,
    /// Primal or dual infeasibility detected; an unbounded objective is
    /// reported here as dual infeasibility.
    Infeasible,
}

impl SdpStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SdpStatus::Optimal => "optimal",
            SdpStatus::MaxIterations => "max_iterations",
            SdpStatus::NumericalFailure => "numerical_failure",
            SdpStatus::Infeasible => "infeasible",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpSolution<T> {
    pub j: ChoiMatrix<T>,
    pub dual_y: Vec<T>,
    /// `Σ_c y_c A_c − S`.
    pub dual_slack: SymMatrix<T>,
    /// `Tr(J S)`.
    pub objective: T,
    /// `Tr(J · dual_slack)`.
    pub gap: T,
    pub status: SdpStatus,
    pub iterations: usize,
    pub trace: Vec<IterationRecord>,
}

impl<T: Scalar> SdpSolution<T> {
    pub fn is_optimal(&self) -> bool {
        self.status == SdpStatus::Optimal
    }

    /// `bᵀy`, the dual objective in original units.
    pub fn dual_objective(&self, p: &SdpProblem<T>) -> T {
        p.constraints()
            .iter()
            .zip(&self.dual_y)
            .map(|(c, &y)| c.beta * y)
            .sum()
    }
}

/// Partial-trace constraints: TP gives one constraint per unordered `(k, k')`
/// on `Σ_j J_{jk;jk'} = δ_{kk'}`, unit gives one per `(j, j')` on
/// `Σ_k J_{jk;j'k} = δ_{jj'}`. Off-diagonal pairs carry weight ½ in both
/// mirrored slots.
pub fn build_constraints<T: Scalar>(n: usize, d: usize, kind: ConstraintKind) -> Vec<LinearConstraint<T>> {
    let dim = n * d;
    let half = T::of(0.5);
    let mut out = Vec::new();
    match kind {
        ConstraintKind::TracePreserving => {
            for k in 0..n {
                for kp in k..n {
                    let mut a = SymMatrix::zeros(dim);
                    for j in 0..d {
                        let (r, c) = (j * n + k, j * n + kp);
                        a.set(r, c, if k == kp { T::one() } else { half });
                    }
                    out.push(LinearConstraint::new(a, if k == kp { T::one() } else { T::zero() }));
                }
            }
        }
        ConstraintKind::UnitPreserving => {
            for j in 0..d {
                for jp in j..d {
                    out.push(LinearConstraint::new(
                        unit_gram_entry(n, d, j, jp),
                        if j == jp { T::one() } else { T::zero() },
                    ));
                }
            }
        }
    }
    out
}

/// Matrix `A` with `Tr(J A) = G_{jj'} = Σ_k J_{jk;j'k}` (symmetrized).
fn unit_gram_entry<T: Scalar>(n: usize, d: usize, j: usize, jp: usize) -> SymMatrix<T> {
    let mut a = SymMatrix::zeros(n * d);
    let w = if j == jp { T::one() } else { T::of(0.5) };
    for k in 0..n {
        a.set(j * n + k, jp * n + k, w);
    }
    a
}

/// Constraints for ratio-fidelity (projective) learning: off-diagonal output
/// Gram entries vanish, successive diagonal entries are equal, and
/// `Tr(J Q) = norm_const`.
pub fn build_projective_constraints<T: Scalar>(
    n: usize,
    d: usize,
    q: &DenominatorTensor<T>,
    norm_const: T,
) -> Result<Vec<LinearConstraint<T>>> {
    if (q.n(), q.d()) != (n, d) {
        return Err(dim_mismatch(format!("Q with n={n}, D={d}"), format!("n={}, D={}", q.n(), q.d())));
    }
    let mut out = Vec::new();
    for j in 0..d {
        for jp in (j + 1)..d {
            out.push(LinearConstraint::new(unit_gram_entry(n, d, j, jp), T::zero()));
        }
    }
    for j in 1..d {
        let a = unit_gram_entry(n, d, j, j).sub(&unit_gram_entry(n, d, j - 1, j - 1));
        out.push(LinearConstraint::new(a, T::zero()));
    }
    out.push(LinearConstraint::new(q.matrix(), norm_const));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{adjust_tp, kraus_to_choi, KrausSet};
    use crate::linalg::Matrix;

    #[test]
    fn constraint_counts() {
        assert_eq!(build_constraints::<f64>(2, 2, ConstraintKind::TracePreserving).len(), 3);
        assert_eq!(build_constraints::<f64>(3, 5, ConstraintKind::TracePreserving).len(), 6);
        assert_eq!(build_constraints::<f64>(3, 5, ConstraintKind::UnitPreserving).len(), 15);
        let one = build_constraints::<f64>(1, 1, ConstraintKind::TracePreserving);
        assert_eq!(one.len(), 1);
        assert_eq!(one[0].a.get(0, 0), 1.0);
        assert_eq!(one[0].beta, 1.0);
    }

    #[test]
    fn tp_channel_satisfies_constraints() {
        let b = Matrix::from_fn(3, 2, |j, k| ((j * 2 + k) as f64 * 0.7).cos());
        let c = Matrix::from_fn(3, 2, |j, k| ((j + 3 * k) as f64 * 0.4).sin());
        let ch = adjust_tp(&KrausSet::new(vec![b, c]).unwrap()).unwrap();
        let j = kraus_to_choi(&ch);
        for c in build_constraints(2, 3, ConstraintKind::TracePreserving) {
            assert!(c.residual(j.matrix()).abs() < 1e-12);
        }
    }

    #[test]
    fn duplicate_constraints_rejected() {
        let s = FidelityTensor::new(1, 2, SymMatrix::<f64>::identity(2)).unwrap();
        let a = SymMatrix::identity(2);
        let cons = vec![LinearConstraint::new(a.clone(), 1.0), LinearConstraint::new(a.scale(2.0), 2.0)];
        assert!(matches!(SdpProblem::new(s, cons), Err(Error::DependentConstraints(_))));
    }

    #[test]
    fn projective_counts_and_feasibility() {
        let q = DenominatorTensor::new(1, SymMatrix::<f64>::identity(3)).unwrap();
        let cons = build_projective_constraints(3, 1, &q, 3.0).unwrap();
        assert_eq!(cons.len(), 1);

        let q = DenominatorTensor::new(2, SymMatrix::<f64>::identity(2)).unwrap();
        let cons = build_projective_constraints(2, 2, &q, 2.0).unwrap();
        assert_eq!(cons.len(), 3);
        // a rotation has P Pᵀ = I, so the homogeneous constraints hold
        let (s, c) = 0.4f64.sin_cos();
        let p = Matrix::from_vec(2, 2, vec![c, -s, s, c]).unwrap();
        let j = kraus_to_choi(&KrausSet::single(p).unwrap());
        for con in &cons {
            assert!(con.residual(j.matrix()).abs() < 1e-12);
        }
    }
}
