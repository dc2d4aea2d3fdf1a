//! Independent certification of solutions and the PSD-free (linear) limit
//! diagnostic.

use super::{SdpProblem, SdpSolution};
use crate::error::Result;
use crate::linalg::{solve_spd, sym_eig, Matrix, SymMatrix};
use crate::scalar::Scalar;

/// Residuals recomputed from the problem data and `(J, y)` alone.
#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    /// `max_c |Tr(J A_c) − β_c|`.
    pub max_primal_residual: f64,
    /// Same, with each `A_c, β_c` divided by `‖A_c‖_F`.
    pub max_scaled_primal_residual: f64,
    pub min_eig_j: f64,
    /// Smallest eigenvalue of `Σ y_c A_c − S`.
    pub min_eig_slack: f64,
    /// `min_eig_slack / (1 + ‖S‖_F)`.
    pub min_eig_slack_rel: f64,
    pub objective: f64,
    pub dual_objective: f64,
    /// `Tr(J (Σ y_c A_c − S))`.
    pub gap: f64,
    /// `|gap| / (1 + |objective|)`.
    pub rel_gap: f64,
}

impl VerifyReport {
    /// Primal residual (scaled), eigenvalue floors, and relative gap against
    /// one tolerance each.
    pub fn passes(&self, tol_primal: f64, tol_eig: f64, tol_gap: f64) -> bool {
        self.max_scaled_primal_residual <= tol_primal
            && self.min_eig_j >= -tol_eig
            && self.min_eig_slack_rel >= -tol_eig
            && self.rel_gap <= tol_gap
    }
}

pub fn verify<T: Scalar>(p: &SdpProblem<T>, sol: &SdpSolution<T>) -> Result<VerifyReport> {
    let j = sol.j.matrix();
    let mut max_res = 0.0f64;
    let mut max_scaled = 0.0f64;
    for c in p.constraints() {
        let r = c.residual(j).abs().as_f64();
        max_res = max_res.max(r);
        max_scaled = max_scaled.max(r / c.a.frobenius_norm().as_f64());
    }
    let mut slack = p.objective().matrix().scale(-T::one()).into_matrix();
    for (c, &y) in p.constraints().iter().zip(&sol.dual_y) {
        slack.axpy(y, c.a.as_matrix());
    }
    let slack = SymMatrix::from_matrix(&slack)?;
    let min_eig_j = sym_eig(j)?.min_value().as_f64();
    let min_eig_slack = sym_eig(&slack)?.min_value().as_f64();
    let s_norm = p.objective().matrix().frobenius_norm().as_f64();
    let objective = p.objective_value(j).as_f64();
    let dual_objective: f64 = p
        .constraints()
        .iter()
        .zip(&sol.dual_y)
        .map(|(c, &y)| c.beta.as_f64() * y.as_f64())
        .sum();
    let gap = j.frobenius_dot(&slack).as_f64();
    Ok(VerifyReport {
        max_primal_residual: max_res,
        max_scaled_primal_residual: max_scaled,
        min_eig_j,
        min_eig_slack,
        min_eig_slack_rel: min_eig_slack / (1.0 + s_norm),
        objective,
        dual_objective,
        gap,
        rel_gap: gap.abs() / (1.0 + objective.abs()),
    })
}

/// Result of maximizing `Tr(J S)` over the affine constraint set alone,
/// restricted to a ball around the minimum-norm feasible point.
#[derive(Debug, Clone, PartialEq)]
pub struct LpDiagnostic<T> {
    pub j: SymMatrix<T>,
    pub objective: T,
    pub min_eig: T,
    pub max_eig: T,
    /// Both signs present beyond `1e-9·max|λ|`.
    pub mixed_signs: bool,
    /// `S` has no component outside the constraint span, so the linear
    /// objective is constant on the feasible set.
    pub objective_constant: bool,
}

/// Drops `J ⪰ 0` and maximizes the linear objective over
/// `{J : Tr(J A_c) = β_c, ‖J − J_p‖_F ≤ radius}`, `J_p` the minimum-norm
/// feasible point. Without the cone constraint the optimum moves along the
/// component of `S` orthogonal to the constraint span, and for generic `S`
/// the resulting `J` is indefinite.
pub fn lp_limit_diagnostic<T: Scalar>(p: &SdpProblem<T>, radius: T) -> Result<LpDiagnostic<T>> {
    let dim = p.dim();
    let cons = p.constraints();
    let m = cons.len();
    let s = p.objective().matrix();
    let (jp, s_null) = if m == 0 {
        (SymMatrix::zeros(dim), s.clone())
    } else {
        let gram = SymMatrix::from_fn(m, |a, b| cons[a].a.frobenius_dot(&cons[b].a));
        let beta = Matrix::column(&cons.iter().map(|c| c.beta).collect::<Vec<_>>());
        let proj = Matrix::column(&cons.iter().map(|c| c.a.frobenius_dot(s)).collect::<Vec<_>>());
        let u = solve_spd(&gram, &beta)?.col(0);
        let v = solve_spd(&gram, &proj)?.col(0);
        let mut jp = SymMatrix::zeros(dim);
        let mut s_null = s.clone();
        for (c, (&uc, &vc)) in cons.iter().zip(u.iter().zip(&v)) {
            jp.axpy(uc, &c.a);
            s_null.axpy(-vc, &c.a);
        }
        (jp, s_null)
    };
    let nrm = s_null.frobenius_norm();
    let objective_constant = !(nrm > T::of(1e-12) * (T::one() + s.frobenius_norm()));
    let mut j = jp;
    if !objective_constant {
        j.axpy(radius / nrm, &s_null);
    }
    let eig = sym_eig(&j)?;
    let (min_eig, max_eig) = (eig.min_value(), eig.max_value());
    let thr = T::of(1e-9) * min_eig.abs().max(max_eig.abs());
    Ok(LpDiagnostic {
        objective: p.objective_value(&j),
        j,
        min_eig,
        max_eig,
        mixed_signs: min_eig < -thr && max_eig > thr,
        objective_constant,
    })
}
