//! Infeasible-start primal-dual path following with Nesterov–Todd scaling and
//! Mehrotra predictor-corrector steps.

use std::io::Write;

use log::debug;

use super::{SdpProblem, SdpSolution, SdpStatus, SolverConfig, SparseSym};
use crate::channel::ChoiMatrix;
use crate::error::{Error, Result};
use crate::linalg::{cholesky, solve_lower, solve_lower_tr, sym_eig, Matrix, SymMatrix};
use crate::scalar::Scalar;

/// Iterative-refinement passes on the Schur complement solve.
const SCHUR_REFINE: usize = 2;

/// One row of the solver trace, in scaled units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    /// `X•Z / dim`.
    pub mu: f64,
    /// `X•Z`.
    pub gap: f64,
    pub rel_gap: f64,
    pub primal_infeas: f64,
    pub dual_infeas: f64,
    pub primal_obj: f64,
    pub alpha_primal: f64,
    pub alpha_dual: f64,
    pub sigma: f64,
}

/// Writes the trace as CSV with a header row.
pub fn write_trace_csv<W: Write>(trace: &[IterationRecord], mut w: W) -> std::io::Result<()> {
    writeln!(
        w,
        "iteration,mu,gap,rel_gap,primal_infeas,dual_infeas,primal_obj,alpha_primal,alpha_dual,sigma"
    )?;
    for r in trace {
        writeln!(
            w,
            "{},{:e},{:e},{:e},{:e},{:e},{:e},{},{},{}",
            r.iteration,
            r.mu,
            r.gap,
            r.rel_gap,
            r.primal_infeas,
            r.dual_infeas,
            r.primal_obj,
            r.alpha_primal,
            r.alpha_dual,
            r.sigma
        )?;
    }
    Ok(())
}

/// Solves from the default interior start `c·I`.
pub fn solve<T: Scalar>(p: &SdpProblem<T>, cfg: &SolverConfig) -> Result<SdpSolution<T>> {
    solve_from(p, cfg, None)
}

/// Solves from `j0` when given; `j0` must be positive definite but need not
/// be feasible.
pub fn solve_from<T: Scalar>(
    p: &SdpProblem<T>,
    cfg: &SolverConfig,
    j0: Option<&SymMatrix<T>>,
) -> Result<SdpSolution<T>> {
    cfg.validate()?;
    let scaled = Scaled::new(p);
    let x0 = match j0 {
        Some(j) => {
            if j.dim() != p.dim() {
                return Err(crate::error::dim_mismatch(p.dim(), j.dim()));
            }
            cholesky(j).map_err(|_| Error::InvalidInput("starting point is not positive definite".into()))?;
            j.clone()
        }
        None => SymMatrix::identity(p.dim()).scale(scaled.default_start_scale()),
    };
    let mut ipm = Ipm::new(&scaled, cfg, x0)?;
    let status = ipm.run();
    Ok(scaled.unscale(p, ipm, status))
}

/// Problem data in solver units.
struct Scaled<T> {
    c: SymMatrix<T>,
    a: Vec<SparseSym<T>>,
    b: Vec<T>,
    a_norm: Vec<T>,
    s_scale: T,
    dim: usize,
}

impl<T: Scalar> Scaled<T> {
    fn new(p: &SdpProblem<T>) -> Self {
        let s = p.objective().matrix();
        let s_norm = s.frobenius_norm();
        let s_scale = if s_norm > T::zero() { s_norm } else { T::one() };
        let c = s.scale(-T::one() / s_scale);
        let mut a = Vec::with_capacity(p.num_constraints());
        let mut b = Vec::with_capacity(p.num_constraints());
        let mut a_norm = Vec::with_capacity(p.num_constraints());
        for (con, sp) in p.constraints().iter().zip(p.sparse()) {
            let nrm = con.a.frobenius_norm();
            a.push(sp.iter().map(|&(i, j, v)| (i, j, v / nrm)).collect());
            b.push(con.beta / nrm);
            a_norm.push(nrm);
        }
        Self {
            c,
            a,
            b,
            a_norm,
            s_scale,
            dim: p.dim(),
        }
    }

    /// Least-squares `c` with `A(c·I) ≈ b`; 1 when that is not positive.
    fn default_start_scale(&self) -> T {
        let mut num = T::zero();
        let mut den = T::zero();
        for (a, &b) in self.a.iter().zip(&self.b) {
            let t: T = a.iter().filter(|e| e.0 == e.1).map(|e| e.2).sum();
            num += t * b;
            den += t * t;
        }
        let c = num / den;
        if den > T::zero() && c.is_finite() && c > T::zero() {
            c
        } else {
            T::one()
        }
    }

    fn a_op(&self, x: &Matrix<T>) -> Vec<T> {
        self.a
            .iter()
            .map(|a| a.iter().map(|&(i, j, v)| v * x[(i, j)]).sum())
            .collect()
    }

    fn a_adj(&self, y: &[T]) -> Matrix<T> {
        let mut out = Matrix::zeros(self.dim, self.dim);
        for (a, &yc) in self.a.iter().zip(y) {
            if yc == T::zero() {
                continue;
            }
            for &(i, j, v) in a {
                out[(i, j)] += yc * v;
            }
        }
        out
    }

    /// `M_cd = Tr(A_c W A_d W)`.
    fn schur(&self, w: &Matrix<T>) -> SymMatrix<T> {
        let m = self.a.len();
        let mut out = Matrix::zeros(m, m);
        for c in 0..m {
            for d in c..m {
                let mut acc = T::zero();
                for &(a, b, v) in &self.a[c] {
                    let mut inner = T::zero();
                    for &(e, f, u) in &self.a[d] {
                        inner += u * w[(b, e)] * w[(f, a)];
                    }
                    acc += v * inner;
                }
                out[(c, d)] = acc;
                out[(d, c)] = acc;
            }
        }
        SymMatrix::from_symmetric_unchecked(out)
    }

    fn unscale(&self, p: &SdpProblem<T>, ipm: Ipm<'_, T>, status: SdpStatus) -> SdpSolution<T> {
        let dual_y: Vec<T> = ipm
            .y
            .iter()
            .zip(&self.a_norm)
            .map(|(&y, &a)| -self.s_scale * y / a)
            .collect();
        let mut slack = p.objective().matrix().scale(-T::one()).into_matrix();
        for (con, &y) in p.constraints().iter().zip(&dual_y) {
            slack.axpy(y, con.a.as_matrix());
        }
        let slack = SymMatrix::from_symmetric_unchecked(slack.symmetrized());
        let j = SymMatrix::from_symmetric_unchecked(ipm.x.symmetrized());
        let objective = p.objective_value(&j);
        let gap = j.frobenius_dot(&slack);
        SdpSolution {
            j: ChoiMatrix::new(p.d(), p.n(), j).expect("solver keeps problem dims"),
            dual_y,
            dual_slack: slack,
            objective,
            gap,
            status,
            iterations: ipm.iter,
            trace: ipm.trace,
        }
    }
}

/// Mutable iterate and workspace.
struct Ipm<'a, T> {
    p: &'a Scaled<T>,
    cfg: &'a SolverConfig,
    x: Matrix<T>,
    y: Vec<T>,
    z: Matrix<T>,
    iter: usize,
    trace: Vec<IterationRecord>,
    x0_norm: T,
    /// Iterate with the smallest tolerance-relative merit, kept for runs
    /// that end without meeting the tolerances.
    best: Option<(f64, Matrix<T>, Vec<T>, Matrix<T>)>,
}

/// NT scaling point: `W = R Rᵀ`, with `Rᵀ Z R = R⁻¹ X R⁻ᵀ = Λ`.
struct Nt<T> {
    r: Matrix<T>,
    w: Matrix<T>,
    lam: Vec<T>,
}

struct Direction<T> {
    dx_t: Matrix<T>,
    dz_t: Matrix<T>,
    dy: Vec<T>,
}

fn norm_vec<T: Scalar>(v: &[T]) -> T {
    v.iter().map(|&x| x * x).sum::<T>().sqrt()
}

fn sym<T: Scalar>(m: &Matrix<T>) -> Matrix<T> {
    m.symmetrized()
}

impl<'a, T: Scalar> Ipm<'a, T> {
    fn new(p: &'a Scaled<T>, cfg: &'a SolverConfig, x0: SymMatrix<T>) -> Result<Self> {
        let c_norm = sym_eig(&p.c)?
            .values
            .iter()
            .fold(T::zero(), |m, v| m.max(v.abs()));
        let z = Matrix::identity(p.dim).scale(T::one() + c_norm);
        let x0_norm = x0.frobenius_norm();
        Ok(Self {
            p,
            cfg,
            x: x0.into_matrix(),
            y: vec![T::zero(); p.a.len()],
            z,
            iter: 0,
            trace: Vec::new(),
            x0_norm,
            best: None,
        })
    }

    fn residuals(&self) -> (Vec<T>, Matrix<T>) {
        let ax = self.p.a_op(&self.x);
        let rp: Vec<T> = self.p.b.iter().zip(&ax).map(|(&b, &a)| b - a).collect();
        let mut rd = self.p.c.as_matrix().sub(&self.p.a_adj(&self.y));
        rd.axpy(-T::one(), &self.z);
        (rp, sym(&rd))
    }

    fn run(&mut self) -> SdpStatus {
        let status = self.iterate();
        if matches!(status, SdpStatus::NumericalFailure | SdpStatus::MaxIterations) {
            if let Some((merit, x, y, z)) = self.best.take() {
                debug!("sdp: returning best iterate (merit {merit:e})");
                self.x = x;
                self.y = y;
                self.z = z;
            }
        }
        status
    }

    fn iterate(&mut self) -> SdpStatus {
        let n = self.p.dim;
        let nf = T::of(n as f64);
        let b_norm = norm_vec(&self.p.b);
        let c_norm = self.p.c.frobenius_norm();
        let mut stalled = 0usize;
        let mut last_alpha = (1.0, 1.0, 0.0);
        loop {
            let (rp, rd) = self.residuals();
            let pinf = norm_vec(&rp) / (T::one() + b_norm);
            let dinf = rd.frobenius_norm() / (T::one() + c_norm);
            let xz = self.x.frobenius_dot(&self.z);
            let pobj = self.p.c.as_matrix().frobenius_dot(&self.x);
            // equals Tr(J·slack) / (1 + |Tr(J S)|) in original units
            let rel_gap = xz.abs() / (T::one() / self.p.s_scale + pobj.abs());
            let mu = xz / nf;
            if self.cfg.trace || log::log_enabled!(log::Level::Debug) {
                let rec = IterationRecord {
                    iteration: self.iter,
                    mu: mu.as_f64(),
                    gap: xz.as_f64(),
                    rel_gap: rel_gap.as_f64(),
                    primal_infeas: pinf.as_f64(),
                    dual_infeas: dinf.as_f64(),
                    primal_obj: pobj.as_f64(),
                    alpha_primal: last_alpha.0,
                    alpha_dual: last_alpha.1,
                    sigma: last_alpha.2,
                };
                debug!("sdp iter {rec:?}");
                if self.cfg.trace {
                    self.trace.push(rec);
                }
            }
            if !(xz.is_finite() && pinf.is_finite() && dinf.is_finite()) {
                return SdpStatus::NumericalFailure;
            }
            let merit = (pinf.as_f64().max(dinf.as_f64()) / self.cfg.tol_feas).max(rel_gap.as_f64() / self.cfg.tol_gap);
            if self.best.as_ref().map_or(true, |b| merit < b.0) {
                self.best = Some((merit, self.x.clone(), self.y.clone(), self.z.clone()));
            }
            if pinf.as_f64() <= self.cfg.tol_feas
                && dinf.as_f64() <= self.cfg.tol_feas
                && rel_gap.as_f64() <= self.cfg.tol_gap
            {
                return SdpStatus::Optimal;
            }
            // divergence of X means the objective is unbounded; of y, that
            // the constraints cannot be met
            let big = T::of(1e10);
            if self.x.frobenius_norm() > big * (T::one() + self.x0_norm) || norm_vec(&self.y) > big {
                return SdpStatus::Infeasible;
            }
            if self.iter >= self.cfg.max_iter {
                return SdpStatus::MaxIterations;
            }
            self.iter += 1;

            let nt = match self.nt_scaling() {
                Some(nt) => nt,
                None => return SdpStatus::NumericalFailure,
            };
            let schur = self.p.schur(&nt.w);
            let m_chol = match factor_schur(&schur) {
                Some(l) => l,
                None => return SdpStatus::NumericalFailure,
            };
            let m_chol = (&schur, &m_chol);

            // predictor
            let rhs_aff = Matrix::from_diag(&nt.lam.iter().map(|&l| -l * l).collect::<Vec<_>>());
            let aff = self.direction(&nt, m_chol, &rp, &rd, &rhs_aff);
            let ap = step_to_boundary(&nt.lam, &aff.dx_t).min(T::one());
            let ad = step_to_boundary(&nt.lam, &aff.dz_t).min(T::one());
            let lam_m = Matrix::from_diag(&nt.lam);
            let mut xa = lam_m.clone();
            xa.axpy(ap, &aff.dx_t);
            let mut za = lam_m.clone();
            za.axpy(ad, &aff.dz_t);
            let mu_aff = xa.frobenius_dot(&za) / nf;
            let sigma = if mu > T::zero() {
                (mu_aff / mu).max(T::zero()).min(T::one()).powi(3)
            } else {
                T::zero()
            };

            // corrector
            let mut rhs = sym(&aff.dx_t.matmul(&aff.dz_t)).scale(-T::one());
            for i in 0..n {
                rhs[(i, i)] += sigma * mu - nt.lam[i] * nt.lam[i];
            }
            let dir = self.direction(&nt, m_chol, &rp, &rd, &rhs);
            let frac = T::of(self.cfg.step_fraction);
            let mut ap = (frac * step_to_boundary(&nt.lam, &dir.dx_t)).min(T::one());
            let mut ad = (frac * step_to_boundary(&nt.lam, &dir.dz_t)).min(T::one());

            let dx = sym(&nt.r.matmul(&dir.dx_t).matmul_tr(&nt.r));
            let dz = sym(&self.p.a_adj(&dir.dy).scale(-T::one()).add(&rd));

            // Cholesky acceptance and non-increasing complementarity
            let mut accepted = None;
            let mut first_pd = None;
            for _ in 0..60 {
                let mut xn = self.x.clone();
                xn.axpy(ap, &dx);
                let mut zn = self.z.clone();
                zn.axpy(ad, &dz);
                let xn = sym(&xn);
                let zn = sym(&zn);
                let pd = cholesky(&SymMatrix::from_symmetric_unchecked(xn.clone())).is_ok()
                    && cholesky(&SymMatrix::from_symmetric_unchecked(zn.clone())).is_ok();
                if pd && xn.frobenius_dot(&zn) <= xz {
                    accepted = Some((xn, zn, ap, ad));
                    break;
                }
                if pd && first_pd.is_none() {
                    first_pd = Some((xn, zn, ap, ad));
                }
                ap *= T::of(0.8);
                ad *= T::of(0.8);
            }
            // No gap-reducing step exists only when the iterate is far from
            // feasibility (e.g. an unbounded objective); take the longest
            // interior step and let the divergence test decide.
            let Some((xn, zn, ap, ad)) = accepted.or_else(|| {
                debug!("sdp iter {}: complementarity increased", self.iter);
                first_pd
            }) else {
                return SdpStatus::NumericalFailure;
            };
            self.x = xn;
            self.z = zn;
            for (y, &d) in self.y.iter_mut().zip(&dir.dy) {
                *y += ad * d;
            }
            last_alpha = (ap.as_f64(), ad.as_f64(), sigma.as_f64());
            if ap.as_f64() < 1e-10 && ad.as_f64() < 1e-10 {
                stalled += 1;
                if stalled >= 5 {
                    return SdpStatus::NumericalFailure;
                }
            } else {
                stalled = 0;
            }
        }
    }

    fn nt_scaling(&self) -> Option<Nt<T>> {
        let lx = cholesky(&SymMatrix::from_symmetric_unchecked(self.x.clone())).ok()?;
        let g = SymMatrix::from_symmetric_unchecked(lx.tr_matmul(&self.z.matmul(&lx)).symmetrized());
        let eig = sym_eig(&g).ok()?;
        if !(eig.min_value() > T::zero()) {
            return None;
        }
        let lam: Vec<T> = eig.values.iter().map(|v| v.sqrt()).collect();
        let inv_sqrt_lam: Vec<T> = lam.iter().map(|l| T::one() / l.sqrt()).collect();
        let mut v = eig.vectors.clone();
        let n = self.p.dim;
        for i in 0..n {
            for (j, s) in inv_sqrt_lam.iter().enumerate() {
                v[(i, j)] *= *s;
            }
        }
        let r = lx.matmul(&v);
        let w = sym(&r.matmul_tr(&r));
        Some(Nt { r, w, lam })
    }

    fn direction(
        &self,
        nt: &Nt<T>,
        (schur, m_chol): (&SymMatrix<T>, &Matrix<T>),
        rp: &[T],
        rd: &Matrix<T>,
        rhs: &Matrix<T>,
    ) -> Direction<T> {
        let n = self.p.dim;
        let k = Matrix::from_fn(n, n, |i, j| T::of(2.0) * rhs[(i, j)] / (nt.lam[i] + nt.lam[j]));
        let rkr = nt.r.matmul(&k).matmul_tr(&nt.r);
        let wrw = nt.w.matmul(rd).matmul(&nt.w);
        let a_rkr = self.p.a_op(&rkr);
        let a_wrw = self.p.a_op(&wrw);
        let rhs_y: Vec<T> = (0..rp.len()).map(|c| rp[c] - a_rkr[c] + a_wrw[c]).collect();
        let dy = if rhs_y.is_empty() {
            Vec::new()
        } else {
            let solve = |v: &[T]| solve_lower_tr(m_chol, &solve_lower(m_chol, &Matrix::column(v))).col(0);
            let mut dy = solve(&rhs_y);
            // the Schur complement grows ill-conditioned as μ → 0
            for _ in 0..SCHUR_REFINE {
                let md = schur.as_matrix().matvec(&dy);
                let res: Vec<T> = rhs_y.iter().zip(&md).map(|(&a, &b)| a - b).collect();
                let corr = solve(&res);
                for (d, c) in dy.iter_mut().zip(corr) {
                    *d += c;
                }
            }
            dy
        };
        let mut dz = rd.clone();
        dz.axpy(-T::one(), &self.p.a_adj(&dy));
        let dz_t = sym(&nt.r.tr_matmul(&dz.matmul(&nt.r)));
        let dx_t = sym(&k.sub(&dz_t));
        Direction { dx_t, dz_t, dy }
    }
}

fn factor_schur<T: Scalar>(m: &SymMatrix<T>) -> Option<Matrix<T>> {
    if m.dim() == 0 {
        return Some(Matrix::zeros(0, 0));
    }
    if let Ok(l) = cholesky(m) {
        return Some(l);
    }
    let scale = (0..m.dim()).fold(T::zero(), |a, i| a.max(m.get(i, i).abs()));
    for reg in [1e-14, 1e-12, 1e-10] {
        let mut mm = m.clone();
        for i in 0..m.dim() {
            mm.add_sym(i, i, T::of(reg) * scale);
        }
        if let Ok(l) = cholesky(&mm) {
            return Some(l);
        }
    }
    None
}

/// Largest `α` with `Λ + α·d ⪰ 0` (infinite when `d ⪰ 0`).
fn step_to_boundary<T: Scalar>(lam: &[T], d: &Matrix<T>) -> T {
    let n = lam.len();
    let s: Vec<T> = lam.iter().map(|l| T::one() / l.sqrt()).collect();
    let h = SymMatrix::from_symmetric_unchecked(sym(&Matrix::from_fn(n, n, |i, j| s[i] * d[(i, j)] * s[j])));
    match sym_eig(&h) {
        Ok(e) if e.min_value() < T::zero() => -T::one() / e.min_value(),
        Ok(_) => T::infinity(),
        Err(_) => T::zero(),
    }
}
