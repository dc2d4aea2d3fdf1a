use std::io::Write;

use log::debug;

use super::{helper_count, EigPick, IterState, LowRankConfig, LowRankInit, LowerDiagB};
use crate::channel::{adjust_kraus, kraus_gram, kraus_to_choi, ChoiMatrix, ConstraintKind, KrausSet};
use crate::datagen::Rng;
use crate::error::{dim_mismatch, Error, Result};
use crate::fidelity::{DenominatorTensor, FidelityTensor};
use crate::linalg::{cholesky, invert_lower, qr, sym_eig, Matrix, SymMatrix};
use crate::scalar::Scalar;

/// Relative eigenvalue spread treated as a degenerate top eigenvalue.
const DEGENERACY_TOL: f64 = 1e-9;
const INIT_ATTEMPTS: usize = 20;
const CONVERGED_STREAK: usize = 5;
const BACKTRACK_HALVINGS: usize = 30;
/// Relative fidelity loss still accepted as non-decreasing.
const MONOTONE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LowRankStatus {
    /// Fidelity changed by less than the tolerance for several iterations.
    Converged,
    /// No improvement after the allotted escape attempts.
    Stagnated,
    MaxIterations,
}

impl LowRankStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            LowRankStatus::Converged => "converged",
            LowRankStatus::Stagnated => "stagnated",
            LowRankStatus::MaxIterations => "max_iterations",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub iteration: usize,
    pub fidelity: f64,
    pub best_fidelity: f64,
    /// `max |G − I|` after restoration.
    pub constraint_residual: f64,
    /// Smallest eigenvalue of the step candidate's Gram matrix, before
    /// restoration.
    pub gram_min_eig: f64,
    /// Eigenvector offset from the top used in this step.
    pub pick_offset: usize,
}

pub fn write_trace_csv<W: Write>(trace: &[TraceRecord], mut w: W) -> std::io::Result<()> {
    writeln!(w, "iteration,fidelity,best_fidelity,constraint_residual,gram_min_eig,pick_offset")?;
    for r in trace {
        writeln!(
            w,
            "{},{:.17e},{:.17e},{:e},{:e},{}",
            r.iteration, r.fidelity, r.best_fidelity, r.constraint_residual, r.gram_min_eig, r.pick_offset
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct LowRankResult<T> {
    /// Best iterate seen.
    pub state: IterState<T>,
    pub kind: ConstraintKind,
    pub status: LowRankStatus,
    pub iterations: usize,
    /// Random restarts after a singular Gram matrix.
    pub restarts: usize,
    pub trace: Vec<TraceRecord>,
}

impl<T: Scalar> LowRankResult<T> {
    pub fn fidelity(&self) -> T {
        self.state.fidelity
    }

    pub fn kraus(&self) -> KrausSet<T> {
        self.state.b.to_kraus()
    }

    pub fn choi(&self) -> ChoiMatrix<T> {
        kraus_to_choi(&self.kraus())
    }
}

/// Row of `B` for constrained index `a` and free index `o`: `a·n + o` for
/// unit (`a = j`), `o·n + a` for TP (`a = k`).
#[inline]
fn row(kind: ConstraintKind, n: usize, a: usize, o: usize) -> usize {
    match kind {
        ConstraintKind::UnitPreserving => a * n + o,
        ConstraintKind::TracePreserving => o * n + a,
    }
}

/// `(constrained, free)` extents.
fn extents(kind: ConstraintKind, n: usize, d: usize) -> (usize, usize) {
    match kind {
        ConstraintKind::UnitPreserving => (d, n),
        ConstraintKind::TracePreserving => (n, d),
    }
}

/// Packed vectors `C` whose overlaps with a variation `B̆` are the linearized
/// Gram changes: `G_{aa'}(B,B̆) + G_{a'a}(B,B̆)` for `a < a'`, then
/// `G_{aa}(B,B̆) − G_{a−1,a−1}(B,B̆)`. Variations orthogonal to all of them
/// keep `G ∝ I` to first order.
pub fn helper_constraints<T: Scalar>(b: &LowerDiagB<T>, kind: ConstraintKind) -> Vec<Vec<T>> {
    let (n, d, n_s) = (b.n(), b.d(), b.n_s());
    let (c, f) = extents(kind, n, d);
    let bm = b.unpack();
    let len = b.entries().len();
    let mut out = Vec::with_capacity(helper_count(n, d, kind));
    for a in 0..c {
        for ap in (a + 1)..c {
            let mut v = vec![T::zero(); len];
            for o in 0..f {
                let (i, ip) = (row(kind, n, a, o), row(kind, n, ap, o));
                for s in 0..n_s {
                    if let Some(p) = b.index(ip, s) {
                        v[p] += bm[(i, s)];
                    }
                    if let Some(p) = b.index(i, s) {
                        v[p] += bm[(ip, s)];
                    }
                }
            }
            out.push(v);
        }
    }
    for a in 1..c {
        let mut v = vec![T::zero(); len];
        for o in 0..f {
            let (i, im) = (row(kind, n, a, o), row(kind, n, a - 1, o));
            for s in 0..n_s {
                if let Some(p) = b.index(i, s) {
                    v[p] += bm[(i, s)];
                }
                if let Some(p) = b.index(im, s) {
                    v[p] -= bm[(im, s)];
                }
            }
        }
        out.push(v);
    }
    out
}

/// Orthonormal basis (columns) of the complement of `span(cs)` in `R^len`.
fn complement_basis<T: Scalar>(cs: &[Vec<T>], len: usize) -> Result<Matrix<T>> {
    let mut proj = Matrix::identity(len);
    if !cs.is_empty() {
        let m = cs.len();
        let g = SymMatrix::from_fn(m, |a, b| crate::linalg::dot(&cs[a], &cs[b]));
        let eg = sym_eig(&g)?;
        let cut = T::of(1e-12) * eg.max_value().max(T::min_positive_value());
        for t in 0..m {
            let lam = eg.values[t];
            if lam <= cut {
                continue;
            }
            let w = eg.vector(t);
            let inv = T::one() / lam.sqrt();
            let u: Vec<T> = (0..len)
                .map(|p| (0..m).map(|a| cs[a][p] * w[a]).sum::<T>() * inv)
                .collect();
            for p in 0..len {
                for q in 0..len {
                    proj[(p, q)] -= u[p] * u[q];
                }
            }
        }
    }
    let ep = sym_eig(&SymMatrix::from_symmetric_unchecked(proj.symmetrized()))?;
    let keep: Vec<usize> = (0..len).filter(|&t| ep.values[t] > T::of(0.5)).collect();
    Ok(Matrix::from_fn(len, keep.len(), |p, c| ep.vectors[(p, keep[c])]))
}

/// `S − λ_{aa'} δ_{oo'}` as a `Dn×Dn` matrix.
fn effective_matrix<T: Scalar>(
    s: &SymMatrix<T>,
    lambda: &SymMatrix<T>,
    coef: T,
    kind: ConstraintKind,
    n: usize,
    d: usize,
) -> Matrix<T> {
    let (c, f) = extents(kind, n, d);
    let mut m = s.as_matrix().clone();
    for a in 0..c {
        for ap in 0..c {
            let l = coef * lambda.get(a, ap);
            for o in 0..f {
                m[(row(kind, n, a, o), row(kind, n, ap, o))] -= l;
            }
        }
    }
    m
}

/// `Vᵀ (I ⊗ M) V` restricted to the stencil.
fn reduce<T: Scalar>(m: &Matrix<T>, v: &Matrix<T>, shape: &LowerDiagB<T>) -> SymMatrix<T> {
    let r = v.cols();
    let mut hv = Matrix::zeros(v.rows(), r);
    let mut tmp = shape.clone();
    for c in 0..r {
        tmp.entries_mut().copy_from_slice(&v.col(c));
        let y = m.matmul(&tmp.unpack());
        let packed = stencil_restrict(&y, shape);
        hv.set_col(c, &packed);
    }
    SymMatrix::from_symmetric_unchecked(v.tr_matmul(&hv).symmetrized())
}

fn stencil_restrict<T: Scalar>(y: &Matrix<T>, shape: &LowerDiagB<T>) -> Vec<T> {
    let mut out = Vec::with_capacity(shape.entries().len());
    for i in 0..y.rows() {
        for s in 0..shape.active(i) {
            out.push(y[(i, s)]);
        }
    }
    out
}

/// Two-sided problem of one step: numerator form and, for the ratio
/// objective, denominator form.
struct Objective<'a, T> {
    n: usize,
    d: usize,
    s: &'a SymMatrix<T>,
    q: Option<SymMatrix<T>>,
    kind: ConstraintKind,
}

impl<T: Scalar> Objective<'_, T> {
    /// `(F, λ, Den)` of a restored iterate.
    fn evaluate(&self, b: &LowerDiagB<T>) -> (T, SymMatrix<T>, T) {
        let bm = b.unpack();
        let sb = self.s.as_matrix().matmul(&bm);
        let num = bm.frobenius_dot(&sb);
        let (contract, den, f) = match &self.q {
            None => (sb, T::one(), num),
            Some(q) => {
                let qb = q.as_matrix().matmul(&bm);
                let den = bm.frobenius_dot(&qb);
                let f = num / den;
                let mut r = sb;
                r.axpy(-f, &qb);
                (r, den, f)
            }
        };
        let (c, fr) = extents(self.kind, self.n, self.d);
        let mut lam = Matrix::zeros(c, c);
        for a in 0..c {
            for ap in 0..c {
                let mut acc = T::zero();
                for o in 0..fr {
                    let (i, ip) = (row(self.kind, self.n, a, o), row(self.kind, self.n, ap, o));
                    for s in 0..b.n_s() {
                        acc += bm[(ip, s)] * contract[(i, s)];
                    }
                }
                lam[(a, ap)] = acc / den;
            }
        }
        (f, SymMatrix::from_symmetric_unchecked(lam.symmetrized()), den)
    }

    fn state(&self, b: LowerDiagB<T>, iteration: usize) -> IterState<T> {
        let (fidelity, lambda, _) = self.evaluate(&b);
        IterState {
            b,
            lambda,
            fidelity,
            iteration,
        }
    }

    /// Candidate vectors for the next iterate, best first within a
    /// degenerate top cluster, before restoration.
    fn candidates(&self, st: &IterState<T>, pick: EigPick) -> Result<Vec<LowerDiagB<T>>> {
        let b = &st.b;
        let len = b.entries().len();
        let helpers = helper_constraints(b, self.kind);
        let v = complement_basis(&helpers, len)?;
        if v.cols() == 0 {
            return Err(Error::InvalidInput("no free directions left after the helper constraints".into()));
        }
        let den = match &self.q {
            None => T::one(),
            Some(_) => self.evaluate(b).2,
        };
        let m = effective_matrix(self.s, &st.lambda, den, self.kind, self.n, self.d);
        let h = reduce(&m, &v, b);
        // eigenvectors of the reduced problem in the original basis of V
        let (values, vectors) = match &self.q {
            None => {
                let e = sym_eig(&h)?;
                (e.values, e.vectors)
            }
            Some(q) => {
                let hq = reduce(q.as_matrix(), &v, b);
                let l = cholesky(&hq).map_err(|_| Error::DegenerateDenominator)?;
                let li = invert_lower(&l);
                let e = sym_eig(&h.congruence_tr(&li))?;
                (e.values, li.tr_matmul(&e.vectors))
            }
        };
        let r = values.len();
        let offset = match pick {
            EigPick::MaxEigenvalue => 0,
            EigPick::IndexOffset(k) => k.min(r - 1),
        };
        let top = r - 1 - offset;
        let scale = values.iter().fold(T::zero(), |a, &x| a.max(x.abs())).max(T::one());
        let mut picks = vec![top];
        if offset == 0 {
            let mut t = top;
            while t > 0 && values[top] - values[t - 1] <= T::of(DEGENERACY_TOL) * scale {
                t -= 1;
                picks.push(t);
            }
        }
        let target = match self.kind {
            ConstraintKind::TracePreserving => self.n,
            ConstraintKind::UnitPreserving => self.d,
        };
        let mut out = Vec::with_capacity(picks.len());
        for t in picks {
            let x = vectors.col(t);
            let mut e = v.matvec(&x);
            // continuity with the current iterate fixes the eigenvector sign
            let ov: T = e.iter().zip(b.entries()).map(|(&a, &c)| a * c).sum();
            let nrm = e.iter().map(|&a| a * a).sum::<T>().sqrt();
            if !(nrm > T::zero()) {
                continue;
            }
            let sc = (T::of(target as f64)).sqrt() / nrm * if ov < T::zero() { -T::one() } else { T::one() };
            for a in e.iter_mut() {
                *a *= sc;
            }
            out.push(LowerDiagB::from_packed(self.n, self.d, b.n_s(), e)?);
        }
        Ok(out)
    }
}

/// One eigen step: maximizes `Σ_s B_sᵀ (S − λ⊗δ) B_s` over the stencil
/// directions orthogonal to the helper constraints, normalized to
/// `|B|² = n` (TP) or `D` (unit). With a degenerate top eigenvalue the
/// eigenvector whose restored iterate has the highest fidelity is taken.
pub fn eig_step<T: Scalar>(
    s: &FidelityTensor<T>,
    state: &IterState<T>,
    kind: ConstraintKind,
    pick: EigPick,
) -> Result<LowerDiagB<T>> {
    let obj = objective(s, None, kind, &state.b)?;
    let cands = obj.candidates(state, pick)?;
    best_candidate(&obj, cands)
}

fn best_candidate<T: Scalar>(obj: &Objective<'_, T>, cands: Vec<LowerDiagB<T>>) -> Result<LowerDiagB<T>> {
    if cands.len() == 1 {
        return Ok(cands.into_iter().next().expect("one candidate"));
    }
    let mut best: Option<(T, LowerDiagB<T>)> = None;
    let mut first = None;
    for c in cands {
        if first.is_none() {
            first = Some(c.clone());
        }
        if let Ok(r) = restore_and_regauge(&c, obj.kind) {
            let f = obj.evaluate(&r).0;
            if best.as_ref().map_or(true, |(bf, _)| f > *bf) {
                best = Some((f, c));
            }
        }
    }
    best.map(|(_, c)| c)
        .or(first)
        .ok_or_else(|| Error::InvalidInput("eigen step produced no usable vector".into()))
}

fn objective<'a, T: Scalar>(
    s: &'a FidelityTensor<T>,
    q: Option<&DenominatorTensor<T>>,
    kind: ConstraintKind,
    b: &LowerDiagB<T>,
) -> Result<Objective<'a, T>> {
    if (s.n(), s.d()) != (b.n(), b.d()) {
        return Err(dim_mismatch(
            format!("D={}, n={}", s.d(), s.n()),
            format!("B with D={}, n={}", b.d(), b.n()),
        ));
    }
    if let Some(q) = q {
        if (q.n(), q.d()) != (s.n(), s.d()) {
            return Err(dim_mismatch(
                format!("D={}, n={}", s.d(), s.n()),
                format!("Q with D={}, n={}", q.d(), q.n()),
            ));
        }
    }
    Ok(Objective {
        n: s.n(),
        d: s.d(),
        s: s.matrix(),
        q: q.map(|q| q.matrix()),
        kind,
    })
}

/// Restores `G = I` with `G^{-1/2}` and returns to the lower-diagonal gauge:
/// with `M` the top `N_s×N_s` block and `Mᵀ = QR`, `B' = B̃ Q` has top block
/// `Rᵀ`. Columns are signed so the diagonal of the top block is
/// non-negative.
pub fn restore_and_regauge<T: Scalar>(b: &LowerDiagB<T>, kind: ConstraintKind) -> Result<LowerDiagB<T>> {
    let adjusted = adjust_kraus(&b.to_kraus(), kind)?;
    regauge(b.n(), b.d(), &adjusted.to_columns())
}

fn regauge<T: Scalar>(n: usize, d: usize, bt: &Matrix<T>) -> Result<LowerDiagB<T>> {
    let n_s = bt.cols();
    let top = Matrix::from_fn(n_s, n_s, |i, s| bt[(i, s)]);
    let (q, r) = qr(&top.transpose())?;
    let mut out = bt.matmul(&q);
    for s in 0..n_s {
        if r[(s, s)] < T::zero() {
            for i in 0..out.rows() {
                out[(i, s)] = -out[(i, s)];
            }
        }
        for i in 0..s {
            out[(i, s)] = T::zero();
        }
    }
    LowerDiagB::pack(n, d, &out)
}

/// Multipliers `λ_{aa'} = Herm Σ B_{a'o;s} (S B)_{ao;s}` and the fidelity of a
/// restored iterate.
pub fn lagrange_update<T: Scalar>(
    s: &FidelityTensor<T>,
    b: LowerDiagB<T>,
    kind: ConstraintKind,
    iteration: usize,
) -> Result<IterState<T>> {
    let obj = objective(s, None, kind, &b)?;
    Ok(obj.state(b, iteration))
}

fn check_rank(n: usize, d: usize, n_s: usize, kind: ConstraintKind) -> Result<()> {
    super::dims(n, d, n_s, kind)?;
    // G = Σ B_sᵀB_s (n×n) has rank ≤ N_s·D, Σ B_sB_sᵀ (D×D) rank ≤ N_s·n
    let (need, have) = match kind {
        ConstraintKind::TracePreserving => (n, n_s * d),
        ConstraintKind::UnitPreserving => (d, n_s * n),
    };
    if have < need {
        return Err(Error::InvalidInput(format!(
            "N_s = {n_s} cannot satisfy the {kind:?} constraint for n = {n}, D = {d}"
        )));
    }
    Ok(())
}

/// Top `N_s` eigenvectors of `S` as columns, restored and gauged.
fn spectral_start<T: Scalar>(s: &FidelityTensor<T>, n_s: usize, kind: ConstraintKind) -> Result<LowerDiagB<T>> {
    let eig = sym_eig(s.matrix())?;
    let dim = eig.dim();
    let cols: Vec<Vec<T>> = (0..n_s).map(|c| eig.vector(dim - 1 - c)).collect();
    let b = Matrix::from_fn(dim, n_s, |i, c| cols[c][i]);
    let adjusted = adjust_kraus(&KrausSet::from_columns(s.d(), s.n(), &b)?, kind)?;
    regauge(s.n(), s.d(), &adjusted.to_columns())
}

fn random_start<T: Scalar>(
    n: usize,
    d: usize,
    n_s: usize,
    kind: ConstraintKind,
    rng: &mut Rng,
) -> Result<LowerDiagB<T>> {
    let len = super::dims(n, d, n_s, kind)?.0;
    let mut last = None;
    for _ in 0..INIT_ATTEMPTS {
        let b = LowerDiagB::from_packed(n, d, n_s, rng.uniform_vec(len))?;
        match restore_and_regauge(&b, kind) {
            Ok(r) => return Ok(r),
            Err(e @ Error::SingularGram { .. }) => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last.expect("at least one attempt"))
}

fn constraint_residual<T: Scalar>(b: &LowerDiagB<T>, kind: ConstraintKind) -> f64 {
    let g = kraus_gram(&b.to_kraus(), kind);
    g.max_abs_diff(&SymMatrix::identity(g.dim())).as_f64()
}

/// Iterates from a random seeded start and returns the best iterate.
pub fn run<T: Scalar>(
    s: &FidelityTensor<T>,
    n_s: usize,
    kind: ConstraintKind,
    cfg: &LowRankConfig,
) -> Result<LowRankResult<T>> {
    drive(s, None, n_s, kind, cfg, None)
}

/// As [`run`] but starting from a given Kraus matrix (restored first).
pub fn run_from<T: Scalar>(
    s: &FidelityTensor<T>,
    start: &LowerDiagB<T>,
    kind: ConstraintKind,
    cfg: &LowRankConfig,
) -> Result<LowRankResult<T>> {
    drive(s, None, start.n_s(), kind, cfg, Some(start))
}

/// Maximizes the ratio `⟨B|S|B⟩ / ⟨B|Q|B⟩` under the unit constraint via
/// the generalized eigenproblem `(S − Den·λ⊗δ) B = F·Q B`.
pub fn run_ratio<T: Scalar>(
    s: &FidelityTensor<T>,
    q: &DenominatorTensor<T>,
    n_s: usize,
    cfg: &LowRankConfig,
) -> Result<LowRankResult<T>> {
    drive(s, Some(q), n_s, ConstraintKind::UnitPreserving, cfg, None)
}

enum Step<T> {
    Accepted(LowerDiagB<T>),
    Rejected,
    Singular(f64),
}

/// Restored candidate if it does not lower the fidelity; otherwise the first
/// non-decreasing point on the segment from the current iterate toward it,
/// halving the step up to [`BACKTRACK_HALVINGS`] times.
fn safeguarded<T: Scalar>(
    obj: &Objective<'_, T>,
    state: &IterState<T>,
    cand: &LowerDiagB<T>,
    kind: ConstraintKind,
) -> Step<T> {
    let floor = state.fidelity - T::of(MONOTONE_SLACK) * state.fidelity.abs().max(T::one());
    let mut t = T::one();
    for h in 0..=BACKTRACK_HALVINGS {
        let trial = if h == 0 {
            cand.clone()
        } else {
            let mut mix = state.b.clone();
            for (m, &c) in mix.entries_mut().iter_mut().zip(cand.entries()) {
                *m = (T::one() - t) * *m + t * c;
            }
            mix
        };
        match restore_and_regauge(&trial, kind) {
            Ok(r) => {
                if obj.evaluate(&r).0 >= floor {
                    return Step::Accepted(r);
                }
            }
            Err(Error::SingularGram { min_eig, .. }) if h == 0 => return Step::Singular(min_eig),
            Err(_) => {}
        }
        t = t * T::of(0.5);
    }
    Step::Rejected
}

/// Runs `cfg.starts` independent iterations (the first from `start` when
/// given) and keeps the one with the highest fidelity.
fn drive<T: Scalar>(
    s: &FidelityTensor<T>,
    q: Option<&DenominatorTensor<T>>,
    n_s: usize,
    kind: ConstraintKind,
    cfg: &LowRankConfig,
    start: Option<&LowerDiagB<T>>,
) -> Result<LowRankResult<T>> {
    check_rank(s.n(), s.d(), n_s, kind)?;
    if !(cfg.fidelity_tol >= 0.0) {
        return Err(Error::InvalidInput("fidelity_tol must be non-negative".into()));
    }
    let first = match (start, cfg.init) {
        (Some(b), _) => Some(b.clone()),
        (None, LowRankInit::Spectral) => match spectral_start(s, n_s, kind) {
            Ok(b) => Some(b),
            Err(e) => {
                debug!("lowrank: spectral start unusable ({e}), starting at random");
                None
            }
        },
        (None, LowRankInit::Random) => None,
    };
    let base = Rng::new(cfg.seed);
    let mut best: Option<LowRankResult<T>> = None;
    let (mut iterations, mut restarts) = (0, 0);
    for k in 0..cfg.starts.max(1) {
        let from = if k == 0 { first.as_ref() } else { None };
        let r = drive_once(s, q, n_s, kind, cfg, from, base.substream(k as u64))?;
        iterations += r.iterations;
        restarts += r.restarts;
        if best.as_ref().map_or(true, |b| r.state.fidelity > b.state.fidelity) {
            if k > 0 {
                debug!("lowrank: start {k} improved fidelity to {:e}", r.state.fidelity.as_f64());
            }
            best = Some(r);
        }
    }
    let mut best = best.expect("at least one start");
    best.iterations = iterations;
    best.restarts = restarts;
    Ok(best)
}

fn drive_once<T: Scalar>(
    s: &FidelityTensor<T>,
    q: Option<&DenominatorTensor<T>>,
    n_s: usize,
    kind: ConstraintKind,
    cfg: &LowRankConfig,
    start: Option<&LowerDiagB<T>>,
    mut rng: Rng,
) -> Result<LowRankResult<T>> {
    let (n, d) = (s.n(), s.d());
    let b0 = match start {
        Some(b) => {
            if (b.n(), b.d()) != (n, d) {
                return Err(dim_mismatch(format!("D={d}, n={n}"), format!("D={}, n={}", b.d(), b.n())));
            }
            restore_and_regauge(b, kind)?
        }
        None => random_start(n, d, n_s, kind, &mut rng)?,
    };
    let obj = objective(s, q, kind, &b0)?;
    let mut state = obj.state(b0, 0);
    let mut best = state.clone();
    let mut trace = Vec::new();
    let tol = T::of(cfg.fidelity_tol);
    let (mut calm, mut stagnant, mut retries, mut restarts) = (0usize, 0usize, 0usize, 0usize);
    let mut escape = false;
    let mut status = LowRankStatus::MaxIterations;
    let mut iterations = 0;

    for it in 1..=cfg.max_iter {
        iterations = it;
        let pick = if escape { EigPick::IndexOffset(1) } else { cfg.eig_pick };
        escape = false;
        let cand = best_candidate(&obj, obj.candidates(&state, pick)?)?;
        let prev = state.fidelity;
        let step = if matches!(pick, EigPick::IndexOffset(_)) && pick != cfg.eig_pick {
            // escape steps may lower F; the best iterate is kept separately
            match restore_and_regauge(&cand, kind) {
                Ok(b) => Step::Accepted(b),
                Err(Error::SingularGram { min_eig, .. }) => Step::Singular(min_eig),
                Err(e) => return Err(e),
            }
        } else {
            safeguarded(&obj, &state, &cand, kind)
        };
        let next = match step {
            Step::Accepted(b) => Some(b),
            Step::Rejected => None,
            Step::Singular(min_eig) => {
                debug!("lowrank: singular Gram (min eig {min_eig:e}) at iteration {it}, restarting");
                restarts += 1;
                state = obj.state(random_start(n, d, n_s, kind, &mut rng)?, it);
                calm = 0;
                continue;
            }
        };
        if let Some(b) = next {
            state = obj.state(b, it);
        }
        let f = state.fidelity;
        if !f.is_finite() {
            return Err(Error::InvalidInput(format!("non-finite fidelity at iteration {it}")));
        }
        let rel = (f - prev).abs() / prev.abs().max(T::min_positive_value());
        let improved = f > best.fidelity + tol * best.fidelity.abs();
        if f > best.fidelity {
            best = state.clone();
        }
        if improved {
            stagnant = 0;
        } else {
            stagnant += 1;
        }
        if cfg.trace {
            trace.push(TraceRecord {
                iteration: it,
                fidelity: f.as_f64(),
                best_fidelity: best.fidelity.as_f64(),
                constraint_residual: constraint_residual(&state.b, kind),
                gram_min_eig: sym_eig(&kraus_gram(&cand.to_kraus(), kind))
                    .map(|e| e.min_value().as_f64())
                    .unwrap_or(f64::NAN),
                pick_offset: match pick {
                    EigPick::MaxEigenvalue => 0,
                    EigPick::IndexOffset(k) => k,
                },
            });
        }
        calm = if rel <= tol { calm + 1 } else { 0 };
        if calm >= CONVERGED_STREAK {
            status = LowRankStatus::Converged;
            if retries < cfg.escape_retries {
                retries += 1;
                calm = 0;
                stagnant = 0;
                escape = true;
                debug!("lowrank: fixed point at iteration {it}, trying the next eigenvector");
                continue;
            }
            break;
        }
        if stagnant >= cfg.escape_after {
            if retries < cfg.escape_retries {
                retries += 1;
                stagnant = 0;
                escape = true;
                debug!("lowrank: stagnant at iteration {it}, trying the next eigenvector");
            } else {
                status = LowRankStatus::Stagnated;
                break;
            }
        }
    }
    Ok(LowRankResult {
        state: best,
        kind,
        status,
        iterations,
        restarts,
        trace,
    })
}
