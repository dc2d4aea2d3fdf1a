//! Fidelity tensors built from mapping samples, and total fidelity in Kraus,
//! Choi, and ratio forms.

mod io;

pub use io::{read_sample_jsonl, write_sample_jsonl, FidelityDocument, SampleHeader, SAMPLE_FORMAT};

use crate::channel::{ChoiMatrix, DensityMatrix, KrausSet, PureState};
use crate::error::{dim_mismatch, Error, Result};
use crate::linalg::{dot, Matrix, SymMatrix};
use crate::scalar::Scalar;

/// A pure or mixed state on one side of a mapping record.
#[derive(Debug, Clone, PartialEq)]
pub enum State<T> {
    Pure(PureState<T>),
    Mixed(DensityMatrix<T>),
}

impl<T: Scalar> State<T> {
    pub fn dim(&self) -> usize {
        match self {
            State::Pure(p) => p.dim(),
            State::Mixed(m) => m.dim(),
        }
    }

    pub fn density(&self) -> SymMatrix<T> {
        match self {
            State::Pure(p) => SymMatrix::outer(p.amplitudes()),
            State::Mixed(m) => m.matrix().clone(),
        }
    }

    pub fn as_pure(&self) -> Option<&PureState<T>> {
        match self {
            State::Pure(p) => Some(p),
            State::Mixed(_) => None,
        }
    }
}

impl<T> From<PureState<T>> for State<T> {
    fn from(p: PureState<T>) -> Self {
        State::Pure(p)
    }
}

impl<T> From<DensityMatrix<T>> for State<T> {
    fn from(m: DensityMatrix<T>) -> Self {
        State::Mixed(m)
    }
}

/// One observation `ρ → |φ⟩⟨φ|` with fidelity weight `omega` and
/// denominator weight `nu`.
#[derive(Debug, Clone, PartialEq)]
pub struct MappingRecord<T> {
    pub input: State<T>,
    pub output: State<T>,
    pub omega: T,
    pub nu: T,
}

impl<T: Scalar> MappingRecord<T> {
    /// Pure-to-pure record with `ω = ν = 1`.
    pub fn pure(input: PureState<T>, output: PureState<T>) -> Self {
        Self {
            input: State::Pure(input),
            output: State::Pure(output),
            omega: T::one(),
            nu: T::one(),
        }
    }

    /// Sets `ω` and, following the default `ν = ω`, also `ν`.
    pub fn with_omega(mut self, omega: T) -> Self {
        self.omega = omega;
        self.nu = omega;
        self
    }

    pub fn with_nu(mut self, nu: T) -> Self {
        self.nu = nu;
        self
    }
}

/// Non-empty list of records with uniform input dimension `n` and output
/// dimension `d`.
#[derive(Debug, Clone, PartialEq)]
pub struct MappingSample<T> {
    records: Vec<MappingRecord<T>>,
    n: usize,
    d: usize,
    seed: Option<u64>,
}

impl<T: Scalar> MappingSample<T> {
    pub fn new(records: Vec<MappingRecord<T>>, seed: Option<u64>) -> Result<Self> {
        let first = records
            .first()
            .ok_or_else(|| Error::InvalidInput("mapping sample is empty".into()))?;
        let (n, d) = (first.input.dim(), first.output.dim());
        for (l, r) in records.iter().enumerate() {
            if r.input.dim() != n || r.output.dim() != d {
                return Err(dim_mismatch(
                    format!("record dims ({n}, {d})"),
                    format!("record {l}: ({}, {})", r.input.dim(), r.output.dim()),
                ));
            }
            if !r.omega.is_finite() || !r.nu.is_finite() || r.omega < T::zero() || r.nu < T::zero() {
                return Err(Error::InvalidInput(format!("record {l}: weights must be finite and >= 0")));
            }
        }
        Ok(Self { records, n, d, seed })
    }

    pub fn records(&self) -> &[MappingRecord<T>] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Input dimension.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Output dimension.
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn total_omega(&self) -> T {
        self.records.iter().map(|r| r.omega).sum()
    }

    pub fn total_nu(&self) -> T {
        self.records.iter().map(|r| r.nu).sum()
    }

    pub fn all_outputs_pure(&self) -> bool {
        self.records.iter().all(|r| matches!(r.output, State::Pure(_)))
    }
}

/// Objective tensor `S_{jk;j'k'}` as a symmetric `Dn×Dn` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FidelityTensor<T> {
    n: usize,
    d: usize,
    s: SymMatrix<T>,
}

impl<T: Scalar> FidelityTensor<T> {
    pub fn new(n: usize, d: usize, s: SymMatrix<T>) -> Result<Self> {
        if n == 0 || d == 0 || s.dim() != n * d {
            return Err(dim_mismatch(n * d, s.dim()));
        }
        Ok(Self { n, d, s })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn dim(&self) -> usize {
        self.s.dim()
    }

    pub fn matrix(&self) -> &SymMatrix<T> {
        &self.s
    }

    /// Exchanges input and output roles, as for the inverse channel.
    pub fn swapped(&self) -> Self {
        let swapped = crate::channel::swap_io(
            &ChoiMatrix::new(self.d, self.n, self.s.clone()).expect("tensor dims consistent"),
        );
        Self {
            n: self.d,
            d: self.n,
            s: swapped.into_matrix(),
        }
    }
}

/// Denominator tensor `Q_{jk;j'k'} = δ_{jj'} W_{kk'}`, stored through `W`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenominatorTensor<T> {
    n: usize,
    d: usize,
    w: SymMatrix<T>,
}

impl<T: Scalar> DenominatorTensor<T> {
    pub fn new(d: usize, w: SymMatrix<T>) -> Result<Self> {
        if d == 0 || w.dim() == 0 {
            return Err(Error::InvalidInput("empty denominator tensor".into()));
        }
        Ok(Self { n: w.dim(), d, w })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Input-space block `W = Σ_l ν ψψᵀ`.
    pub fn block(&self) -> &SymMatrix<T> {
        &self.w
    }

    /// Full `Dn×Dn` matrix.
    pub fn matrix(&self) -> SymMatrix<T> {
        let (n, d) = (self.n, self.d);
        let mut q = SymMatrix::zeros(n * d);
        for j in 0..d {
            for k in 0..n {
                for kp in k..n {
                    q.set(j * n + k, j * n + kp, self.w.get(k, kp));
                }
            }
        }
        q
    }

    /// `Σ_s Tr(B_s W B_sᵀ)`.
    pub fn quad_form(&self, ch: &KrausSet<T>) -> T {
        ch.operators()
            .iter()
            .map(|b| self.w.congruence_tr(b).trace())
            .sum()
    }
}

/// `S_{jk;j'k'} = Σ_l ω φ_j φ_{j'} ρ_{kk'}` for pure outputs; pure inputs use
/// `ρ = ψψᵀ`.
pub fn build_s<T: Scalar>(sample: &MappingSample<T>) -> Result<FidelityTensor<T>> {
    if !sample.all_outputs_pure() {
        return Err(Error::InvalidInput(
            "build_s needs pure outputs; use build_s_mixed_out for density outputs".into(),
        ));
    }
    build_s_mixed_out(sample)
}

/// `S_{jk;j'k'} = Σ_l ω ϱ_{jj'} ρ_{kk'}`.
///
/// For mixed outputs this quadratic form is the true fidelity only when one
/// side of each pair is pure.
pub fn build_s_mixed_out<T: Scalar>(sample: &MappingSample<T>) -> Result<FidelityTensor<T>> {
    let (n, d) = (sample.n(), sample.d());
    let dim = n * d;
    let mut s = Matrix::zeros(dim, dim);
    for r in sample.records() {
        if r.omega == T::zero() {
            continue;
        }
        match (&r.input, &r.output) {
            (State::Pure(psi), State::Pure(phi)) => {
                let v = kron_vec(phi.amplitudes(), psi.amplitudes());
                rank_one_update(&mut s, r.omega, &v);
            }
            _ => {
                let out = r.output.density();
                let inp = r.input.density();
                for j in 0..d {
                    for jp in 0..d {
                        let o = r.omega * out.get(j, jp);
                        if o == T::zero() {
                            continue;
                        }
                        for k in 0..n {
                            let row = &mut s.row_mut(j * n + k)[jp * n..(jp + 1) * n];
                            for (kp, x) in row.iter_mut().enumerate() {
                                *x += o * inp.get(k, kp);
                            }
                        }
                    }
                }
            }
        }
    }
    FidelityTensor::new(n, d, SymMatrix::from_symmetric_unchecked(s.symmetrized()))
}

/// `W = Σ_l ν ρ_l` (inputs), the block of `Q = I_D ⊗ W`.
pub fn build_q<T: Scalar>(sample: &MappingSample<T>) -> Result<DenominatorTensor<T>> {
    let n = sample.n();
    let mut w = Matrix::zeros(n, n);
    for r in sample.records() {
        if r.nu == T::zero() {
            continue;
        }
        match &r.input {
            State::Pure(psi) => rank_one_update(&mut w, r.nu, psi.amplitudes()),
            State::Mixed(rho) => w.axpy(r.nu, rho.matrix().as_matrix()),
        }
    }
    DenominatorTensor::new(sample.d(), SymMatrix::from_symmetric_unchecked(w.symmetrized()))
}

fn kron_vec<T: Scalar>(a: &[T], b: &[T]) -> Vec<T> {
    let mut v = Vec::with_capacity(a.len() * b.len());
    for &x in a {
        for &y in b {
            v.push(x * y);
        }
    }
    v
}

fn rank_one_update<T: Scalar>(m: &mut Matrix<T>, w: T, v: &[T]) {
    let cols = m.cols();
    let data = m.as_mut_slice();
    for (i, &vi) in v.iter().enumerate() {
        let c = w * vi;
        if c == T::zero() {
            continue;
        }
        let row = &mut data[i * cols..(i + 1) * cols];
        for (x, &vj) in row.iter_mut().zip(v) {
            *x += c * vj;
        }
    }
}

fn check_dims<T: Scalar>(ch_out: usize, ch_in: usize, s: &FidelityTensor<T>) -> Result<()> {
    if (ch_out, ch_in) != (s.d(), s.n()) {
        return Err(dim_mismatch(
            format!("D={}, n={}", s.d(), s.n()),
            format!("D={ch_out}, n={ch_in}"),
        ));
    }
    Ok(())
}

/// `F = Σ_s vec(B_s)ᵀ S vec(B_s)`.
pub fn fidelity_kraus<T: Scalar>(ch: &KrausSet<T>, s: &FidelityTensor<T>) -> Result<T> {
    check_dims(ch.d_out(), ch.d_in(), s)?;
    Ok(ch.operators().iter().map(|b| s.matrix().quad_form(b.as_slice())).sum())
}

/// `F = Tr(J S)`.
pub fn fidelity_choi<T: Scalar>(j: &ChoiMatrix<T>, s: &FidelityTensor<T>) -> Result<T> {
    check_dims(j.d_out(), j.d_in(), s)?;
    Ok(j.matrix().frobenius_dot(s.matrix()))
}

/// Ratio of the numerator form `S` to the denominator form `Q`; invariant
/// under `B → c·B`.
pub fn fidelity_ratio<T: Scalar>(
    ch: &KrausSet<T>,
    s: &FidelityTensor<T>,
    q: &DenominatorTensor<T>,
) -> Result<T> {
    check_dims(ch.d_out(), ch.d_in(), s)?;
    if (q.d(), q.n()) != (s.d(), s.n()) {
        return Err(dim_mismatch(
            format!("D={}, n={}", s.d(), s.n()),
            format!("Q with D={}, n={}", q.d(), q.n()),
        ));
    }
    let num = fidelity_kraus(ch, s)?;
    let den = q.quad_form(ch);
    let scale = ch
        .operators()
        .iter()
        .map(|b| dot(b.as_slice(), b.as_slice()))
        .sum::<T>()
        * q.block().trace().abs();
    if !(den > T::of(1e-14) * scale) {
        return Err(Error::DegenerateDenominator);
    }
    Ok(num / den)
}

/// `⟨φ|ϱ|φ⟩`.
pub fn expected_pair_fidelity<T: Scalar>(out: &DensityMatrix<T>, target: &PureState<T>) -> Result<T> {
    if out.dim() != target.dim() {
        return Err(dim_mismatch(out.dim(), target.dim()));
    }
    Ok(out.matrix().quad_form(target.amplitudes()))
}
