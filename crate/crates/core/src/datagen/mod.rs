//! Seeded generators for the experimental samples, and the transform from
//! raw classical vectors to state pairs.

mod classical;
mod rng;

pub use classical::{canonical_frame, classical_transform};
pub use rng::Rng;

use crate::channel::{adjust_tp, apply_kraus, canonical_sign, KrausSet, PureState};
use crate::error::{Error, Result};
use crate::fidelity::{FidelityTensor, MappingRecord, MappingSample};
use crate::linalg::{det, qr, sym_eig, Matrix, SymMatrix};
use crate::scalar::Scalar;

/// Desk-scale default sample size `min(2n²D² + 1000, 20000)`.
pub fn default_sample_size(n: usize, d: usize) -> usize {
    (2 * n * n * d * d + 1000).min(20_000)
}

/// Orbit `X, UX, U²X, …` of a state under an orthogonal map.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T> {
    pub states: Vec<PureState<T>>,
}

impl<T: Scalar> Trajectory<T> {
    /// `len` states starting at `x0`; each is renormalized to stop drift.
    pub fn generate(u: &Matrix<T>, x0: &PureState<T>, len: usize) -> Result<Self> {
        if !u.is_square() || u.rows() != x0.dim() {
            return Err(crate::error::dim_mismatch(x0.dim(), format!("{}x{}", u.rows(), u.cols())));
        }
        let mut states = Vec::with_capacity(len);
        let mut x = x0.clone();
        for _ in 0..len {
            let next = PureState::normalized(u.matvec(x.amplitudes()))?;
            states.push(std::mem::replace(&mut x, next));
        }
        Ok(Self { states })
    }
}

/// Random orthogonal matrix from the QR factor of a uniform `[−1, 1]`
/// matrix, columns signed so that `R` has a positive diagonal.
pub fn random_orthogonal<T: Scalar>(n: usize, rng: &mut Rng) -> Matrix<T> {
    loop {
        let a = Matrix::<T>::from_vec(n, n, rng.uniform_vec(n * n)).expect("finite draws");
        let Ok((mut q, r)) = qr(&a) else { continue };
        if (0..n).any(|i| r[(i, i)].abs().as_f64() < 1e-8) {
            continue;
        }
        for j in 0..n {
            if r[(j, j)] < T::zero() {
                for i in 0..n {
                    q[(i, j)] = -q[(i, j)];
                }
            }
        }
        return q;
    }
}

/// Random rotation (`det = +1`): [`random_orthogonal`] with the first
/// column negated when the determinant is negative.
///
/// Unitary-dynamics samples need this at `n = 2`, where a reflection
/// squares to the identity and its trajectory visits only two states.
pub fn random_rotation<T: Scalar>(n: usize, rng: &mut Rng) -> Matrix<T> {
    let mut q = random_orthogonal::<T>(n, rng);
    if det(&q).map_or(false, |v| v < T::zero()) {
        for i in 0..n {
            q[(i, 0)] = -q[(i, 0)];
        }
    }
    q
}

/// Records `(±X⁽ˡ⁾, ±X⁽ˡ⁺¹⁾)` along a trajectory of `u`, independent random
/// signs, `ω = 1`. A random `x0` is drawn when none is given.
pub fn unitary_dynamics_sample<T: Scalar>(
    u: &Matrix<T>,
    x0: Option<&PureState<T>>,
    m: usize,
    rng: &mut Rng,
) -> Result<MappingSample<T>> {
    if m == 0 {
        return Err(Error::InvalidInput("sample size must be positive".into()));
    }
    let drawn;
    let x0 = match x0 {
        Some(x) => x,
        None => {
            drawn = rng.unit_vector(u.rows());
            &drawn
        }
    };
    let traj = Trajectory::generate(u, x0, m + 1)?;
    let records = traj
        .states
        .windows(2)
        .map(|w| {
            let a = signed(&w[0], rng.sign());
            let b = signed(&w[1], rng.sign());
            MappingRecord::pure(a, b)
        })
        .collect();
    MappingSample::new(records, Some(rng.seed()))
}

fn signed<T: Scalar>(p: &PureState<T>, s: f64) -> PureState<T> {
    if s < 0.0 {
        p.negated()
    } else {
        p.clone()
    }
}

/// Independent random unit pairs `ψ ∈ ℝⁿ`, `φ ∈ ℝᴰ`, `ω = 1`.
pub fn random_pair_sample<T: Scalar>(n: usize, d: usize, m: usize, rng: &mut Rng) -> Result<MappingSample<T>> {
    if m == 0 || n == 0 || d == 0 {
        return Err(Error::InvalidInput("dimensions and sample size must be positive".into()));
    }
    let records = (0..m)
        .map(|_| {
            let psi = rng.unit_vector(n);
            let phi = rng.unit_vector(d);
            MappingRecord::pure(psi, phi)
        })
        .collect();
    MappingSample::new(records, Some(rng.seed()))
}

/// Kraus-rank-one TP channel `D×n`, `D ≥ n`: a uniform random operator
/// passed through the TP adjustment, redrawn on a singular Gram.
pub fn toy_channel<T: Scalar>(n: usize, d: usize, rng: &mut Rng) -> Result<KrausSet<T>> {
    if d < n {
        return Err(Error::InvalidInput(format!("toy channel needs D >= n, got D={d}, n={n}")));
    }
    random_tp_channel(n, d, 1, rng)
}

/// TP channel with `n_s` uniform random operators after the TP adjustment;
/// `n_s = D·n` gives a generic full-rank channel.
pub fn random_tp_channel<T: Scalar>(n: usize, d: usize, n_s: usize, rng: &mut Rng) -> Result<KrausSet<T>> {
    if n == 0 || d == 0 || n_s == 0 || n_s * d < n {
        return Err(Error::InvalidInput(format!(
            "TP channel needs n_s·D >= n (n={n}, D={d}, n_s={n_s})"
        )));
    }
    for _ in 0..100 {
        let ops = (0..n_s)
            .map(|_| Matrix::from_vec(d, n, rng.uniform_vec(d * n)).expect("finite draws"))
            .collect();
        match adjust_tp(&KrausSet::new(ops)?) {
            Ok(ch) => return Ok(ch),
            Err(Error::SingularGram { .. }) => log::debug!("singular Gram in random channel, redrawing"),
            Err(e) => return Err(e),
        }
    }
    Err(Error::DegenerateData("could not draw a channel with a nonsingular Gram".into()))
}

/// For random `ψ`, `φ` is the top eigenvector of `ϱ = ch(ψψᵀ)`; returns the
/// sample and `F_init = Σ_l λ_max(ϱ⁽ˡ⁾)`, the generating channel's own
/// fidelity on it.
pub fn channel_maxeig_sample<T: Scalar>(
    ch: &KrausSet<T>,
    m: usize,
    rng: &mut Rng,
) -> Result<(MappingSample<T>, T)> {
    if m == 0 {
        return Err(Error::InvalidInput("sample size must be positive".into()));
    }
    let mut records = Vec::with_capacity(m);
    let mut f_init = T::zero();
    for _ in 0..m {
        let psi = rng.unit_vector(ch.d_in());
        let out = apply_kraus(ch, &psi.to_density())?;
        let eig = sym_eig(out.matrix())?;
        let top = eig.dim() - 1;
        let mut phi = eig.vector(top);
        canonical_sign(&mut phi);
        f_init += eig.values[top];
        records.push(MappingRecord::pure(psi, PureState::normalized(phi)?));
    }
    Ok((MappingSample::new(records, Some(rng.seed()))?, f_init))
}

/// `P` is the first `D` rows of a random orthogonal `n×n`; records are
/// `(ψ, Pψ/‖Pψ‖)` with `ω = ν = 1`.
pub fn projective_sample<T: Scalar>(
    n: usize,
    d: usize,
    m: usize,
    rng: &mut Rng,
) -> Result<(MappingSample<T>, Matrix<T>)> {
    if d == 0 || d > n || m == 0 {
        return Err(Error::InvalidInput(format!(
            "projective sample needs 1 <= D <= n and m > 0 (n={n}, D={d}, m={m})"
        )));
    }
    let u = random_orthogonal::<T>(n, rng);
    let p = Matrix::from_fn(d, n, |j, k| u[(j, k)]);
    let mut records = Vec::with_capacity(m);
    while records.len() < m {
        let psi = rng.unit_vector(n);
        let img = p.matvec(psi.amplitudes());
        if crate::linalg::norm2(&img).as_f64() < 1e-8 {
            continue;
        }
        records.push(MappingRecord::pure(psi, PureState::normalized(img)?));
    }
    Ok((MappingSample::new(records, Some(rng.seed()))?, p))
}

/// Symmetric `Dn×Dn` matrix with uniform `[−1, 1]` entries.
pub fn random_s_matrix<T: Scalar>(n: usize, d: usize, rng: &mut Rng) -> FidelityTensor<T> {
    let dim = n * d;
    let mut s = SymMatrix::zeros(dim);
    for i in 0..dim {
        for j in i..dim {
            s.set(i, j, T::of(rng.uniform_sym()));
        }
    }
    FidelityTensor::new(n, d, s).expect("dims consistent")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{constraint_residual, kraus_to_choi, ConstraintKind};
    use crate::fidelity::{build_q, build_s, fidelity_kraus, fidelity_ratio};

    #[test]
    fn orthogonal_is_orthogonal() {
        let mut rng = Rng::new(3);
        for n in 1..6 {
            let q = random_orthogonal::<f64>(n, &mut rng);
            assert!(q.tr_matmul(&q).max_abs_diff(&Matrix::identity(n)) < 1e-12);
        }
        let q = random_orthogonal::<f64>(1, &mut rng);
        assert!((q[(0, 0)].abs() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rotations_have_unit_determinant() {
        let mut rng = Rng::new(4);
        for n in 1..6 {
            for _ in 0..4 {
                let q = random_rotation::<f64>(n, &mut rng);
                assert!(q.tr_matmul(&q).max_abs_diff(&Matrix::identity(n)) < 1e-12);
                assert!((det(&q).unwrap() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn unitary_sample_fidelity_is_total_weight() {
        let mut rng = Rng::new(9);
        let u = random_orthogonal::<f64>(3, &mut rng);
        let sample = unitary_dynamics_sample(&u, None, 50, &mut rng).unwrap();
        let s = build_s(&sample).unwrap();
        let f = fidelity_kraus(&KrausSet::single(u).unwrap(), &s).unwrap();
        assert!((f - 50.0).abs() < 1e-10);
    }

    #[test]
    fn identity_dynamics_pairs_equal_up_to_sign() {
        let mut rng = Rng::new(1);
        let sample = unitary_dynamics_sample(&Matrix::<f64>::identity(2), None, 5, &mut rng).unwrap();
        for r in sample.records() {
            let a = r.input.as_pure().unwrap().amplitudes();
            let b = r.output.as_pure().unwrap().amplitudes();
            let d = crate::linalg::dot(a, b);
            assert!((d.abs() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn toy_channel_is_tp_rank_one() {
        let mut rng = Rng::new(5);
        let ch = toy_channel::<f64>(2, 3, &mut rng).unwrap();
        assert_eq!(ch.n_s(), 1);
        assert!(constraint_residual(&kraus_to_choi(&ch), ConstraintKind::TracePreserving) < 1e-9);
        assert!(toy_channel::<f64>(3, 2, &mut rng).is_err());
    }

    #[test]
    fn maxeig_sample_identities() {
        let mut rng = Rng::new(2);
        let ch = random_tp_channel::<f64>(3, 2, 6, &mut rng).unwrap();
        let (sample, f_init) = channel_maxeig_sample(&ch, 40, &mut rng).unwrap();
        assert!(f_init > 0.0 && f_init <= 40.0 + 1e-9);
        let s = build_s(&sample).unwrap();
        let f = crate::fidelity::fidelity_choi(&kraus_to_choi(&ch), &s).unwrap();
        assert!((f - f_init).abs() < 1e-9);

        let u = random_orthogonal::<f64>(3, &mut rng);
        let (_, f_init) = channel_maxeig_sample(&KrausSet::single(u).unwrap(), 20, &mut rng).unwrap();
        assert!((f_init - 20.0).abs() < 1e-10);
    }

    #[test]
    fn projective_true_operator_has_unit_ratio() {
        let mut rng = Rng::new(4);
        let (sample, p) = projective_sample::<f64>(4, 2, 60, &mut rng).unwrap();
        let s = build_s(&sample).unwrap();
        let q = build_q(&sample).unwrap();
        let r = fidelity_ratio(&KrausSet::single(p).unwrap(), &s, &q).unwrap();
        assert!((r - 1.0).abs() < 1e-12);
    }

    #[test]
    fn s_matrix_deterministic() {
        let a = random_s_matrix::<f64>(2, 3, &mut Rng::new(8));
        let b = random_s_matrix::<f64>(2, 3, &mut Rng::new(8));
        assert_eq!(a, b);
        assert_eq!(a.dim(), 6);
    }

    #[test]
    fn default_m() {
        assert_eq!(default_sample_size(3, 3), 1162);
        assert_eq!(default_sample_size(10, 10), 20_000);
    }
}
