//! Raw classical vectors `x → f` to state pairs.
//!
//! With the sample Gram `G = (1/M) Σ x xᵀ`, the state attached to `x` is
//! `G⁻¹x / √(xᵀG⁻¹x)`, unit norm in the metric `G`. Its coordinates in a
//! `G`-orthonormal basis are `G^{-1/2}x / ‖G^{-1/2}x‖`, which is what is
//! stored, so every emitted state is a plain Euclidean unit vector.

use crate::channel::PureState;
use crate::error::{dim_mismatch, Error, Result};
use crate::fidelity::{MappingRecord, MappingSample, State};
use crate::linalg::{dot, inv_sqrt_psd, norm2, Matrix, SymMatrix};
use crate::scalar::Scalar;

const GRAM_RANK_TOL: f64 = 1e-12;

fn whiten<T: Scalar>(vs: &[Vec<T>], what: &str) -> Result<Vec<Vec<T>>> {
    let dim = vs[0].len();
    if dim == 0 {
        return Err(Error::InvalidInput(format!("{what} vectors are empty")));
    }
    let mut g = Matrix::zeros(dim, dim);
    for (l, v) in vs.iter().enumerate() {
        if v.len() != dim {
            return Err(dim_mismatch(dim, format!("{what}[{l}] of length {}", v.len())));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput(format!("{what}[{l}] has non-finite entries")));
        }
        for i in 0..dim {
            for j in 0..dim {
                g[(i, j)] += v[i] * v[j];
            }
        }
    }
    let g = SymMatrix::from_matrix(&g.scale(T::one() / T::of(vs.len() as f64)))?;
    let w = inv_sqrt_psd(&g, T::of(GRAM_RANK_TOL)).map_err(|e| match e {
        Error::SingularGram { min_eig, max_eig } => Error::DegenerateData(format!(
            "{what} Gram matrix is singular (eigenvalues {min_eig:e} .. {max_eig:e})"
        )),
        other => other,
    })?;
    vs.iter()
        .enumerate()
        .map(|(l, v)| {
            let u = w.as_matrix().matvec(v);
            if norm2(&u).as_f64() <= 1e-300 {
                return Err(Error::DegenerateData(format!("{what}[{l}] is the zero vector")));
            }
            let n = norm2(&u);
            Ok(u.into_iter().map(|x| x / n).collect())
        })
        .collect()
}

/// Whitened, normalized state pairs with `ω = ν = 1`.
pub fn classical_transform<T: Scalar>(xs: &[Vec<T>], fs: &[Vec<T>]) -> Result<MappingSample<T>> {
    if xs.is_empty() || xs.len() != fs.len() {
        return Err(Error::InvalidInput(format!(
            "need equally many non-zero x and f vectors, got {} and {}",
            xs.len(),
            fs.len()
        )));
    }
    let psi = whiten(xs, "x")?;
    let phi = whiten(fs, "f")?;
    let records = psi
        .into_iter()
        .zip(phi)
        .map(|(a, b)| Ok(MappingRecord::pure(PureState::new(a)?, PureState::new(b)?)))
        .collect::<Result<Vec<_>>>()?;
    MappingSample::new(records, None)
}

/// Re-expresses inputs and outputs in bases built by Gram–Schmidt over the
/// records in order, each basis vector signed to overlap its source record
/// positively.
///
/// Whitened coordinates of linearly transformed data differ only by an
/// orthogonal rotation, which this frame removes; the result depends on the
/// data only through its gauge class.
pub fn canonical_frame<T: Scalar>(sample: &MappingSample<T>) -> Result<MappingSample<T>> {
    let mut ins = Vec::with_capacity(sample.len());
    let mut outs = Vec::with_capacity(sample.len());
    for r in sample.records() {
        match (&r.input, &r.output) {
            (State::Pure(a), State::Pure(b)) => {
                ins.push(a.amplitudes().to_vec());
                outs.push(b.amplitudes().to_vec());
            }
            _ => return Err(Error::InvalidInput("canonical_frame needs pure states".into())),
        }
    }
    let bx = gram_schmidt_basis(&ins, "x")?;
    let bf = gram_schmidt_basis(&outs, "f")?;
    let records = sample
        .records()
        .iter()
        .zip(ins.iter().zip(&outs))
        .map(|(r, (a, b))| {
            Ok(MappingRecord {
                input: State::Pure(PureState::normalized(bx.matvec(a))?),
                output: State::Pure(PureState::normalized(bf.matvec(b))?),
                omega: r.omega,
                nu: r.nu,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    MappingSample::new(records, sample.seed())
}

/// Rows form an orthonormal basis.
fn gram_schmidt_basis<T: Scalar>(vs: &[Vec<T>], what: &str) -> Result<Matrix<T>> {
    let dim = vs[0].len();
    let mut basis: Vec<Vec<T>> = Vec::with_capacity(dim);
    for v in vs {
        if basis.len() == dim {
            break;
        }
        let mut r = v.clone();
        // two passes for numerical orthogonality
        for _ in 0..2 {
            for e in &basis {
                let c = dot(e, &r);
                for (x, &y) in r.iter_mut().zip(e) {
                    *x -= c * y;
                }
            }
        }
        let nr = norm2(&r);
        if nr.as_f64() > 1e-6 * norm2(v).as_f64() {
            basis.push(r.into_iter().map(|x| x / nr).collect());
        }
    }
    if basis.len() < dim {
        return Err(Error::DegenerateData(format!(
            "{what} records span only {} of {dim} dimensions",
            basis.len()
        )));
    }
    Ok(Matrix::from_fn(dim, dim, |i, j| basis[i][j]))
}
