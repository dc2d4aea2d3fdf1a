use crate::error::{dim_mismatch, Error, Result};
use crate::linalg::eig::sym_eig;
use crate::linalg::matrix::{Matrix, SymMatrix};
use crate::scalar::Scalar;

/// Default relative eigenvalue floor for [`inv_sqrt_psd`].
pub const DEFAULT_RANK_TOL: f64 = 1e-12;

/// Determinant by LU factorization with partial pivoting.
pub fn det<T: Scalar>(a: &Matrix<T>) -> Result<T> {
    if !a.is_square() {
        return Err(dim_mismatch("square matrix", format!("{}x{}", a.rows(), a.cols())));
    }
    let n = a.rows();
    let mut m = a.clone();
    let mut det = T::one();
    for c in 0..n {
        let p = (c..n)
            .max_by(|&i, &j| m[(i, c)].abs().partial_cmp(&m[(j, c)].abs()).unwrap_or(std::cmp::Ordering::Equal))
            .unwrap_or(c);
        if m[(p, c)] == T::zero() {
            return Ok(T::zero());
        }
        if p != c {
            for k in 0..n {
                let t = m[(c, k)];
                m[(c, k)] = m[(p, k)];
                m[(p, k)] = t;
            }
            det = -det;
        }
        let piv = m[(c, c)];
        det = det * piv;
        for i in (c + 1)..n {
            let f = m[(i, c)] / piv;
            for k in c..n {
                let v = m[(c, k)];
                m[(i, k)] -= f * v;
            }
        }
    }
    Ok(det)
}

/// `G^{-1/2}` through the eigendecomposition.
///
/// Fails with [`Error::SingularGram`] when any eigenvalue is at or below
/// `rank_tol` times the largest one.
pub fn inv_sqrt_psd<T: Scalar>(g: &SymMatrix<T>, rank_tol: T) -> Result<SymMatrix<T>> {
    let eig = sym_eig(g)?;
    let max = eig.max_value();
    let min = eig.min_value();
    if max <= T::zero() || min <= rank_tol * max {
        return Err(Error::SingularGram {
            min_eig: min.as_f64(),
            max_eig: max.as_f64(),
        });
    }
    Ok(eig.reconstruct_with(|v| T::one() / v.sqrt()))
}

/// Symmetric PSD square root; negative eigenvalues are clipped to zero.
pub fn sqrt_psd<T: Scalar>(g: &SymMatrix<T>) -> Result<SymMatrix<T>> {
    let eig = sym_eig(g)?;
    Ok(eig.reconstruct_with(|v| v.max(T::zero()).sqrt()))
}

/// Householder QR of a tall matrix: `a = Q R` with `Q` of shape `rows×cols`
/// having orthonormal columns and `R` upper triangular `cols×cols`.
pub fn qr<T: Scalar>(a: &Matrix<T>) -> Result<(Matrix<T>, Matrix<T>)> {
    let (m, n) = (a.rows(), a.cols());
    if m < n {
        return Err(dim_mismatch("rows >= cols", format!("{m}x{n}")));
    }
    if !a.is_finite() {
        return Err(Error::InvalidInput("non-finite entry in QR input".into()));
    }
    let mut r = a.clone();
    // Householder vectors, one per column
    let mut reflectors: Vec<Vec<T>> = Vec::with_capacity(n);
    for k in 0..n {
        let mut v: Vec<T> = (k..m).map(|i| r[(i, k)]).collect();
        let alpha = v.iter().fold(T::zero(), |s, &x| s + x * x).sqrt();
        if alpha == T::zero() {
            reflectors.push(vec![T::zero(); m - k]);
            continue;
        }
        let sign = if v[0] >= T::zero() { T::one() } else { -T::one() };
        v[0] += sign * alpha;
        let vnorm = v.iter().fold(T::zero(), |s, &x| s + x * x).sqrt();
        for x in v.iter_mut() {
            *x /= vnorm;
        }
        for j in k..n {
            let mut s = T::zero();
            for i in k..m {
                s += v[i - k] * r[(i, j)];
            }
            let two_s = s + s;
            for i in k..m {
                r[(i, j)] -= two_s * v[i - k];
            }
        }
        reflectors.push(v);
    }

    let mut q = Matrix::zeros(m, n);
    for j in 0..n {
        q[(j, j)] = T::one();
    }
    for k in (0..n).rev() {
        let v = &reflectors[k];
        for j in 0..n {
            let mut s = T::zero();
            for i in k..m {
                s += v[i - k] * q[(i, j)];
            }
            let two_s = s + s;
            for i in k..m {
                q[(i, j)] -= two_s * v[i - k];
            }
        }
    }
    let r_sq = Matrix::from_fn(n, n, |i, j| if i <= j { r[(i, j)] } else { T::zero() });
    Ok((q, r_sq))
}

/// Lower-triangular `L` with `L Lᵀ = a` for a PSD `a`.
///
/// Pivots below a relative tolerance are treated as zero (the column is
/// dropped), so rank-deficient PSD inputs factor cleanly. A pivot that is
/// significantly negative yields [`Error::NotPsd`].
pub fn cholesky_psd<T: Scalar>(a: &SymMatrix<T>) -> Result<Matrix<T>> {
    let n = a.dim();
    let scale = (0..n).fold(T::zero(), |m, i| m.max(a.get(i, i).abs()));
    let tol = T::of(1e-12) * T::of(n.max(1) as f64) * scale.max(T::min_positive_value());
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = a.get(j, j);
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d < -T::of(1e-8) * scale.max(T::min_positive_value()) {
            return Err(Error::NotPsd { min_eig: d.as_f64() });
        }
        if d <= tol {
            continue;
        }
        let ljj = d.sqrt();
        l[(j, j)] = ljj;
        for i in (j + 1)..n {
            let mut s = a.get(i, j);
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    Ok(l)
}

/// Strict Cholesky factor of a symmetric positive definite matrix.
pub fn cholesky<T: Scalar>(a: &SymMatrix<T>) -> Result<Matrix<T>> {
    let n = a.dim();
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = a.get(j, j);
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > T::zero()) || !d.is_finite() {
            return Err(Error::Factorization(format!(
                "non-positive pivot {:e} at column {j}",
                d.as_f64()
            )));
        }
        let ljj = d.sqrt();
        l[(j, j)] = ljj;
        for i in (j + 1)..n {
            let mut s = a.get(i, j);
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    Ok(l)
}

/// Solves `L x = b` column by column for lower-triangular `L`.
pub fn solve_lower<T: Scalar>(l: &Matrix<T>, b: &Matrix<T>) -> Matrix<T> {
    let n = l.rows();
    let mut x = b.clone();
    for c in 0..b.cols() {
        for i in 0..n {
            let mut s = x[(i, c)];
            for k in 0..i {
                s -= l[(i, k)] * x[(k, c)];
            }
            x[(i, c)] = s / l[(i, i)];
        }
    }
    x
}

/// Solves `Lᵀ x = b` for lower-triangular `L`.
pub fn solve_lower_tr<T: Scalar>(l: &Matrix<T>, b: &Matrix<T>) -> Matrix<T> {
    let n = l.rows();
    let mut x = b.clone();
    for c in 0..b.cols() {
        for i in (0..n).rev() {
            let mut s = x[(i, c)];
            for k in (i + 1)..n {
                s -= l[(k, i)] * x[(k, c)];
            }
            x[(i, c)] = s / l[(i, i)];
        }
    }
    x
}

/// Solves `a x = b` for symmetric positive definite `a`.
pub fn solve_spd<T: Scalar>(a: &SymMatrix<T>, b: &Matrix<T>) -> Result<Matrix<T>> {
    if b.rows() != a.dim() {
        return Err(dim_mismatch(a.dim(), b.rows()));
    }
    let l = cholesky(a)?;
    Ok(solve_lower_tr(&l, &solve_lower(&l, b)))
}

/// Inverse of a lower-triangular matrix.
pub fn invert_lower<T: Scalar>(l: &Matrix<T>) -> Matrix<T> {
    solve_lower(l, &Matrix::identity(l.rows()))
}
