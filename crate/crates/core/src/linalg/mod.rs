//! Dense real linear algebra kernels.

mod decomp;
mod eig;
mod matrix;

pub use decomp::{
    cholesky, cholesky_psd, det, invert_lower, inv_sqrt_psd, qr, solve_lower, solve_lower_tr, solve_spd,
    sqrt_psd, DEFAULT_RANK_TOL,
};
pub use eig::{sym_eig, EigDecomposition};
pub use matrix::{dot, norm2, Matrix, SymMatrix};
