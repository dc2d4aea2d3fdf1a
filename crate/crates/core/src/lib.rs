//! Quantum channel reconstruction from classical input/output samples.
//!
//! Channels are real-valued and represented either by Kraus operators
//! ([`KrausSet`]) or by a Choi matrix in the swapped-index layout
//! ([`ChoiMatrix`], multi-index `i = j·n + k` with `j` the output and `k` the
//! input index). Two reconstruction routes are provided:
//!
//! * [`sdp`]: a primal-dual interior-point solver for
//!   `max Tr(J S)` subject to linear partial-trace constraints and `J ⪰ 0`;
//! * [`lowrank`]: a fixed-Kraus-rank eigenvalue iteration over
//!   lower-triangular (Cholesky-gauge) Kraus matrices.
//!
//! All numerics are generic over [`Scalar`] (`f32`/`f64`); the `*64`
//! aliases below fix the common double-precision instantiation.

pub mod channel;
pub mod datagen;
mod error;
pub mod fidelity;
pub mod linalg;
pub mod lowrank;
mod scalar;
pub mod sdp;

pub use channel::{ChoiMatrix, ConstraintKind, DensityMatrix, KrausSet, PureState};
pub use error::{Error, Result};
pub use fidelity::{DenominatorTensor, FidelityTensor, MappingRecord, MappingSample};
pub use linalg::{EigDecomposition, Matrix, SymMatrix};
pub use scalar::Scalar;

pub type Matrix64 = Matrix<f64>;
pub type SymMatrix64 = SymMatrix<f64>;
pub type PureState64 = PureState<f64>;
pub type DensityMatrix64 = DensityMatrix<f64>;
pub type KrausSet64 = KrausSet<f64>;
pub type ChoiMatrix64 = ChoiMatrix<f64>;
pub type FidelityTensor64 = FidelityTensor<f64>;
pub type DenominatorTensor64 = DenominatorTensor<f64>;
pub type MappingSample64 = MappingSample<f64>;
pub type Matrix32 = Matrix<f32>;
pub type SymMatrix32 = SymMatrix<f32>;
