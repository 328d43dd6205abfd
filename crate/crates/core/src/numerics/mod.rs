//! Sparse storage, Jacobi-preconditioned CG, small dense symmetric
//! eigenvalues and generalized power iteration.

mod cg;
mod dense;
mod power;
mod sparse;

pub use cg::{cg_solve, pcg, CgOutcome, LinearOperator, DEFAULT_RTOL};
pub use dense::{jacobi_eigs, DenseSymmetric};
pub use power::{generalized_power_iteration, PowerOutcome};
pub use sparse::{axpy, dot, norm2, norm_inf, SparseRect, SparseSymmetric};
