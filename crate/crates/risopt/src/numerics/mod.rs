//! Dense complex linear algebra kernels.
//!
//! Everything downstream (phase solvers, SINR computations, the lifted
//! semidefinite steps) runs on the small dense Hermitian problems produced by
//! surfaces with at most a few hundred elements, so the kernels here favor
//! robustness and bit-level reproducibility over asymptotic tricks:
//!
//! * [`hermitian_eig`]: cyclic Jacobi rotations on the full matrix,
//! * [`psd_project`]: eigenvalue clipping at zero,
//! * [`solve_hpd`]: Cholesky factorization with explicit pivot checks,
//! * [`generalized_rayleigh_max`]: principal generalized eigenvector of a
//!   pair of rank-one-plus-scaled-identity matrices.
//!
//! All matrices are dense, row-major [`ComplexMatrix`] values; vectors are
//! plain `Vec<Complex64>` slices.

mod eig;
mod matrix;
mod rayleigh;
mod solve;

pub use eig::{hermitian_eig, hermitian_eig_with, psd_project, JacobiConfig};
pub use matrix::{vdot, vnorm, vnorm_sq, ComplexMatrix};
pub use rayleigh::generalized_rayleigh_max;
pub use solve::{cholesky_lower, solve_hpd, solve_hpd_vec};

pub(crate) use solve::{back_sub_adjoint, forward_sub, solve_real_general};

/// Errors produced by the linear algebra kernels.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NumericsError {
    #[error("operation requires a square matrix, got {rows}x{cols}")]
    NonSquare { rows: usize, cols: usize },

    #[error("matrix is not Hermitian: max |A - A^H| entry deviation {deviation:e} exceeds tolerance")]
    NotHermitian { deviation: f64 },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("matrix is singular or not positive definite: Cholesky pivot {pivot:e} at index {index}")]
    SingularPivot { index: usize, pivot: f64 },

    #[error("Jacobi sweep limit {sweeps} reached with off-diagonal mass {off:e} still above tolerance")]
    NoConvergence { sweeps: usize, off: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
