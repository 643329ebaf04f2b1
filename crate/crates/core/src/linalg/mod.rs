//! Sparse storage, envelope factorization and eigensolvers for Hermitian
//! generalized eigenproblems `K x = λ M x`.

mod eigen;
mod ldl;
mod lobpcg;
mod sparse;
mod tridiag;

pub use eigen::{
    dense_eigenvalues, dense_gevp, relative_residual, shift_below_spectrum, solve_gevp_smallest, EigOptions,
    EigResult, Method,
};
pub use ldl::{envelope_size, rcm_ordering, Factorization};
pub use lobpcg::{lobpcg, BlockOperator, LobpcgOptions, LobpcgResult};
pub use sparse::{axpy, dot, norm2, CsrMatrix, Scalar};
pub use tridiag::SymTridiagonal;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LinalgError {
    #[error("factorization broke down at pivot {index}")]
    Breakdown { index: usize },
    #[error("matrix is singular (zero pivot at {index})")]
    Singular { index: usize },
    #[error("mass matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("no admissible shift below the spectrum was found")]
    NoShift,
    #[error("eigensolver did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },
    #[error("invalid request: {0}")]
    BadRequest(String),
}
