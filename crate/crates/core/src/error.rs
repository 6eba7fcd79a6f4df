use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter {p} outside the admissible range [{lo}, {hi}]")]
    Range { p: f64, lo: f64, hi: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite evaluation at s = {s}")]
    NonFinite { s: Complex64 },

    #[error("singularity: {0}")]
    Singularity(String),

    #[error("linear system is singular to working precision ({0})")]
    SingularMatrix(String),

    #[error("shifted pencil is singular at shift {shift}; retry with a perturbed shift")]
    SingularShift { shift: Complex64 },

    #[error("bordered Jacobian is singular: defective eigenvalue near s = {s}")]
    Defective { s: Complex64 },

    #[error("Newton iteration did not converge after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("Arnoldi iteration did not converge after {restarts} restarts (worst residual {residual:.3e})")]
    Arnoldi { restarts: usize, residual: f64 },

    #[error("eigensolver failure: {0}")]
    Eigensolver(String),

    #[error("reinitialization found no candidate with eigenvector overlap >= {threshold} (best {best:.3})")]
    ReinitFailed { threshold: f64, best: f64 },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
