//! Initial eigenpairs: Chebyshev collocation of the delay eigenproblem, a
//! shift-invert eigensolve of the resulting pencil, and Newton refinement on
//! the exact characteristic function.

mod collocation;
mod eigs;
mod newton;

use num_complex::Complex64;

pub use collocation::{barycentric_weights, cheb_diff, cheb_nodes, discretize, lift_eigenvector, DiscretizedPencil};
pub use eigs::{solve_discretized, solve_discretized_with, EigOptions, DENSE_EIG_LIMIT, INFINITE_THRESHOLD};
pub use newton::{eig_residual, normalize_t, refine_newton, Refined};

#[derive(Clone, Debug, PartialEq)]
pub struct EigenEntry {
    pub s: Complex64,
    pub phi: Vec<Complex64>,
    pub residual: f64,
}

/// Eigenpairs ordered by descending real part, ties broken by descending
/// imaginary part.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Eigensolution {
    pub entries: Vec<EigenEntry>,
}

impl Eigensolution {
    pub fn new(mut entries: Vec<EigenEntry>) -> Self {
        // Real parts are compared on a 1e-9 grid so that a conjugate pair,
        // whose real parts differ by rounding, always lists +Im first.
        let key = |s: Complex64| (s.re * 1e9).round();
        entries.sort_by(|a, b| {
            key(b.s).total_cmp(&key(a.s)).then(b.s.im.total_cmp(&a.s.im)).then(b.s.re.total_cmp(&a.s.re))
        });
        Self { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn values(&self) -> Vec<Complex64> {
        self.entries.iter().map(|e| e.s).collect()
    }

    /// The entry closest to `target`.
    pub fn nearest(&self, target: Complex64) -> Option<&EigenEntry> {
        self.entries
            .iter()
            .min_by(|a, b| (a.s - target).norm().total_cmp(&(b.s - target).norm()))
    }
}
