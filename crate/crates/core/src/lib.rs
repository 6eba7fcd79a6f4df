//! Eigenvalue continuation for parameterized linear delay
//! differential-algebraic systems.
//!
//! A [`model::ModelFamily`] maps a scalar parameter `p` to the matrices of
//! `E x'(t) = A0 x(t) + Σ A_j x(t - τ_j)`. Eigenpairs of the characteristic
//! function ([`charfun`]) are initialized by collocation ([`init`]) and then
//! followed in `p` by integrating the differentiated eigenproblem
//! ([`track`]). [`oracle`] holds independent references used for checking.

pub mod charfun;
pub mod error;
pub mod init;
pub mod linalg;
pub mod model;
pub mod oracle;
pub mod sparse;
pub mod track;

pub use error::{Error, Result};
pub use num_complex::Complex64;
