use num_complex::Complex64;

use crate::charfun::Characteristic;
use crate::error::{Error, Result};
use crate::linalg::{deflation_candidates, Backend, Bordered};
use crate::sparse::{dot_t, norm2};

#[derive(Clone, Debug, PartialEq)]
pub struct Refined {
    pub s: Complex64,
    pub phi: Vec<Complex64>,
    pub residual: f64,
    pub iterations: usize,
}

/// `‖P(s)φ‖₂ / ‖φ‖₂`.
pub fn eig_residual(ch: &Characteristic, s: Complex64, phi: &[Complex64]) -> Result<f64> {
    let p = ch.eval(s)?;
    Ok(norm2(&p.mul_vec(phi)) / norm2(phi))
}

/// Vectors with `|φᵀφ| ≤ ISOTROPIC·‖φ‖²` cannot be scaled to `φᵀφ = 1`.
const ISOTROPIC: f64 = 1e-8;

fn is_isotropic(phi: &[Complex64]) -> bool {
    let n2 = norm2(phi);
    dot_t(phi, phi).norm() <= ISOTROPIC * n2 * n2
}

/// Scales `phi` so that `φᵀφ = 1` when that is possible, otherwise to unit
/// Euclidean norm.
pub fn normalize_t(phi: &mut [Complex64]) {
    let n2 = norm2(phi);
    if n2 == 0.0 {
        return;
    }
    let q = dot_t(phi, phi);
    let scale = if q.norm() > ISOTROPIC * n2 * n2 { q.sqrt() } else { Complex64::new(n2, 0.0) };
    phi.iter_mut().for_each(|v| *v /= scale);
}

/// Newton's method on `[P(s)φ; (φᵀφ - 1)/2] = 0`.
///
/// Converged when `‖P(s)φ‖/‖φ‖ ≤ tol` and `|φᵀφ - 1| ≤ tol`.
///
/// An isotropic start (`φᵀφ ≈ 0`, as for the eigenvectors `(1, ±j)` of a
/// rotation) makes that border singular. Such starts are instead pinned by
/// `φ0ᴴφ = 1` with `φ0` scaled to unit norm, and the result has unit
/// Euclidean norm.
///
/// A singular bordered Jacobian close to a root (residual below `1e-4`) is
/// reported as [`Error::Defective`]. Iterates that run off past `|s| = 1e8` or hit a
/// singular Jacobian far from any root give [`Error::NonConvergence`].
pub fn refine_newton(
    ch: &Characteristic,
    s0: Complex64,
    phi0: &[Complex64],
    tol: f64,
    max_iter: usize,
) -> Result<Refined> {
    let r = ch.dim();
    if phi0.len() != r {
        return Err(Error::Dimension(format!("eigenvector length {} for a model of size {r}", phi0.len())));
    }
    if norm2(phi0) == 0.0 || !phi0.iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
        return Err(Error::Config("initial eigenvector must be finite and nonzero".into()));
    }
    let mut phi = phi0.to_vec();
    normalize_t(&mut phi);
    let anchor: Option<Vec<Complex64>> = is_isotropic(&phi).then(|| phi.iter().map(|v| v.conj()).collect());
    let mut s = s0;
    let mut last = f64::INFINITY;
    let one = Complex64::new(1.0, 0.0);
    for it in 0..=max_iter {
        let p = match ch.eval(s) {
            Ok(p) => p,
            Err(e) if it == 0 => return Err(e),
            Err(_) => return Err(Error::NonConvergence { iterations: it, residual: last }),
        };
        let pphi = p.mul_vec(&phi);
        let res = norm2(&pphi) / norm2(&phi);
        let q = match &anchor {
            Some(a) => dot_t(a, &phi) - one,
            None => dot_t(&phi, &phi) - one,
        };
        if !res.is_finite() {
            return Err(Error::NonConvergence { iterations: it, residual: last });
        }
        last = res;
        if res <= tol && q.norm() <= tol {
            return Ok(Refined { s, phi, residual: res, iterations: it });
        }
        if it == max_iter {
            break;
        }
        let dp = ch.eval_ds(s).map_err(|_| Error::NonConvergence { iterations: it, residual: res })?;
        let b = vec![dp.mul_vec(&phi)];
        let c = vec![anchor.clone().unwrap_or_else(|| phi.clone())];
        let corner = vec![vec![Complex64::new(0.0, 0.0)]];
        let sys = Bordered { a: &p, b_cols: &b, c_cols: &c, corner: &corner };
        let f: Vec<Complex64> = pphi.iter().map(|v| -v).collect();
        let g = [if anchor.is_some() { -q } else { -q * 0.5 }];
        let weights: Vec<f64> = phi.iter().map(|v| v.norm()).collect();
        let cands = deflation_candidates(&weights, 3, |i| vec![i]);
        let (dphi, ds) = match sys.solve(&f, &g, &cands, Backend::Auto) {
            Ok(sol) => sol,
            Err(Error::SingularMatrix(_)) if res <= 1e-4 => return Err(Error::Defective { s }),
            Err(Error::SingularMatrix(_)) => return Err(Error::NonConvergence { iterations: it, residual: res }),
            Err(e) => return Err(e),
        };
        for (x, d) in phi.iter_mut().zip(&dphi) {
            *x += d;
        }
        s += ds[0];
        if !(s.norm() <= 1e8) {
            return Err(Error::NonConvergence { iterations: it + 1, residual: res });
        }
    }
    Err(Error::NonConvergence { iterations: max_iter, residual: last })
}
