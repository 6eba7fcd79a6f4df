//! Nearest-to-shift eigenvalues of the collocation pencil, via shift-invert.
//!
//! Both paths work on `B = (ΣA - σΣE)⁻¹ ΣE`, whose eigenvalues `θ` map back
//! to `λ = σ + 1/θ`. Infinite eigenvalues of a singular `ΣE` land at `θ = 0`.

use faer::Mat;
use num_complex::Complex64;

use super::{DiscretizedPencil, EigenEntry, Eigensolution};
use crate::error::{Error, Result};
use crate::linalg::{eig_dense, to_dense, Backend, LuSolver};
use crate::sparse::{norm2, SparseMat};

/// Dimension up to which the pencil is reduced densely.
pub const DENSE_EIG_LIMIT: usize = 2000;

/// Discretized eigenvalues above this magnitude are treated as infinite.
pub const INFINITE_THRESHOLD: f64 = 1e8;

#[derive(Clone, Debug)]
pub struct EigOptions {
    pub dense_limit: usize,
    /// Relative residual `‖Bx - θx‖ ≤ tol·|θ|` for Arnoldi convergence.
    pub tol: f64,
    pub max_restarts: usize,
    /// Krylov subspace size; `0` picks one from `count`.
    pub subspace: usize,
}

impl Default for EigOptions {
    fn default() -> Self {
        Self { dense_limit: DENSE_EIG_LIMIT, tol: 1e-10, max_restarts: 60, subspace: 0 }
    }
}

pub fn solve_discretized(pencil: &DiscretizedPencil, shift: Complex64, count: usize) -> Result<Eigensolution> {
    solve_discretized_with(pencil, shift, count, &EigOptions::default())
}

/// Returns the `count` finite eigenpairs nearest to `shift`. `phi` holds the
/// full discretized vector and `residual` the pencil residual
/// `‖(ΣA - λΣE)v‖/‖v‖`. A shift that hits an eigenvalue is nudged and
/// retried a few times before [`Error::SingularShift`] is returned.
pub fn solve_discretized_with(
    pencil: &DiscretizedPencil,
    shift: Complex64,
    count: usize,
    opts: &EigOptions,
) -> Result<Eigensolution> {
    if count == 0 {
        return Err(Error::Config("eigenvalue count must be at least 1".into()));
    }
    let n = pencil.dim();
    if n == 0 {
        return Err(Error::Dimension("empty pencil".into()));
    }
    let a = pencil.sigma_a.to_complex();
    let e = pencil.sigma_e.to_complex();
    let scale = 1.0 + shift.norm();
    for attempt in 0..4 {
        let sigma = if attempt == 0 {
            shift
        } else {
            let angle = 0.7 + attempt as f64;
            shift + Complex64::from_polar(1e-7 * scale * 10f64.powi(attempt - 1), angle)
        };
        let k = &a - &e.scale(sigma);
        let dense = n <= opts.dense_limit;
        let lu = match LuSolver::factor_with(&k, if dense { Backend::Dense } else { Backend::Sparse }) {
            Ok(lu) => lu,
            Err(Error::SingularMatrix(_)) => continue,
            Err(other) => return Err(other),
        };
        let thetas = if dense {
            dense_shift_invert(&lu, &e)?
        } else {
            arnoldi(&lu, &e, count, opts)?
        };
        let mut pairs: Vec<(Complex64, Vec<Complex64>)> = thetas
            .into_iter()
            .filter(|(t, _)| t.norm() > 0.0)
            .map(|(t, v)| (sigma + t.inv(), v))
            .filter(|(l, _)| l.re.is_finite() && l.im.is_finite() && l.norm() <= INFINITE_THRESHOLD)
            .collect();
        pairs.sort_by(|x, y| (x.0 - shift).norm().total_cmp(&(y.0 - shift).norm()));
        pairs.truncate(count);
        let entries = pairs
            .into_iter()
            .map(|(s, v)| {
                let r = &a - &e.scale(s);
                let res = norm2(&r.mul_vec(&v)) / norm2(&v).max(f64::MIN_POSITIVE);
                EigenEntry { s, phi: v, residual: res }
            })
            .collect();
        return Ok(Eigensolution::new(entries));
    }
    Err(Error::SingularShift { shift })
}

fn dense_shift_invert(lu: &LuSolver<Complex64>, e: &SparseMat<Complex64>) -> Result<Vec<(Complex64, Vec<Complex64>)>> {
    let b = lu.solve_mat_unchecked(&to_dense(e));
    let (vals, vecs) = eig_dense(&b)?;
    let n = b.nrows();
    Ok(vals
        .into_iter()
        .enumerate()
        .map(|(i, t)| (t, (0..n).map(|r| vecs[(r, i)]).collect()))
        .collect())
}

fn cdot(x: &[Complex64], y: &[Complex64]) -> Complex64 {
    x.iter().zip(y).map(|(a, b)| a.conj() * b).sum()
}

fn orthogonalize(basis: &[Vec<Complex64>], w: &mut [Complex64]) -> f64 {
    // Two passes of classical Gram-Schmidt keep the basis orthonormal to
    // working precision.
    for _ in 0..2 {
        for v in basis {
            let h = cdot(v, w);
            for (wi, vi) in w.iter_mut().zip(v) {
                *wi -= h * vi;
            }
        }
    }
    norm2(w)
}

fn start_vector(n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|i| {
            let t = i as f64;
            Complex64::new(1.0 + 0.5 * (0.37 * t).sin(), 0.25 * (1.3 * t).cos())
        })
        .collect()
}

/// Restarted shift-invert Arnoldi with explicit Rayleigh-Ritz projection.
/// Each cycle keeps the wanted Ritz vectors and extends them by Krylov
/// vectors of the operator.
fn arnoldi(
    lu: &LuSolver<Complex64>,
    e: &SparseMat<Complex64>,
    count: usize,
    opts: &EigOptions,
) -> Result<Vec<(Complex64, Vec<Complex64>)>> {
    let n = lu.dim();
    let op = |x: &[Complex64]| lu.solve_unchecked(&e.mul_vec(x));
    let m = if opts.subspace > 0 { opts.subspace } else { (3 * count + 20).max(40) }.min(n);
    let keep = count.min(m.saturating_sub(1)).max(1);

    let mut seeds: Vec<Vec<Complex64>> = vec![start_vector(n)];
    let mut worst = f64::INFINITY;
    for _restart in 0..=opts.max_restarts {
        let mut basis: Vec<Vec<Complex64>> = Vec::with_capacity(m);
        let mut images: Vec<Vec<Complex64>> = Vec::with_capacity(m);
        for s in &seeds {
            let mut w = s.clone();
            let nrm = orthogonalize(&basis, &mut w);
            if nrm > 1e-12 {
                w.iter_mut().for_each(|x| *x /= nrm);
                images.push(op(&w));
                basis.push(w);
            }
        }
        while basis.len() < m {
            let mut w = images.last().expect("basis is seeded").clone();
            let before = norm2(&w);
            let nrm = orthogonalize(&basis, &mut w);
            if nrm <= 1e-13 * before.max(1.0) {
                break;
            }
            w.iter_mut().for_each(|x| *x /= nrm);
            images.push(op(&w));
            basis.push(w);
        }
        let k = basis.len();
        let g = Mat::from_fn(k, k, |i, j| cdot(&basis[i], &images[j]));
        let (vals, vecs) = eig_dense(&g)?;
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&x, &y| vals[y].norm().total_cmp(&vals[x].norm()));

        let mut ritz = Vec::with_capacity(keep);
        worst = 0.0f64;
        for &idx in order.iter().take(keep) {
            let theta = vals[idx];
            let mut x = vec![Complex64::new(0.0, 0.0); n];
            let mut bx = vec![Complex64::new(0.0, 0.0); n];
            for j in 0..k {
                let c = vecs[(j, idx)];
                for ((xi, bi), (vj, wj)) in x.iter_mut().zip(bx.iter_mut()).zip(basis[j].iter().zip(&images[j])) {
                    *xi += c * vj;
                    *bi += c * wj;
                }
            }
            let xn = norm2(&x);
            x.iter_mut().for_each(|v| *v /= xn);
            bx.iter_mut().for_each(|v| *v /= xn);
            let res: f64 = norm2(&bx.iter().zip(&x).map(|(b, xi)| b - theta * xi).collect::<Vec<_>>());
            worst = worst.max(res / theta.norm().max(f64::MIN_POSITIVE));
            ritz.push((theta, x));
        }
        if worst <= opts.tol || k == n {
            return Ok(ritz);
        }
        seeds = ritz.into_iter().map(|(_, x)| x).collect();
    }
    Err(Error::Arnoldi { restarts: opts.max_restarts, residual: worst })
}
