//! LU-based linear solves over [`SparseMat`], dense or sparse depending on
//! size, plus the bordered solve used by the tracker and the Newton corrector.

use faer::linalg::solvers::PartialPivLu;
use faer::prelude::*;
use faer::sparse::linalg::solvers::Lu as SparseLu;
use faer::sparse::{SparseColMat, Triplet};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::sparse::{Scalar, SparseMat};

/// Systems at or below this dimension are factored densely.
pub const DENSE_LIMIT: usize = 400;

/// Largest tolerated amplification `‖A‖·‖x‖/‖b‖` before a solve is declared
/// singular to working precision.
const MAX_GROWTH: f64 = 1.0 / (64.0 * f64::EPSILON);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Backend {
    #[default]
    Auto,
    Dense,
    Sparse,
}

impl Backend {
    fn dense_for(self, n: usize) -> bool {
        match self {
            Backend::Auto => n <= DENSE_LIMIT,
            Backend::Dense => true,
            Backend::Sparse => false,
        }
    }
}

enum Factor<T> {
    Dense(PartialPivLu<T>),
    Sparse(SparseLu<usize, T>),
}

pub struct LuSolver<T> {
    factor: Factor<T>,
    n: usize,
    norm_inf: f64,
}

pub(crate) fn to_dense<T: Scalar>(a: &SparseMat<T>) -> Mat<T> {
    let mut m = Mat::<T>::zeros(a.nrows(), a.ncols());
    for (i, j, v) in a.iter() {
        m[(i, j)] = v;
    }
    m
}

fn to_faer_sparse<T: Scalar>(a: &SparseMat<T>) -> Result<SparseColMat<usize, T>> {
    let triplets: Vec<_> = a.iter().map(|(i, j, v)| Triplet::new(i, j, v)).collect();
    SparseColMat::try_new_from_triplets(a.nrows(), a.ncols(), &triplets)
        .map_err(|e| Error::Config(format!("sparse matrix construction failed: {e:?}")))
}

fn col_from<T: Scalar>(b: &[T]) -> Mat<T> {
    Mat::from_fn(b.len(), 1, |i, _| b[i])
}

fn max_abs<T: Scalar>(x: &[T]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.modulus()))
}

impl<T: Scalar> LuSolver<T> {
    pub fn factor(a: &SparseMat<T>) -> Result<Self> {
        Self::factor_with(a, Backend::Auto)
    }

    pub fn factor_with(a: &SparseMat<T>, backend: Backend) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::Dimension(format!("LU of non-square {}x{} matrix", n, a.ncols())));
        }
        if !a.is_finite() {
            return Err(Error::SingularMatrix("matrix has non-finite entries".into()));
        }
        let norm_inf = a.norm_inf();
        let factor = if backend.dense_for(n) {
            let lu = to_dense(a).partial_piv_lu();
            let diag: Vec<f64> = (0..n).map(|i| lu.U()[(i, i)].modulus()).collect();
            let hi = diag.iter().cloned().fold(0.0, f64::max);
            let lo = diag.iter().cloned().fold(f64::INFINITY, f64::min);
            if n > 0 && (hi == 0.0 || lo <= 64.0 * f64::EPSILON * hi) {
                return Err(Error::SingularMatrix(format!(
                    "pivot ratio {:.3e} in dense LU",
                    if hi > 0.0 { lo / hi } else { 0.0 }
                )));
            }
            Factor::Dense(lu)
        } else {
            let sp = to_faer_sparse(a)?;
            let lu = sp
                .sp_lu()
                .map_err(|e| Error::SingularMatrix(format!("sparse LU: {e:?}")))?;
            Factor::Sparse(lu)
        };
        Ok(Self { factor, n, norm_inf })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.factor, Factor::Dense(_))
    }

    /// Solves without the growth check; callers that expect near-singular
    /// systems (shift-invert, inverse iteration) use this.
    pub fn solve_unchecked(&self, b: &[T]) -> Vec<T> {
        assert_eq!(b.len(), self.n, "right-hand side length mismatch");
        let rhs = col_from(b);
        let x = match &self.factor {
            Factor::Dense(lu) => lu.solve(&rhs),
            Factor::Sparse(lu) => lu.solve(&rhs),
        };
        (0..self.n).map(|i| x[(i, 0)]).collect()
    }

    /// Solves for a block of right-hand sides at once.
    pub fn solve_mat_unchecked(&self, b: &Mat<T>) -> Mat<T> {
        assert_eq!(b.nrows(), self.n, "right-hand side row count mismatch");
        match &self.factor {
            Factor::Dense(lu) => lu.solve(b),
            Factor::Sparse(lu) => lu.solve(b),
        }
    }

    pub fn solve(&self, b: &[T]) -> Result<Vec<T>> {
        let x = self.solve_unchecked(b);
        if x.iter().any(|v| !v.is_finite_value()) {
            return Err(Error::SingularMatrix("non-finite solution".into()));
        }
        let bn = max_abs(b);
        let xn = max_abs(&x);
        if bn > 0.0 && self.norm_inf * xn > MAX_GROWTH * bn {
            return Err(Error::SingularMatrix(format!(
                "solution growth {:.3e}",
                self.norm_inf * xn / bn
            )));
        }
        Ok(x)
    }
}

/// Dense `k×k` solve that rejects numerically singular systems by a
/// singular-value condition test.
fn solve_small<T: Scalar>(s: &Mat<T>, rhs: &[T]) -> Result<Vec<T>> {
    let k = s.nrows();
    if k == 0 {
        return Ok(Vec::new());
    }
    let sv = s
        .singular_values()
        .map_err(|e| Error::SingularMatrix(format!("svd of Schur complement: {e:?}")))?;
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(smax > 0.0) || smin <= 1e-13 * smax {
        return Err(Error::SingularMatrix(format!(
            "Schur complement condition {:.3e}",
            if smin > 0.0 { smax / smin } else { f64::INFINITY }
        )));
    }
    let lu = s.partial_piv_lu();
    let x = lu.solve(&col_from(rhs));
    Ok((0..k).map(|i| x[(i, 0)]).collect())
}

/// Bordered linear system
///
/// ```text
/// [ A   B ] [x]   [f]
/// [ Cᵀ  D ] [y] = [g]
/// ```
///
/// with sparse square `A` (n×n), dense `B`, `C` (n×k, stored by column) and a
/// dense corner `D` (k×k, row-major). `A` itself may be singular; only the
/// full matrix has to be regular.
pub struct Bordered<'a, T> {
    pub a: &'a SparseMat<T>,
    pub b_cols: &'a [Vec<T>],
    pub c_cols: &'a [Vec<T>],
    pub corner: &'a [Vec<T>],
}

impl<T: Scalar> Bordered<'_, T> {
    fn check(&self) -> Result<(usize, usize)> {
        let n = self.a.nrows();
        let k = self.b_cols.len();
        let ok = self.a.ncols() == n
            && self.c_cols.len() == k
            && self.corner.len() == k
            && self.corner.iter().all(|r| r.len() == k)
            && self.b_cols.iter().chain(self.c_cols).all(|c| c.len() == n);
        if !ok {
            return Err(Error::Dimension("inconsistent bordered system blocks".into()));
        }
        Ok((n, k))
    }

    /// The full `(n+k)×(n+k)` matrix.
    pub fn assemble(&self) -> SparseMat<T> {
        let n = self.a.nrows();
        let k = self.b_cols.len();
        let mut t: Vec<(usize, usize, T)> = self.a.iter().collect();
        for (c, col) in self.b_cols.iter().enumerate() {
            t.extend(col.iter().enumerate().filter(|(_, v)| **v != T::zero()).map(|(i, &v)| (i, n + c, v)));
        }
        for (r, col) in self.c_cols.iter().enumerate() {
            t.extend(col.iter().enumerate().filter(|(_, v)| **v != T::zero()).map(|(j, &v)| (n + r, j, v)));
        }
        for (i, row) in self.corner.iter().enumerate() {
            t.extend(row.iter().enumerate().filter(|(_, v)| **v != T::zero()).map(|(j, &v)| (n + i, n + j, v)));
        }
        SparseMat::from_triplets(n + k, n + k, t)
    }

    /// Solves the system. `deflation` lists candidate index sets used to
    /// regularize a singular `A` on the sparse path; they are tried in order.
    pub fn solve(&self, f: &[T], g: &[T], deflation: &[Vec<usize>], backend: Backend) -> Result<(Vec<T>, Vec<T>)> {
        let (n, k) = self.check()?;
        if f.len() != n || g.len() != k {
            return Err(Error::Dimension("bordered right-hand side length".into()));
        }
        if backend.dense_for(n + k) {
            let full = self.assemble();
            let lu = LuSolver::factor_with(&full, Backend::Dense)?;
            let rhs: Vec<T> = f.iter().chain(g).copied().collect();
            let z = lu.solve(&rhs)?;
            return Ok((z[..n].to_vec(), z[n..].to_vec()));
        }
        let mut last_err = Error::SingularMatrix("no deflation candidates supplied".into());
        for idx in deflation {
            match self.solve_deflated(f, g, idx) {
                Ok(sol) => return Ok(sol),
                // A singular Schur complement means the full matrix is singular;
                // trying other deflation sets cannot help.
                Err(e @ Error::SingularMatrix(_)) if is_schur_failure(&e) => return Err(e),
                Err(e) => last_err = e,
            }
        }
        Err(last_err)
    }

    fn solve_deflated(&self, f: &[T], g: &[T], idx: &[usize]) -> Result<(Vec<T>, Vec<T>)> {
        let n = self.a.nrows();
        let k = self.b_cols.len();
        let d = idx.len();
        let delta = T::from_real(self.a.max_abs().max(1.0));
        let shifted = {
            let extra = idx.iter().map(|&i| (i, i, delta));
            SparseMat::from_triplets(n, n, self.a.iter().chain(extra))
        };
        let lu = LuSolver::factor_with(&shifted, Backend::Sparse)?;
        // Extended border: columns [B, -δ e_i], rows [C, e_i], corner diag(D, -I).
        let mut ext_b: Vec<Vec<T>> = self.b_cols.to_vec();
        let mut ext_c: Vec<Vec<T>> = self.c_cols.to_vec();
        for &i in idx {
            let mut u = vec![T::zero(); n];
            u[i] = -delta;
            ext_b.push(u);
            let mut v = vec![T::zero(); n];
            v[i] = T::from_real(1.0);
            ext_c.push(v);
        }
        let m = k + d;
        let inv_b: Vec<Vec<T>> = ext_b.iter().map(|b| lu.solve(b)).collect::<Result<_>>()?;

        let solve_once = |f: &[T], g: &[T]| -> Result<(Vec<T>, Vec<T>)> {
            let inv_f = lu.solve(f)?;
            let mut schur = Mat::<T>::zeros(m, m);
            let mut rhs = vec![T::zero(); m];
            for r in 0..m {
                for c in 0..m {
                    let corner = if r < k && c < k {
                        self.corner[r][c]
                    } else if r == c {
                        T::from_real(-1.0)
                    } else {
                        T::zero()
                    };
                    schur[(r, c)] = corner - crate::sparse::dot_t(&ext_c[r], &inv_b[c]);
                }
                let gr = if r < k { g[r] } else { T::zero() };
                rhs[r] = gr - crate::sparse::dot_t(&ext_c[r], &inv_f);
            }
            let z = solve_small(&schur, &rhs).map_err(|e| match e {
                Error::SingularMatrix(msg) => Error::SingularMatrix(format!("{SCHUR_TAG}: {msg}")),
                other => other,
            })?;
            let mut x = inv_f;
            for (c, zc) in z.iter().enumerate() {
                for (xi, bi) in x.iter_mut().zip(&inv_b[c]) {
                    *xi += -(*bi * *zc);
                }
            }
            Ok((x, z[..k].to_vec()))
        };

        let (mut x, mut y) = solve_once(f, g)?;
        // One step of iterative refinement against the original system.
        let (rf, rg) = self.residual(&x, &y, f, g);
        let (dx, dy) = solve_once(&rf, &rg)?;
        for (a, b) in x.iter_mut().zip(&dx) {
            *a += *b;
        }
        for (a, b) in y.iter_mut().zip(&dy) {
            *a += *b;
        }
        let (rf, rg) = self.residual(&x, &y, f, g);
        let scale = self.a.norm_inf().max(1.0) * (max_abs(&x) + max_abs(&y)) + max_abs(f) + max_abs(g);
        let res = max_abs(&rf).max(max_abs(&rg));
        if !(res <= 1e-8 * scale) {
            return Err(Error::SingularMatrix(format!("deflated solve residual {res:.3e}")));
        }
        Ok((x, y))
    }

    fn residual(&self, x: &[T], y: &[T], f: &[T], g: &[T]) -> (Vec<T>, Vec<T>) {
        let mut rf: Vec<T> = self.a.mul_vec(x);
        for (c, col) in self.b_cols.iter().enumerate() {
            for (r, v) in rf.iter_mut().zip(col) {
                *r += *v * y[c];
            }
        }
        let rf = f.iter().zip(&rf).map(|(a, b)| *a - *b).collect();
        let rg = (0..y.len())
            .map(|r| {
                let mut v = crate::sparse::dot_t(&self.c_cols[r], x);
                for (c, yc) in y.iter().enumerate() {
                    v += self.corner[r][c] * *yc;
                }
                g[r] - v
            })
            .collect();
        (rf, rg)
    }
}

const SCHUR_TAG: &str = "schur";

fn is_schur_failure(e: &Error) -> bool {
    matches!(e, Error::SingularMatrix(msg) if msg.starts_with(SCHUR_TAG))
}

/// Candidate deflation sets: the positions of the `count` largest entries of
/// `weights`, each expanded through `expand`.
pub fn deflation_candidates(weights: &[f64], count: usize, expand: impl Fn(usize) -> Vec<usize>) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]).then(a.cmp(&b)));
    order.into_iter().take(count).map(expand).collect()
}

/// Eigenvalues and right eigenvectors (columns) of a dense complex matrix.
pub fn eig_dense(m: &Mat<Complex64>) -> Result<(Vec<Complex64>, Mat<Complex64>)> {
    let evd = m
        .eigen()
        .map_err(|e| Error::Eigensolver(format!("dense eigendecomposition: {e:?}")))?;
    let values = (0..m.nrows()).map(|i| evd.S()[i]).collect();
    Ok((values, evd.U().to_owned()))
}
