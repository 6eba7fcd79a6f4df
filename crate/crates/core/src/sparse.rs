//! Compressed sparse row storage shared by the model, the characteristic
//! function and the continuation system.

use std::fmt::Debug;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use num_complex::Complex64;

/// Field element usable in sparse storage and in the LU back ends.
pub trait Scalar:
    Copy
    + Debug
    + PartialEq
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + Mul<f64, Output = Self>
    + faer::traits::ComplexField<Real = f64>
{
    fn zero() -> Self;
    fn from_real(x: f64) -> Self;
    fn modulus(self) -> f64;
    fn is_finite_value(self) -> bool;
    fn conjugate(self) -> Self;
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn from_real(x: f64) -> Self {
        x
    }
    fn modulus(self) -> f64 {
        self.abs()
    }
    fn is_finite_value(self) -> bool {
        self.is_finite()
    }
    fn conjugate(self) -> Self {
        self
    }
}

impl Scalar for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn from_real(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    fn modulus(self) -> f64 {
        self.norm()
    }
    fn is_finite_value(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
    fn conjugate(self) -> Self {
        self.conj()
    }
}

/// CSR matrix with sorted, duplicate-free column indices per row.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMat<T> {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<T>,
}

impl<T: Scalar> SparseMat<T> {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            row_ptr: vec![0; nrows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            nrows: n,
            ncols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![T::from_real(1.0); n],
        }
    }

    /// Builds a matrix from `(row, col, value)` entries. Duplicates are summed.
    ///
    /// Panics if an index is out of bounds.
    pub fn from_triplets<I>(nrows: usize, ncols: usize, entries: I) -> Self
    where
        I: IntoIterator<Item = (usize, usize, T)>,
    {
        let mut entries: Vec<(usize, usize, T)> = entries.into_iter().collect();
        for &(i, j, _) in &entries {
            assert!(
                i < nrows && j < ncols,
                "entry ({i}, {j}) outside {nrows}x{ncols}"
            );
        }
        entries.sort_by_key(|&(i, j, _)| (i, j));
        let mut row_ptr = vec![0usize; nrows + 1];
        let mut col_idx = Vec::with_capacity(entries.len());
        let mut values: Vec<T> = Vec::with_capacity(entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in entries {
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(j);
                values.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..nrows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// Row-major dense input; exact zeros are not stored.
    pub fn from_dense(rows: &[Vec<T>]) -> Self {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        let entries = rows.iter().enumerate().flat_map(|(i, row)| {
            assert_eq!(row.len(), ncols, "ragged dense input");
            row.iter()
                .enumerate()
                .filter(|(_, v)| **v != T::zero())
                .map(move |(j, v)| (i, j, *v))
        });
        Self::from_triplets(nrows, ncols, entries)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.nrows, self.ncols)
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => T::zero(),
        }
    }

    pub fn row(&self, i: usize) -> (&[usize], &[T]) {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[range.clone()], &self.values[range])
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        (0..self.nrows).flat_map(move |i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).map(move |(&j, &v)| (i, j, v))
        })
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// True when every stored value is zero (or nothing is stored).
    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| *v == T::zero())
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite_value())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.modulus()))
    }

    /// Induced infinity norm (max absolute row sum).
    pub fn norm_inf(&self) -> f64 {
        (0..self.nrows)
            .map(|i| self.row(i).1.iter().map(|v| v.modulus()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U) -> SparseMat<U> {
        SparseMat {
            nrows: self.nrows,
            ncols: self.ncols,
            row_ptr: self.row_ptr.clone(),
            col_idx: self.col_idx.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scale(&self, a: T) -> Self {
        self.map(|v| v * a)
    }

    pub fn transpose(&self) -> Self {
        Self::from_triplets(self.ncols, self.nrows, self.iter().map(|(i, j, v)| (j, i, v)))
    }

    /// `y = self * x`
    pub fn mul_vec<U>(&self, x: &[U]) -> Vec<U>
    where
        U: Scalar,
        T: Into<U>,
    {
        assert_eq!(x.len(), self.ncols, "dimension mismatch in mat-vec");
        (0..self.nrows)
            .map(|i| {
                let (cols, vals) = self.row(i);
                cols.iter()
                    .zip(vals)
                    .fold(U::zero(), |acc, (&j, &v)| acc + v.into() * x[j])
            })
            .collect()
    }

    /// Adds `scale * self` into the block of `out` anchored at `(row0, col0)`.
    pub fn push_block(&self, out: &mut Vec<(usize, usize, T)>, row0: usize, col0: usize, scale: T) {
        out.extend(self.iter().map(|(i, j, v)| (row0 + i, col0 + j, v * scale)));
    }

    pub fn to_dense(&self) -> Vec<Vec<T>> {
        let mut out = vec![vec![T::zero(); self.ncols]; self.nrows];
        for (i, j, v) in self.iter() {
            out[i][j] = v;
        }
        out
    }
}

impl SparseMat<f64> {
    /// `Σ_k coef_k · mat_k` over a union sparsity pattern.
    pub fn combine<U: Scalar>(nrows: usize, ncols: usize, terms: &[(U, &SparseMat<f64>)]) -> SparseMat<U> {
        let entries = terms.iter().flat_map(|(coef, m)| {
            assert_eq!(m.shape(), (nrows, ncols), "shape mismatch in combination");
            m.iter().map(move |(i, j, v)| (i, j, *coef * v))
        });
        SparseMat::from_triplets(nrows, ncols, entries)
    }

    pub fn to_complex(&self) -> SparseMat<Complex64> {
        self.map(Complex64::from_real)
    }
}

impl<T: Scalar> Add for &SparseMat<T> {
    type Output = SparseMat<T>;

    fn add(self, rhs: &SparseMat<T>) -> SparseMat<T> {
        assert_eq!(self.shape(), rhs.shape(), "shape mismatch in addition");
        SparseMat::from_triplets(self.nrows, self.ncols, self.iter().chain(rhs.iter()))
    }
}

impl<T: Scalar> Sub for &SparseMat<T> {
    type Output = SparseMat<T>;

    fn sub(self, rhs: &SparseMat<T>) -> SparseMat<T> {
        assert_eq!(self.shape(), rhs.shape(), "shape mismatch in subtraction");
        SparseMat::from_triplets(
            self.nrows,
            self.ncols,
            self.iter().chain(rhs.iter().map(|(i, j, v)| (i, j, -v))),
        )
    }
}

/// Euclidean norm of a vector.
pub fn norm2<T: Scalar>(x: &[T]) -> f64 {
    x.iter().map(|v| v.modulus().powi(2)).sum::<f64>().sqrt()
}

/// Unconjugated bilinear product `xᵀ y`.
pub fn dot_t<T: Scalar>(x: &[T], y: &[T]) -> T {
    x.iter().zip(y).fold(T::zero(), |acc, (&a, &b)| acc + a * b)
}
