use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::DelayedLinearModel;
use crate::sparse::SparseMat;

/// Finite generalized pencil `(ΣA, ΣE)` approximating the delay eigenproblem.
///
/// Block `k` (rows and columns `k·r .. (k+1)·r`) holds the history value at
/// `node_map[k]`; block 0 is the segment endpoint `θ = 0`.
#[derive(Clone, Debug)]
pub struct DiscretizedPencil {
    pub sigma_a: SparseMat<f64>,
    pub sigma_e: SparseMat<f64>,
    pub nodes: usize,
    pub block: usize,
    pub node_map: Vec<f64>,
}

impl DiscretizedPencil {
    pub fn dim(&self) -> usize {
        self.sigma_a.nrows()
    }
}

/// Chebyshev–Gauss–Lobatto points `cos(kπ/N)` on `[-1, 1]`, descending.
pub fn cheb_nodes(n: usize) -> Vec<f64> {
    if n == 0 {
        return vec![1.0];
    }
    (0..=n)
        .map(|k| (std::f64::consts::PI * k as f64 / n as f64).cos())
        .collect()
}

/// Spectral differentiation matrix on the CGL nodes (row-major), with the
/// diagonal set by the negative row sum.
pub fn cheb_diff(n: usize) -> Vec<Vec<f64>> {
    let x = cheb_nodes(n);
    let m = n + 1;
    let weight = |k: usize| if k == 0 || k == n { 2.0 } else { 1.0 };
    let mut d = vec![vec![0.0; m]; m];
    for i in 0..m {
        for j in 0..m {
            if i != j {
                let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
                d[i][j] = weight(i) / weight(j) * sign / (x[i] - x[j]);
            }
        }
        d[i][i] = -d[i].iter().sum::<f64>();
    }
    d
}

/// Barycentric interpolation weights at `t` for the CGL nodes.
pub fn barycentric_weights(n: usize, t: f64) -> Vec<f64> {
    let x = cheb_nodes(n);
    if let Some(k) = x.iter().position(|&xk| (t - xk).abs() <= 4.0 * f64::EPSILON) {
        let mut w = vec![0.0; n + 1];
        w[k] = 1.0;
        return w;
    }
    let raw: Vec<f64> = (0..=n)
        .map(|k| {
            let base = if k == 0 || k == n { 0.5 } else { 1.0 };
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            sign * base / (t - x[k])
        })
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}

/// Single-interval collocation of the delay eigenproblem on `[-τ_max, 0]`.
///
/// Interior block rows carry the scaled differentiation operator; the
/// endpoint block row carries `E x' = A0 x(0) + Σ A_j x(-τ_j)`, with each
/// `x(-τ_j)` interpolated from the nodes. Delay-free models reduce to
/// `(A0, E)` regardless of `n`.
pub fn discretize(model: &DelayedLinearModel, n: usize) -> Result<DiscretizedPencil> {
    model.ensure_valid()?;
    let r = model.dim();
    if model.delays.is_empty() {
        return Ok(DiscretizedPencil {
            sigma_a: model.a0.clone(),
            sigma_e: model.e.clone(),
            nodes: 0,
            block: r,
            node_map: vec![0.0],
        });
    }
    if n < 2 {
        return Err(Error::Config(format!(
            "collocation degree {n} too small for a delayed model (need at least 2)"
        )));
    }
    let tau_max = model.tau_max();
    let x = cheb_nodes(n);
    let node_map: Vec<f64> = x.iter().map(|&xk| tau_max * (xk - 1.0) / 2.0).collect();
    let scale = 2.0 / tau_max;
    let d = cheb_diff(n);
    let size = (n + 1) * r;

    let mut a: Vec<(usize, usize, f64)> = Vec::new();
    let mut e: Vec<(usize, usize, f64)> = Vec::new();
    model.a0.push_block(&mut a, 0, 0, 1.0);
    model.e.push_block(&mut e, 0, 0, 1.0);
    for term in &model.delays {
        let t = 1.0 - 2.0 * term.tau / tau_max;
        for (m, w) in barycentric_weights(n, t).into_iter().enumerate() {
            if w != 0.0 {
                term.matrix.push_block(&mut a, 0, m * r, w);
            }
        }
    }
    for k in 1..=n {
        for (m, &dkm) in d[k].iter().enumerate() {
            if dkm != 0.0 {
                a.extend((0..r).map(|i| (k * r + i, m * r + i, scale * dkm)));
            }
        }
        e.extend((0..r).map(|i| (k * r + i, k * r + i, 1.0)));
    }
    Ok(DiscretizedPencil {
        sigma_a: SparseMat::from_triplets(size, size, a),
        sigma_e: SparseMat::from_triplets(size, size, e),
        nodes: n,
        block: r,
        node_map,
    })
}

/// Restricts a discretized eigenvector to the `θ = 0` block.
pub fn lift_eigenvector(pencil: &DiscretizedPencil, v: &[Complex64]) -> Vec<Complex64> {
    assert_eq!(v.len(), pencil.dim(), "eigenvector length does not match the pencil");
    v[..pencil.block].to_vec()
}
