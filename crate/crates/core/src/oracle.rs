//! Independent references for the tracker: refined spectra at fixed `p`,
//! brute-force roots of the scalar delay equation, trajectory comparison and
//! reproducible random models.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::Result;
use crate::init::{discretize, lift_eigenvector, refine_newton, solve_discretized, EigenEntry, Eigensolution};
use crate::model::{DelayTerm, DelayedLinearModel, ModelFamily};
use crate::sparse::SparseMat;
use crate::track::{InitSettings, Regime, Trajectory};

/// Refined spectrum of `family` at `p` near `shift`.
pub fn spectrum_at(family: &ModelFamily, p: f64, nodes: usize, shift: Complex64, count: usize) -> Result<Eigensolution> {
    spectrum_for(family, p, &InitSettings { nodes, shift, count }, &Regime::Multi, 1e-10)
}

/// Discretizes, solves near `init.shift`, lifts and Newton-refines every
/// candidate on the regime's characteristic function. Candidates that fail
/// to refine are dropped, and duplicates are merged.
pub fn spectrum_for(
    family: &ModelFamily,
    p: f64,
    init: &InitSettings,
    regime: &Regime,
    tol: f64,
) -> Result<Eigensolution> {
    let model = family.evaluate(p)?;
    let nodes = if model.delays.is_empty() { 0 } else { init.nodes };
    let pencil = discretize(&model, nodes)?;
    let raw = solve_discretized(&pencil, init.shift, init.count)?;
    let ch = regime.characteristic(&model);
    let mut entries: Vec<EigenEntry> = Vec::new();
    for e in &raw.entries {
        let phi = lift_eigenvector(&pencil, &e.phi);
        let Ok(out) = refine_newton(&ch, e.s, &phi, tol, 50) else { continue };
        if entries.iter().all(|x| (x.s - out.s).norm() > 1e-8 * out.s.norm().max(1.0)) {
            entries.push(EigenEntry { s: out.s, phi: out.phi, residual: out.residual });
        }
    }
    Ok(Eigensolution::new(entries))
}

/// Fewer roots than requested were found.
#[derive(Clone, Debug, PartialEq, thiserror::Error)]
#[error("found {} of {requested} requested roots", found.len())]
pub struct Shortfall {
    pub found: Vec<Complex64>,
    pub requested: usize,
}

fn hayes_newton(a: f64, b: f64, tau: f64, mut s: Complex64) -> Option<Complex64> {
    let g = |s: Complex64| s - a - b * (-s * tau).exp();
    for _ in 0..100 {
        let e = (-s * tau).exp();
        let gs = s - a - b * e;
        let dg = 1.0 + b * tau * e;
        if !(gs.re.is_finite() && gs.im.is_finite()) || dg.norm() == 0.0 {
            return None;
        }
        let step = gs / dg;
        s -= step;
        if step.norm() <= 1e-15 * s.norm().max(1.0) {
            break;
        }
        if s.re.abs() > 1e3 || s.im.abs() > 1e3 {
            return None;
        }
    }
    (g(s).norm() < 1e-12).then_some(s)
}

/// Roots of `s = a + b e^{-sτ}` by Newton from every point of the grid
/// `Re ∈ [-10, 2]`, `Im ∈ [0, 20]` with spacing 0.25.
///
/// Roots closer than 1e-8 are merged. The result lists the roots with
/// `Im ≥ 0` by descending real part, followed by the conjugates of the
/// complex ones in the same order.
pub fn hayes_roots(a: f64, b: f64, tau: f64, count: usize) -> std::result::Result<Vec<Complex64>, Shortfall> {
    assert!(tau > 0.0, "delay must be positive");
    let starts: Vec<Complex64> = (0..=48)
        .flat_map(|i| (0..=80).map(move |k| Complex64::new(-10.0 + 0.25 * i as f64, 0.25 * k as f64)))
        .collect();
    let mut upper: Vec<Complex64> = Vec::new();
    for s0 in starts {
        let Some(mut s) = hayes_newton(a, b, tau, s0) else { continue };
        if s.im < 0.0 {
            s = s.conj();
        }
        if s.im.abs() < 1e-12 * s.norm().max(1.0) {
            s.im = 0.0;
        }
        if upper.iter().all(|u| (u - s).norm() >= 1e-8) {
            upper.push(s);
        }
    }
    upper.sort_by(|x, y| y.re.total_cmp(&x.re).then(y.im.total_cmp(&x.im)));
    let conj: Vec<Complex64> = upper.iter().filter(|s| s.im > 0.0).map(|s| s.conj()).collect();
    upper.extend(conj);
    if upper.len() < count {
        return Err(Shortfall { found: upper, requested: count });
    }
    Ok(upper)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub p: f64,
    pub s_tracked: Complex64,
    /// `None` when the oracle failed at this point.
    pub s_oracle: Option<Complex64>,
    pub distance: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonReport {
    pub checkpoints: Vec<Checkpoint>,
    pub max_distance: f64,
    pub matched_fraction: f64,
    pub pass_tol: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompareOptions {
    pub pass_tol: f64,
    /// Newton tolerance for the oracle spectra.
    pub tol: f64,
    pub nodes: usize,
    pub count: usize,
}

impl Default for CompareOptions {
    fn default() -> Self {
        Self { pass_tol: 1e-6, tol: 1e-12, nodes: 16, count: 6 }
    }
}

/// Compares the tracked eigenvalue with an oracle spectrum at
/// `checkpoint_count` points spread evenly over the sampled range. Each
/// checkpoint snaps to the sample nearest its ideal position, so no
/// interpolation error enters the distance.
pub fn compare_trajectory(
    trajectory: &Trajectory,
    family: &ModelFamily,
    checkpoint_count: usize,
    options: &CompareOptions,
) -> ComparisonReport {
    let samples = &trajectory.samples;
    assert!(!samples.is_empty(), "trajectory has no samples");
    let (p_a, p_b) = (samples[0].p, samples[samples.len() - 1].p);
    let n = checkpoint_count.max(1);
    let picks: Vec<usize> = (0..n)
        .map(|i| {
            let target = if n == 1 { p_b } else { p_a + (p_b - p_a) * i as f64 / (n - 1) as f64 };
            (0..samples.len())
                .min_by(|&x, &y| (samples[x].p - target).abs().total_cmp(&(samples[y].p - target).abs()))
                .unwrap()
        })
        .collect();
    let regime = &trajectory.options.regime;
    let checkpoints: Vec<Checkpoint> = picks
        .par_iter()
        .map(|&idx| {
            let st = &samples[idx];
            let s = st.s();
            let init = InitSettings { nodes: options.nodes, shift: s, count: options.count };
            let oracle = spectrum_for(family, st.p, &init, regime, options.tol)
                .ok()
                .and_then(|sol| sol.nearest(s).map(|e| e.s));
            let distance = oracle.map_or(f64::INFINITY, |o| (o - s).norm());
            Checkpoint { p: st.p, s_tracked: s, s_oracle: oracle, distance }
        })
        .collect();
    let max_distance = checkpoints.iter().map(|c| c.distance).fold(0.0, f64::max);
    let matched = checkpoints.iter().filter(|c| c.distance < options.pass_tol).count();
    ComparisonReport {
        matched_fraction: matched as f64 / checkpoints.len() as f64,
        checkpoints,
        max_distance,
        pass_tol: options.pass_tol,
    }
}

/// Sparsity pattern of one row: a band of half-width `w` around the
/// diagonal, thinned so that each row has about `density·r` entries.
fn band_row(rng: &mut ChaCha8Rng, i: usize, r: usize, density: f64, w: usize) -> Vec<usize> {
    let lo = i.saturating_sub(w);
    let hi = (i + w).min(r - 1);
    let q = (density * r as f64 / (hi - lo + 1) as f64).min(1.0);
    (lo..=hi).filter(|_| rng.gen::<f64>() < q).collect()
}

fn random_banded(rng: &mut ChaCha8Rng, r: usize, density: f64, w: usize, amp: f64) -> SparseMat<f64> {
    let mut t = Vec::new();
    for i in 0..r {
        for j in band_row(rng, i, r, density, w) {
            t.push((i, j, amp * (2.0 * rng.gen::<f64>() - 1.0)));
        }
    }
    SparseMat::from_triplets(r, r, t)
}

/// Reproducible random sparse DDAE.
///
/// `E` is diagonal on the first `n_dyn` states and zero elsewhere. `A0` and
/// the `mu` delay matrices share a banded random pattern, and `A0` gets a
/// diagonal shift that makes every row diagonally dominant over all terms,
/// pushing the spectrum left and keeping the algebraic block regular.
/// Delays are drawn from `[0.01, 0.1]`.
pub fn rand_ddae(r: usize, n_dyn: usize, density: f64, mu: usize, seed: u64) -> DelayedLinearModel {
    assert!(r > 0 && n_dyn <= r, "need 0 < r and n_dyn <= r");
    assert!(density > 0.0 && density <= 1.0, "density must lie in (0, 1]");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = (r - 1).min(((2.0 * density * r as f64).ceil() as usize).max(2));

    let e = SparseMat::from_triplets(r, r, (0..n_dyn).map(|i| (i, i, 0.5 + rng.gen::<f64>())).collect::<Vec<_>>());
    let a0_raw = random_banded(&mut rng, r, density, w, 1.0);
    let amp = 0.5 / mu.max(1) as f64;
    let delays: Vec<DelayTerm> = (0..mu)
        .map(|_| {
            let tau = 0.01 + 0.09 * rng.gen::<f64>();
            DelayTerm::new(tau, random_banded(&mut rng, r, density, w, amp))
        })
        .collect();

    let mut shift = vec![1.0; r];
    for (i, j, v) in a0_raw.iter() {
        if i != j {
            shift[i] += v.abs();
        }
    }
    for d in &delays {
        for (i, _, v) in d.matrix.iter() {
            shift[i] += v.abs();
        }
    }
    let a0 = SparseMat::from_triplets(
        r,
        r,
        a0_raw
            .iter()
            .filter(|(i, j, _)| i != j)
            .chain((0..r).map(|i| (i, i, -shift[i] - 0.5 * rng.gen::<f64>())))
            .collect::<Vec<_>>(),
    );
    DelayedLinearModel::new(e, a0, delays).with_n_dyn(n_dyn)
}
