#![allow(dead_code)]

use delaytrack::charfun::WamsSpec;
use delaytrack::model::{DelayTerm, DelayedLinearModel, ModelDerivatives, ModelFamily};
use delaytrack::oracle::spectrum_for;
use delaytrack::sparse::SparseMat;
use delaytrack::track::{InitSettings, Regime, TrackState};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// `x' = -x(t - p)`.
pub fn hayes_family() -> ModelFamily {
    ModelFamily::delay_parameter(DelayedLinearModel::scalar(1.0, 0.0, &[(1.0, -1.0)]), 0, (0.5, 3.0)).unwrap()
}

/// `A0(p) = [[0, 1], [-1, -p]]`, roots `(-p ± sqrt(p² - 4))/2`.
pub fn quadratic_family() -> ModelFamily {
    let base = DelayedLinearModel::from_dense(
        &[vec![1.0, 0.0], vec![0.0, 1.0]],
        &[vec![0.0, 1.0], vec![-1.0, 0.0]],
        &[],
    );
    let slope = ModelDerivatives {
        d_e: SparseMat::zeros(2, 2),
        d_a0: SparseMat::from_dense(&[vec![0.0, 0.0], vec![0.0, -1.0]]),
        d_delays: vec![],
    };
    ModelFamily::affine(base, slope, (0.05, 1.2)).unwrap()
}

pub fn quadratic_root(p: f64) -> Complex64 {
    (c(-p, 0.0) + c(p * p - 4.0, 0.0).sqrt()) / 2.0
}

/// Companion family `[[0, 1], [p - 2, -2]]` with roots `-1 ± sqrt(p - 1)`;
/// the pair meets on the real axis at `p = 1`.
pub fn fold_family() -> ModelFamily {
    let base = DelayedLinearModel::from_dense(
        &[vec![1.0, 0.0], vec![0.0, 1.0]],
        &[vec![0.0, 1.0], vec![-2.0, -2.0]],
        &[],
    );
    let slope = ModelDerivatives {
        d_e: SparseMat::zeros(2, 2),
        d_a0: SparseMat::from_dense(&[vec![0.0, 0.0], vec![1.0, 0.0]]),
        d_delays: vec![],
    };
    ModelFamily::affine(base, slope, (0.0, 2.0)).unwrap()
}

/// Non-normal 2×2 family tabulated from `A0(p)` whose complex pair has real
/// part `-p² + 3p - 2`: unstable between the crossings near 1 and 2, stable
/// again past the second. Knots sit at `0.47 + 0.06k`, off both crossings.
pub fn two_crossing_family() -> ModelFamily {
    let snapshots = (0..=36)
        .map(|k| {
            let p = 0.47 + 0.06 * k as f64;
            let a = 3.0 * p - p * p;
            let m = DelayedLinearModel::from_dense(
                &[vec![1.0, 0.0], vec![0.0, 1.0]],
                &[vec![a - 2.5, -2.0], vec![3.0, a - 1.5]],
                &[],
            );
            (p, m)
        })
        .collect();
    ModelFamily::tabulated(snapshots).unwrap()
}

/// Two-state model with one delay whose matrices drift with `p`.
pub fn single_delay_family() -> ModelFamily {
    let base = DelayedLinearModel::from_dense(
        &[vec![1.0, 0.0], vec![0.0, 1.0]],
        &[vec![-0.4, 1.0], vec![-1.5, -0.3]],
        &[(0.6, vec![vec![-0.3, 0.1], vec![0.2, -0.25]])],
    );
    let slope = ModelDerivatives {
        d_e: SparseMat::zeros(2, 2),
        d_a0: SparseMat::from_dense(&[vec![0.1, 0.0], vec![-0.5, 0.2]]),
        d_delays: vec![SparseMat::from_dense(&[vec![0.0, 0.3], vec![-0.1, 0.0]])],
    };
    ModelFamily::affine(base, slope, (0.0, 2.0)).unwrap()
}

/// Three states, one algebraic, two delays.
pub fn multi_delay_family() -> ModelFamily {
    let base = DelayedLinearModel::from_dense(
        &[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 0.0]],
        &[vec![-0.5, 1.2, 0.3], vec![-1.0, -0.4, 0.0], vec![0.5, 0.0, -1.0]],
        &[
            (0.3, vec![vec![-0.2, 0.0, 0.0], vec![0.1, -0.3, 0.0], vec![0.0, 0.0, 0.0]]),
            (0.9, vec![vec![0.0, 0.15, 0.0], vec![-0.2, 0.0, 0.1], vec![0.0, 0.0, 0.0]]),
        ],
    )
    .with_n_dyn(2);
    let slope = ModelDerivatives {
        d_e: SparseMat::zeros(3, 3),
        d_a0: SparseMat::from_dense(&[vec![0.2, 0.0, 0.0], vec![0.0, 0.0, 0.4], vec![0.0, 0.0, 0.0]]),
        d_delays: vec![
            SparseMat::from_dense(&[vec![0.0, 0.0, 0.0], vec![-0.3, 0.0, 0.0], vec![0.0, 0.0, 0.0]]),
            SparseMat::from_dense(&[vec![0.0, 0.1, 0.0], vec![0.0, 0.0, 0.0], vec![0.0, 0.0, 0.0]]),
        ],
    };
    ModelFamily::affine(base, slope, (0.0, 2.0)).unwrap()
}

/// Two-state delay-parameter family over the second of two delays.
pub fn delay_param_family() -> ModelFamily {
    let model = DelayedLinearModel::from_dense(
        &[vec![1.0, 0.0], vec![0.0, 1.0]],
        &[vec![-0.2, 1.0], vec![-1.0, -0.1]],
        &[(0.4, vec![vec![-0.1, 0.0], vec![0.0, -0.1]]), (1.0, vec![vec![0.0, 0.0], vec![-0.5, -0.2]])],
    );
    ModelFamily::delay_parameter(model, 1, (0.2, 3.0)).unwrap()
}

pub fn wams_spec() -> WamsSpec {
    WamsSpec::new(0.1, 0.1, 0.02, 1e-3, 2.0).unwrap()
}

/// Two-state model whose single delayed term goes through the WAMS channel.
pub fn wams_family() -> ModelFamily {
    let base = DelayedLinearModel::from_dense(
        &[vec![1.0, 0.0], vec![0.0, 1.0]],
        &[vec![-0.3, 1.0], vec![-2.0, -0.2]],
        &[(0.1, vec![vec![0.0, 0.0], vec![-0.4, -0.3]])],
    );
    let slope = ModelDerivatives {
        d_e: SparseMat::zeros(2, 2),
        d_a0: SparseMat::zeros(2, 2),
        d_delays: vec![SparseMat::from_dense(&[vec![0.0, 0.0], vec![-0.2, -0.1]])],
    };
    ModelFamily::affine(base, slope, (0.0, 3.0)).unwrap()
}

/// Refined eigenpair nearest `shift` with a non-negative imaginary part.
pub fn refined_state(family: &ModelFamily, regime: &Regime, p: f64, shift: Complex64) -> TrackState {
    let init = InitSettings { nodes: 16, shift, count: 6 };
    let sol = spectrum_for(family, p, &init, regime, 1e-13).expect("spectrum");
    let e = sol
        .entries
        .iter()
        .filter(|e| e.s.im >= 0.0)
        .min_by(|a, b| (a.s - shift).norm().total_cmp(&(b.s - shift).norm()))
        .expect("no eigenvalue in the upper half plane");
    TrackState::new(p, e.s, &e.phi, e.residual)
}

pub fn random_sparse(rng: &mut ChaCha8Rng, r: usize, density: f64) -> SparseMat<f64> {
    let mut t = Vec::new();
    for i in 0..r {
        for j in 0..r {
            if rng.gen::<f64>() < density {
                t.push((i, j, rng.gen_range(-1.0..1.0)));
            }
        }
    }
    SparseMat::from_triplets(r, r, t)
}

pub fn random_model(rng: &mut ChaCha8Rng, r: usize, mu: usize) -> DelayedLinearModel {
    let delays = (0..mu).map(|_| DelayTerm::new(rng.gen_range(0.05..2.0), random_sparse(rng, r, 0.4))).collect();
    DelayedLinearModel::new(random_sparse(rng, r, 0.4), random_sparse(rng, r, 0.4), delays)
}

pub fn random_derivs(rng: &mut ChaCha8Rng, model: &DelayedLinearModel) -> ModelDerivatives {
    let r = model.dim();
    ModelDerivatives {
        d_e: random_sparse(rng, r, 0.3),
        d_a0: random_sparse(rng, r, 0.4),
        d_delays: model.delays.iter().map(|_| random_sparse(rng, r, 0.4)).collect(),
    }
}

pub fn random_state(rng: &mut ChaCha8Rng, r: usize, p: f64) -> TrackState {
    let s = c(rng.gen_range(-2.0..1.0), rng.gen_range(-6.0..6.0));
    let phi: Vec<Complex64> = (0..r).map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
    TrackState::new(p, s, &phi, 0.0)
}

type CMat = Vec<Vec<Complex64>>;

fn cdense(m: &SparseMat<f64>) -> CMat {
    m.to_dense().into_iter().map(|row| row.into_iter().map(|v| c(v, 0.0)).collect()).collect()
}

fn axpy_mat(acc: &mut CMat, a: Complex64, m: &SparseMat<f64>) {
    for (i, j, v) in m.iter() {
        acc[i][j] += a * v;
    }
}

fn matvec(m: &CMat, x: &[Complex64]) -> Vec<Complex64> {
    m.iter().map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum()).collect()
}

/// Packet-dropout and jitter transfers with their s-derivatives, written
/// from the unreduced formulas.
pub fn wams_transfer(spec: &WamsSpec, s: Complex64) -> (Complex64, Complex64) {
    if spec.constant_delay {
        return (c(1.0, 0.0), c(0.0, 0.0));
    }
    let p = spec.p_dr;
    let z = (-s * spec.period).exp();
    let dz = -spec.period * z;
    let q = z / (1.0 - p * z);
    let dq = dz / ((1.0 - p * z) * (1.0 - p * z));
    let bracket = 1.0 + (p - 1.0) * q;
    let hp = (1.0 - p) / s * bracket;
    let dhp = -(1.0 - p) / (s * s) * bracket + (1.0 - p) / s * (p - 1.0) * dq;
    let k = spec.alpha / (1.0 - p);
    let base = 1.0 + k * s;
    let (hs, dhs) = if spec.shape == 0.0 || spec.alpha == 0.0 {
        (c(1.0, 0.0), c(0.0, 0.0))
    } else {
        let hs = (base.ln() * -spec.shape).exp();
        (hs, -spec.shape * k * hs / base)
    };
    (hp * hs, dhp * hs + hp * dhs)
}

/// `(M, h)` of the continuation system built straight from complex
/// arithmetic: `Q φ̇ + X ṡ = b`, `φᵀ φ̇ = 0`, split into real and imaginary
/// parts.
pub fn split_oracle(
    regime: &Regime,
    model: &DelayedLinearModel,
    derivs: &ModelDerivatives,
    state: &TrackState,
) -> (Vec<Vec<f64>>, Vec<f64>) {
    let r = model.dim();
    let s = state.s();
    let phi = state.phi();
    let zero = vec![vec![c(0.0, 0.0); r]; r];
    let mut q = zero.clone();
    let mut dq = cdense(&model.e);
    let mut dpp = zero;
    axpy_mat(&mut q, s, &model.e);
    axpy_mat(&mut q, c(-1.0, 0.0), &model.a0);
    axpy_mat(&mut dpp, s, &derivs.d_e);
    axpy_mat(&mut dpp, c(-1.0, 0.0), &derivs.d_a0);
    match regime {
        Regime::Wams(spec) => {
            let (g, dg) = wams_transfer(spec, s);
            let f = (-s * spec.tau0).exp();
            let big_g = g * f;
            let big_dg = dg * f - spec.tau0 * g * f;
            axpy_mat(&mut q, -big_g, &model.delays[0].matrix);
            axpy_mat(&mut dq, -big_dg, &model.delays[0].matrix);
            axpy_mat(&mut dpp, -big_g, &derivs.d_delays[0]);
        }
        _ => {
            for (j, d) in model.delays.iter().enumerate() {
                let f = (-s * d.tau).exp();
                axpy_mat(&mut q, -f, &d.matrix);
                axpy_mat(&mut dq, d.tau * f, &d.matrix);
                axpy_mat(&mut dpp, -f, &derivs.d_delays[j]);
                if *regime == (Regime::DelayParam { index: j }) {
                    // d/dτ of -A e^{-sτ}
                    axpy_mat(&mut dpp, s * f, &d.matrix);
                }
            }
        }
    }
    let x = matvec(&dq, &phi);
    let b: Vec<Complex64> = matvec(&dpp, &phi).into_iter().map(|v| -v).collect();

    let n = 2 * r + 2;
    let mut m = vec![vec![0.0; n]; n];
    for i in 0..r {
        for j in 0..r {
            m[i][j] = q[i][j].re;
            m[i][r + j] = -q[i][j].im;
            m[r + i][j] = q[i][j].im;
            m[r + i][r + j] = q[i][j].re;
        }
        m[i][2 * r] = x[i].re;
        m[r + i][2 * r] = x[i].im;
        m[i][2 * r + 1] = -x[i].im;
        m[r + i][2 * r + 1] = x[i].re;
        m[2 * r][i] = phi[i].re;
        m[2 * r][r + i] = -phi[i].im;
        m[2 * r + 1][i] = phi[i].im;
        m[2 * r + 1][r + i] = phi[i].re;
    }
    let mut h: Vec<f64> = b.iter().map(|v| v.re).collect();
    h.extend(b.iter().map(|v| v.im));
    h.extend([0.0, 0.0]);
    (m, h)
}

/// Largest entrywise difference, each scaled by `max(1, |reference|)`.
pub fn scaled_gap(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .map(|(x, y)| (x - y).abs() / y.abs().max(1.0))
        .fold(0.0, f64::max)
}

pub fn scaled_gap_vec(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs() / y.abs().max(1.0)).fold(0.0, f64::max)
}

/// Peak resident set size of this process in bytes.
pub fn peak_rss() -> Option<u64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    let kb: u64 = line.split_whitespace().nth(1)?.parse().ok()?;
    Some(kb * 1024)
}
