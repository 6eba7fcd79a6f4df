//! Real block form `M(y) ẏ = h(y)` of the differentiated eigenproblem
//! `P(s,p)φ = 0`, `φᵀφ = 1`, for each delay regime.
//!
//! With `Q = P(s)` and `X = (∂P/∂s) φ` the complex equation is
//! `Q φ̇ + X ṡ = -(∂P/∂p) φ`; the blocks below are its real/imaginary split
//! written with the usual `C = A h_r`, `S = A h_i` shorthand, where
//! `e^{-sτ} = h_r - j h_i`.

use num_complex::Complex64;

use super::{ContinuationSystem, Regime, TrackState};
use crate::charfun::{delay_factor, transfer, WamsSpec};
use crate::error::{Error, Result};
use crate::model::{DelayedLinearModel, ModelDerivatives};
use crate::sparse::SparseMat;

struct Parts {
    re_q: SparseMat<f64>,
    im_q: SparseMat<f64>,
    x_r: Vec<f64>,
    x_i: Vec<f64>,
    b_r: Vec<f64>,
    b_i: Vec<f64>,
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// `(h_r, h_i)` with `e^{-sτ} = h_r - j h_i`.
fn delay_parts(s: Complex64, tau: f64) -> Result<(f64, f64)> {
    let f = delay_factor(s, tau)?;
    Ok((f.re, -f.im))
}

fn check_dims(model: &DelayedLinearModel, derivs: &ModelDerivatives, state: &TrackState) -> Result<()> {
    let r = model.dim();
    if state.phi_r.len() != r || state.phi_i.len() != r {
        return Err(Error::Dimension(format!("state of size {} for a model of size {r}", state.phi_r.len())));
    }
    if derivs.d_delays.len() != model.delay_count() || derivs.d_e.nrows() != r || derivs.d_a0.nrows() != r {
        return Err(Error::Dimension("derivatives do not match the model".into()));
    }
    Ok(())
}

/// Shared delay-sum assembly; `forced` is the delay index whose magnitude is
/// the parameter, if any.
fn delay_sum_parts(
    model: &DelayedLinearModel,
    derivs: &ModelDerivatives,
    state: &TrackState,
    forced: Option<usize>,
) -> Result<Parts> {
    check_dims(model, derivs, state)?;
    let r = model.dim();
    let (sr, si) = (state.s_r, state.s_i);
    let s = Complex64::new(sr, si);
    let (pr, pi) = (&state.phi_r, &state.phi_i);

    let hs = model
        .delays
        .iter()
        .map(|d| delay_parts(s, d.tau))
        .collect::<Result<Vec<_>>>()?;

    let mut re_terms = vec![(sr, &model.e), (-1.0, &model.a0)];
    let mut im_terms = vec![(si, &model.e)];
    for (d, &(hr, hi)) in model.delays.iter().zip(&hs) {
        re_terms.push((-hr, &d.matrix));
        im_terms.push((hi, &d.matrix));
    }
    let re_q = SparseMat::combine(r, r, &re_terms);
    let im_q = SparseMat::combine(r, r, &im_terms);

    // X_r = Eφr + Σ τ_j (C_j φr + S_j φi),  X_i = Eφi + Σ τ_j (C_j φi - S_j φr)
    let mut x_r = model.e.mul_vec(pr);
    let mut x_i = model.e.mul_vec(pi);
    // h top    = (-s_r Ė + Ȧ0 + Σ C_Dj) φr + (s_i Ė + Σ S_Dj) φi
    // h bottom = -(s_i Ė + Σ S_Dj) φr + (-s_r Ė + Ȧ0 + Σ C_Dj) φi
    let (de_r, de_i) = (derivs.d_e.mul_vec(pr), derivs.d_e.mul_vec(pi));
    let mut b_r = derivs.d_a0.mul_vec(pr);
    let mut b_i = derivs.d_a0.mul_vec(pi);
    axpy(&mut b_r, -sr, &de_r);
    axpy(&mut b_r, si, &de_i);
    axpy(&mut b_i, -si, &de_r);
    axpy(&mut b_i, -sr, &de_i);

    for (j, (d, &(hr, hi))) in model.delays.iter().zip(&hs).enumerate() {
        let u = d.matrix.mul_vec(pr);
        let v = d.matrix.mul_vec(pi);
        axpy(&mut x_r, d.tau * hr, &u);
        axpy(&mut x_r, d.tau * hi, &v);
        axpy(&mut x_i, d.tau * hr, &v);
        axpy(&mut x_i, -d.tau * hi, &u);

        let du = derivs.d_delays[j].mul_vec(pr);
        let dv = derivs.d_delays[j].mul_vec(pi);
        axpy(&mut b_r, hr, &du);
        axpy(&mut b_r, hi, &dv);
        axpy(&mut b_i, -hi, &du);
        axpy(&mut b_i, hr, &dv);

        if forced == Some(j) {
            // -A_ℓ s e^{-sp} φ split into h1 = -A_ℓ(h_r s_r + h_i s_i), h2 = A_ℓ(h_r s_i - h_i s_r)
            let alpha = hr * sr + hi * si;
            let beta = hr * si - hi * sr;
            axpy(&mut b_r, -alpha, &u);
            axpy(&mut b_r, beta, &v);
            axpy(&mut b_i, -beta, &u);
            axpy(&mut b_i, -alpha, &v);
        }
    }
    Ok(Parts { re_q, im_q, x_r, x_i, b_r, b_i })
}

fn finish(parts: Parts, state: &TrackState) -> ContinuationSystem {
    let r = state.phi_r.len();
    let Parts { re_q, im_q, x_r, x_i, b_r, b_i } = parts;
    let mut t: Vec<(usize, usize, f64)> = Vec::with_capacity(2 * (re_q.nnz() + im_q.nnz()));
    re_q.push_block(&mut t, 0, 0, 1.0);
    re_q.push_block(&mut t, r, r, 1.0);
    im_q.push_block(&mut t, 0, r, -1.0);
    im_q.push_block(&mut t, r, 0, 1.0);
    let m1 = SparseMat::from_triplets(2 * r, 2 * r, t);

    let col_r: Vec<f64> = x_r.iter().chain(&x_i).copied().collect();
    let col_i: Vec<f64> = x_i.iter().map(|v| -v).chain(x_r.iter().copied()).collect();
    let row_r: Vec<f64> = state.phi_r.iter().copied().chain(state.phi_i.iter().map(|v| -v)).collect();
    let row_i: Vec<f64> = state.phi_i.iter().chain(&state.phi_r).copied().collect();
    let mut h = b_r;
    h.extend(b_i);
    h.extend([0.0, 0.0]);
    ContinuationSystem { m1, m2: [col_r, col_i], m3: [row_r, row_i], h, s: state.s() }
}

/// One delay term.
pub fn assemble_single(
    model: &DelayedLinearModel,
    derivs: &ModelDerivatives,
    state: &TrackState,
) -> Result<ContinuationSystem> {
    if model.delay_count() != 1 {
        return Err(Error::Config(format!(
            "single-delay regime needs exactly one delay term, model has {}",
            model.delay_count()
        )));
    }
    Ok(finish(delay_sum_parts(model, derivs, state, None)?, state))
}

/// Any number of delay terms, including none.
pub fn assemble_multi(
    model: &DelayedLinearModel,
    derivs: &ModelDerivatives,
    state: &TrackState,
) -> Result<ContinuationSystem> {
    Ok(finish(delay_sum_parts(model, derivs, state, None)?, state))
}

/// Delay `index` is the continuation parameter; its magnitude is read from
/// the model.
pub fn assemble_delay_param(
    model: &DelayedLinearModel,
    derivs: &ModelDerivatives,
    state: &TrackState,
    index: usize,
) -> Result<ContinuationSystem> {
    if index >= model.delay_count() {
        return Err(Error::Config(format!(
            "delay index {index} out of range for {} delay terms",
            model.delay_count()
        )));
    }
    Ok(finish(delay_sum_parts(model, derivs, state, Some(index))?, state))
}

/// Single delayed term filtered through the stochastic-delay transfer
/// `G(s) = h_p h_s e^{-sτ0}`, so that `P = sE - A0 - G A1`.
pub fn assemble_wams(
    model: &DelayedLinearModel,
    derivs: &ModelDerivatives,
    state: &TrackState,
    spec: &WamsSpec,
) -> Result<ContinuationSystem> {
    if model.delay_count() != 1 {
        return Err(Error::Config(format!(
            "WAMS regime needs exactly one delay term, model has {}",
            model.delay_count()
        )));
    }
    spec.validate()?;
    check_dims(model, derivs, state)?;
    let r = model.dim();
    let (sr, si) = (state.s_r, state.s_i);
    let s = Complex64::new(sr, si);
    let (pr, pi) = (&state.phi_r, &state.phi_i);
    let a1 = &model.delays[0].matrix;
    let da1 = &derivs.d_delays[0];

    let (g, dg) = transfer(spec, s)?;
    let f = delay_factor(s, spec.tau0)?;
    let big_g = g * f;
    // Full s-derivative of G, including the constant-delay factor.
    let big_dg = (dg - spec.tau0 * g) * f;
    if !(big_g.re.is_finite() && big_g.im.is_finite() && big_dg.re.is_finite() && big_dg.im.is_finite()) {
        return Err(Error::NonFinite { s });
    }

    // S_T = A1 G split as S_T^r = A1 G_r, S_T^i = A1 G_i.
    let re_q = SparseMat::combine(r, r, &[(sr, &model.e), (-1.0, &model.a0), (-big_g.re, a1)]);
    let im_q = SparseMat::combine(r, r, &[(si, &model.e), (-big_g.im, a1)]);

    let u = a1.mul_vec(pr);
    let v = a1.mul_vec(pi);
    let mut x_r = model.e.mul_vec(pr);
    let mut x_i = model.e.mul_vec(pi);
    axpy(&mut x_r, -big_dg.re, &u);
    axpy(&mut x_r, big_dg.im, &v);
    axpy(&mut x_i, -big_dg.re, &v);
    axpy(&mut x_i, -big_dg.im, &u);

    let (de_r, de_i) = (derivs.d_e.mul_vec(pr), derivs.d_e.mul_vec(pi));
    let du = da1.mul_vec(pr);
    let dv = da1.mul_vec(pi);
    let mut b_r = derivs.d_a0.mul_vec(pr);
    let mut b_i = derivs.d_a0.mul_vec(pi);
    axpy(&mut b_r, -sr, &de_r);
    axpy(&mut b_r, si, &de_i);
    axpy(&mut b_r, big_g.re, &du);
    axpy(&mut b_r, -big_g.im, &dv);
    axpy(&mut b_i, -si, &de_r);
    axpy(&mut b_i, -sr, &de_i);
    axpy(&mut b_i, big_g.re, &dv);
    axpy(&mut b_i, big_g.im, &du);

    Ok(finish(Parts { re_q, im_q, x_r, x_i, b_r, b_i }, state))
}

/// Dispatches on the regime.
pub fn assemble(
    regime: &Regime,
    model: &DelayedLinearModel,
    derivs: &ModelDerivatives,
    state: &TrackState,
) -> Result<ContinuationSystem> {
    match regime {
        Regime::Single => assemble_single(model, derivs, state),
        Regime::Multi => assemble_multi(model, derivs, state),
        Regime::DelayParam { index } => assemble_delay_param(model, derivs, state, *index),
        Regime::Wams(spec) => assemble_wams(model, derivs, state, spec),
    }
}
