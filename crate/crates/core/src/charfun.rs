//! Characteristic matrix function `P(s) = sE - A0 - Σ A_j e^{-sτ_j}`, its
//! `s`-derivative, and the communication-delay transfer functions for
//! packet dropouts (`h_p`) and Gamma-distributed jitter (`h_s`).

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DelayedLinearModel, ModelDerivatives};
use crate::sparse::SparseMat;

fn exp_checked(z: Complex64, s: Complex64) -> Result<Complex64> {
    let v = z.exp();
    if v.re.is_finite() && v.im.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite { s })
    }
}

/// `e^{-sτ}` with overflow reported as a non-finite evaluation.
pub fn delay_factor(s: Complex64, tau: f64) -> Result<Complex64> {
    exp_checked(-s * tau, s)
}

fn finite_or_err(m: SparseMat<Complex64>, s: Complex64) -> Result<SparseMat<Complex64>> {
    if m.is_finite() {
        Ok(m)
    } else {
        Err(Error::NonFinite { s })
    }
}

pub fn eval_p(model: &DelayedLinearModel, s: Complex64) -> Result<SparseMat<Complex64>> {
    let r = model.dim();
    let one = Complex64::new(1.0, 0.0);
    let mut terms = vec![(s, &model.e), (-one, &model.a0)];
    let factors = model
        .delays
        .iter()
        .map(|d| delay_factor(s, d.tau))
        .collect::<Result<Vec<_>>>()?;
    terms.extend(model.delays.iter().zip(&factors).map(|(d, f)| (-*f, &d.matrix)));
    finite_or_err(SparseMat::combine(r, r, &terms), s)
}

pub fn eval_dp_ds(model: &DelayedLinearModel, s: Complex64) -> Result<SparseMat<Complex64>> {
    let r = model.dim();
    let mut terms = vec![(Complex64::new(1.0, 0.0), &model.e)];
    for d in &model.delays {
        terms.push((d.tau * delay_factor(s, d.tau)?, &d.matrix));
    }
    finite_or_err(SparseMat::combine(r, r, &terms), s)
}

/// Stochastic communication delay: constant part `tau0`, packet dropout rate
/// `p_dr`, delivery period `period` and Gamma jitter with scale `alpha` and
/// shape `shape`. With `constant_delay` set both transfer functions are
/// identically one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WamsSpec {
    pub tau0: f64,
    #[serde(default)]
    pub p_dr: f64,
    #[serde(default = "default_period")]
    pub period: f64,
    #[serde(default)]
    pub alpha: f64,
    #[serde(default)]
    pub shape: f64,
    #[serde(default)]
    pub constant_delay: bool,
}

fn default_period() -> f64 {
    1.0
}

impl WamsSpec {
    pub fn new(tau0: f64, p_dr: f64, period: f64, alpha: f64, shape: f64) -> Result<Self> {
        let spec = Self { tau0, p_dr, period, alpha, shape, constant_delay: false };
        spec.validate()?;
        Ok(spec)
    }

    /// The degenerate constant-delay limit `h_p = h_s = 1`.
    pub fn constant(tau0: f64) -> Self {
        Self { tau0, p_dr: 0.0, period: 1.0, alpha: 0.0, shape: 0.0, constant_delay: true }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.tau0 >= 0.0
            && (0.0..1.0).contains(&self.p_dr)
            && self.period > 0.0
            && self.alpha >= 0.0
            && self.shape >= 0.0
            && [self.tau0, self.p_dr, self.period, self.alpha, self.shape].iter().all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid WAMS delay parameters {self:?}")))
        }
    }
}

/// Packet-dropout transfer function
/// `h_p(s) = ((1 - p)/s) · [1 + (p - 1) z / (1 - p z)]`, `z = e^{-sT}`.
pub fn eval_hp(spec: &WamsSpec, s: Complex64) -> Result<Complex64> {
    if spec.constant_delay {
        return Ok(Complex64::new(1.0, 0.0));
    }
    if s == Complex64::new(0.0, 0.0) {
        return Err(Error::Singularity("h_p has a pole at s = 0".into()));
    }
    let p = spec.p_dr;
    let z = delay_factor(s, spec.period)?;
    let den = 1.0 - p * z;
    if den.norm() < 1e-14 {
        return Err(Error::Singularity(format!("h_p denominator vanishes at s = {s}")));
    }
    Ok((1.0 - p) / s * (1.0 + (p - 1.0) * z / den))
}

/// `∂h_p/∂s`, from the reduced form `h_p = (1-p)(1-z) / (s (1 - p z))`.
pub fn eval_hp_ds(spec: &WamsSpec, s: Complex64) -> Result<Complex64> {
    if spec.constant_delay {
        return Ok(Complex64::new(0.0, 0.0));
    }
    if s == Complex64::new(0.0, 0.0) {
        return Err(Error::Singularity("h_p has a pole at s = 0".into()));
    }
    let p = spec.p_dr;
    let t = spec.period;
    let z = delay_factor(s, t)?;
    let q = 1.0 - p * z;
    if q.norm() < 1e-14 {
        return Err(Error::Singularity(format!("h_p denominator vanishes at s = {s}")));
    }
    // N = 1 - z, D = s q, dz/ds = -T z
    let num = 1.0 - z;
    let dnum = t * z;
    let den = s * q;
    let dden = q + s * p * t * z;
    Ok((1.0 - p) * (dnum * den - num * dden) / (den * den))
}

fn jitter_base(spec: &WamsSpec, s: Complex64) -> Result<Complex64> {
    let base = 1.0 + spec.alpha / (1.0 - spec.p_dr) * s;
    let integer_shape = spec.shape.fract() == 0.0;
    if base.norm() == 0.0 && spec.shape > 0.0 {
        return Err(Error::Singularity(format!("h_s has a pole at s = {s}")));
    }
    if !integer_shape && base.im == 0.0 && base.re <= 0.0 {
        return Err(Error::Singularity(format!("h_s base {base} lies on the branch cut")));
    }
    Ok(base)
}

fn principal_pow(base: Complex64, exponent: f64) -> Complex64 {
    if exponent.fract() == 0.0 && exponent.abs() < i32::MAX as f64 {
        base.powi(exponent as i32)
    } else {
        base.powf(exponent)
    }
}

/// Jitter transfer function `h_s(s) = (1 + α s / (1 - p))^{-b}`, principal branch.
pub fn eval_hs(spec: &WamsSpec, s: Complex64) -> Result<Complex64> {
    if spec.constant_delay || spec.shape == 0.0 || spec.alpha == 0.0 {
        return Ok(Complex64::new(1.0, 0.0));
    }
    Ok(principal_pow(jitter_base(spec, s)?, -spec.shape))
}

pub fn eval_hs_ds(spec: &WamsSpec, s: Complex64) -> Result<Complex64> {
    if spec.constant_delay || spec.shape == 0.0 || spec.alpha == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let base = jitter_base(spec, s)?;
    let k = spec.alpha / (1.0 - spec.p_dr);
    Ok(-spec.shape * k * principal_pow(base, -spec.shape - 1.0))
}

/// Combined transfer `g = h_p h_s` and its derivative `g' = h_p' h_s + h_p h_s'`.
pub fn transfer(spec: &WamsSpec, s: Complex64) -> Result<(Complex64, Complex64)> {
    let hp = eval_hp(spec, s)?;
    let hs = eval_hs(spec, s)?;
    let dhp = eval_hp_ds(spec, s)?;
    let dhs = eval_hs_ds(spec, s)?;
    Ok((hp * hs, dhp * hs + hp * dhs))
}

fn wams_matrix(model: &DelayedLinearModel) -> Result<&SparseMat<f64>> {
    match model.delays.as_slice() {
        [term] => Ok(&term.matrix),
        other => Err(Error::Config(format!(
            "WAMS delay requires exactly one delay term, model has {}",
            other.len()
        ))),
    }
}

/// `S_T = h_p h_s A1 e^{-sτ0}`.
pub fn eval_st(model: &DelayedLinearModel, spec: &WamsSpec, s: Complex64) -> Result<SparseMat<Complex64>> {
    let a1 = wams_matrix(model)?;
    let (g, _) = transfer(spec, s)?;
    let f = delay_factor(s, spec.tau0)?;
    finite_or_err(a1.map(|v| g * f * v), s)
}

/// The two pieces of `S_TD`: the part driven by `Ȧ1` and the part carrying
/// the transfer-function slope, `(Ȧ1 g e^{-sτ0}, A1 g' e^{-sτ0})`.
pub fn eval_std_parts(
    model: &DelayedLinearModel,
    derivs: &ModelDerivatives,
    spec: &WamsSpec,
    s: Complex64,
) -> Result<(SparseMat<Complex64>, SparseMat<Complex64>)> {
    let a1 = wams_matrix(model)?;
    let da1 = derivs
        .d_delays
        .first()
        .ok_or_else(|| Error::Dimension("derivatives lack the delayed matrix slot".into()))?;
    let (g, dg) = transfer(spec, s)?;
    let f = delay_factor(s, spec.tau0)?;
    let driven = finite_or_err(da1.map(|v| g * f * v), s)?;
    let slope = finite_or_err(a1.map(|v| dg * f * v), s)?;
    Ok((driven, slope))
}

/// `S_TD = (Ȧ1 h_p h_s + A1 (h_p' h_s + h_p h_s')) e^{-sτ0}`.
pub fn eval_std(
    model: &DelayedLinearModel,
    derivs: &ModelDerivatives,
    spec: &WamsSpec,
    s: Complex64,
) -> Result<SparseMat<Complex64>> {
    let (driven, slope) = eval_std_parts(model, derivs, spec, s)?;
    Ok(&driven + &slope)
}

/// Nonlinear eigenproblem whose roots are tracked: either the plain delay
/// pencil or the pencil with the stochastic-delay transfer on `A1`.
#[derive(Clone, Copy, Debug)]
pub enum Characteristic<'a> {
    Plain(&'a DelayedLinearModel),
    Wams(&'a DelayedLinearModel, &'a WamsSpec),
}

impl<'a> Characteristic<'a> {
    pub fn model(&self) -> &'a DelayedLinearModel {
        match *self {
            Characteristic::Plain(m) | Characteristic::Wams(m, _) => m,
        }
    }

    pub fn dim(&self) -> usize {
        self.model().dim()
    }

    pub fn eval(&self, s: Complex64) -> Result<SparseMat<Complex64>> {
        match *self {
            Characteristic::Plain(m) => eval_p(m, s),
            Characteristic::Wams(m, spec) => {
                let r = m.dim();
                let base = SparseMat::combine(r, r, &[(s, &m.e), (Complex64::new(-1.0, 0.0), &m.a0)]);
                Ok(&base - &eval_st(m, spec, s)?)
            }
        }
    }

    pub fn eval_ds(&self, s: Complex64) -> Result<SparseMat<Complex64>> {
        match *self {
            Characteristic::Plain(m) => eval_dp_ds(m, s),
            Characteristic::Wams(m, spec) => {
                let a1 = wams_matrix(m)?;
                let (g, dg) = transfer(spec, s)?;
                let f = delay_factor(s, spec.tau0)?;
                let coef = (spec.tau0 * g - dg) * f;
                let r = m.dim();
                finite_or_err(SparseMat::combine(r, r, &[(Complex64::new(1.0, 0.0), &m.e), (coef, a1)]), s)
            }
        }
    }
}
