//! Eigenpair continuation in the parameter `p`.

mod assemble;
mod run;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::charfun::{Characteristic, WamsSpec};
use crate::error::{Error, Result};
use crate::linalg::{deflation_candidates, Backend, Bordered};
use crate::model::DelayedLinearModel;
use crate::sparse::{dot_t, SparseMat};

pub use assemble::{assemble, assemble_delay_param, assemble_multi, assemble_single, assemble_wams};
pub use run::{detect_fold, find_crossing, reinitialize_at, track_run, Crossing};

/// Real continuation vector `y = (φ_r, φ_i, s_r, s_i)` at parameter `p`.
#[derive(Clone, Debug, PartialEq)]
pub struct TrackState {
    pub p: f64,
    pub phi_r: Vec<f64>,
    pub phi_i: Vec<f64>,
    pub s_r: f64,
    pub s_i: f64,
    pub residual: f64,
}

impl TrackState {
    pub fn new(p: f64, s: Complex64, phi: &[Complex64], residual: f64) -> Self {
        Self {
            p,
            phi_r: phi.iter().map(|v| v.re).collect(),
            phi_i: phi.iter().map(|v| v.im).collect(),
            s_r: s.re,
            s_i: s.im,
            residual,
        }
    }

    pub fn dim(&self) -> usize {
        self.phi_r.len()
    }

    pub fn s(&self) -> Complex64 {
        Complex64::new(self.s_r, self.s_i)
    }

    pub fn phi(&self) -> Vec<Complex64> {
        self.phi_r.iter().zip(&self.phi_i).map(|(&a, &b)| Complex64::new(a, b)).collect()
    }

    pub fn y(&self) -> Vec<f64> {
        let mut y = Vec::with_capacity(2 * self.dim() + 2);
        y.extend(&self.phi_r);
        y.extend(&self.phi_i);
        y.push(self.s_r);
        y.push(self.s_i);
        y
    }

    /// State at `p` from a packed `y`; the residual is carried over.
    pub fn with_y(&self, p: f64, y: &[f64]) -> Self {
        let r = self.dim();
        assert_eq!(y.len(), 2 * r + 2, "continuation vector length");
        Self {
            p,
            phi_r: y[..r].to_vec(),
            phi_i: y[r..2 * r].to_vec(),
            s_r: y[2 * r],
            s_i: y[2 * r + 1],
            residual: self.residual,
        }
    }

    /// `|φᵀφ - 1|`.
    pub fn norm_defect(&self) -> f64 {
        let phi = self.phi();
        (dot_t(&phi, &phi) - Complex64::new(1.0, 0.0)).norm()
    }

    /// Rescales `φ` so that `φᵀφ = 1`; `s` is untouched.
    pub fn renormalize(&mut self) {
        let mut phi = self.phi();
        crate::init::normalize_t(&mut phi);
        self.phi_r = phi.iter().map(|v| v.re).collect();
        self.phi_i = phi.iter().map(|v| v.im).collect();
    }

    pub fn conj(&self) -> Self {
        Self {
            phi_i: self.phi_i.iter().map(|v| -v).collect(),
            s_i: -self.s_i,
            ..self.clone()
        }
    }
}

/// `M ẏ = h` with `M = [[M1, M2], [M3, 0]]`. `M2` is stored as its two
/// columns and `M3` as its two rows.
#[derive(Clone, Debug)]
pub struct ContinuationSystem {
    pub m1: SparseMat<f64>,
    pub m2: [Vec<f64>; 2],
    pub m3: [Vec<f64>; 2],
    pub h: Vec<f64>,
    /// Eigenvalue the system was assembled at.
    pub s: Complex64,
}

impl ContinuationSystem {
    pub fn dim(&self) -> usize {
        self.h.len()
    }

    /// The full `(2r+2)×(2r+2)` matrix `M`.
    pub fn matrix(&self) -> SparseMat<f64> {
        let corner = vec![vec![0.0; 2]; 2];
        Bordered { a: &self.m1, b_cols: &self.m2, c_cols: &self.m3, corner: &corner }.assemble()
    }

    /// `ẏ = M⁻¹ h`. A singular `M` (coalescing eigenvalues) is reported as
    /// [`Error::Defective`].
    pub fn tangent(&self) -> Result<Vec<f64>> {
        let n2 = self.m1.nrows();
        let r = n2 / 2;
        let corner = vec![vec![0.0; 2]; 2];
        let sys = Bordered { a: &self.m1, b_cols: &self.m2, c_cols: &self.m3, corner: &corner };
        let weights: Vec<f64> = (0..r).map(|k| self.m3[0][k].hypot(self.m3[1][k])).collect();
        let cands = deflation_candidates(&weights, 3, |k| vec![k, k + r]);
        match sys.solve(&self.h[..n2], &self.h[n2..], &cands, Backend::Auto) {
            Ok((mut x, y)) => {
                x.extend(y);
                Ok(x)
            }
            Err(Error::SingularMatrix(_)) => Err(Error::Defective { s: self.s }),
            Err(e) => Err(e),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    #[default]
    Euler,
    Heun,
    Rk4,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euler" => Ok(Method::Euler),
            "heun" => Ok(Method::Heun),
            "rk4" => Ok(Method::Rk4),
            other => Err(Error::Config(format!("unknown integration method '{other}' (expected euler, heun or rk4)"))),
        }
    }
}

/// How the delays enter the continuation system.
#[derive(Clone, Debug, PartialEq)]
pub enum Regime {
    Single,
    Multi,
    /// The magnitude of delay `index` (0-based) is the parameter.
    DelayParam { index: usize },
    Wams(WamsSpec),
}

impl Regime {
    pub fn name(&self) -> &'static str {
        match self {
            Regime::Single => "single",
            Regime::Multi => "multi",
            Regime::DelayParam { .. } => "delay_param",
            Regime::Wams(_) => "wams",
        }
    }

    /// Characteristic function whose roots this regime tracks.
    pub fn characteristic<'a>(&'a self, model: &'a DelayedLinearModel) -> Characteristic<'a> {
        match self {
            Regime::Wams(spec) => Characteristic::Wams(model, spec),
            _ => Characteristic::Plain(model),
        }
    }
}

/// Collocation settings used to (re)compute eigenpairs from scratch.
#[derive(Clone, Debug, PartialEq)]
pub struct InitSettings {
    pub nodes: usize,
    pub shift: Complex64,
    pub count: usize,
}

impl Default for InitSettings {
    fn default() -> Self {
        Self { nodes: 16, shift: Complex64::new(0.0, 0.0), count: 6 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrackOptions {
    pub p_fin: f64,
    pub dp: f64,
    pub method: Method,
    /// Correct every this many steps; `0` disables the corrector.
    pub corrector_every: usize,
    pub corrector_tol: f64,
    pub corrector_max_iter: usize,
    pub fold_eps: f64,
    /// `φ` is rescaled whenever `|φᵀφ - 1|` exceeds this.
    pub norm_tol: f64,
    pub regime: Regime,
    /// Recompute the eigenpair after a fold or a failed correction instead of
    /// stopping.
    pub reinit: bool,
    pub init: InitSettings,
}

impl TrackOptions {
    /// Defaults for a sweep from `p_init` to `p_fin`.
    pub fn new(p_init: f64, p_fin: f64, regime: Regime) -> Self {
        Self {
            p_fin,
            dp: (p_fin - p_init) / 1000.0,
            method: Method::Euler,
            corrector_every: 10,
            corrector_tol: 1e-10,
            corrector_max_iter: 20,
            fold_eps: 1e-4,
            norm_tol: 1e-8,
            regime,
            reinit: false,
            init: InitSettings::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EventKind {
    Fold,
    AxisCrossing,
    Reinit,
    CorrectorFail,
}

impl EventKind {
    pub fn tag(&self) -> &'static str {
        match self {
            EventKind::Fold => "fold",
            EventKind::AxisCrossing => "axis_crossing",
            EventKind::Reinit => "reinit",
            EventKind::CorrectorFail => "corrector_fail",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "fold" => Some(EventKind::Fold),
            "axis_crossing" => Some(EventKind::AxisCrossing),
            "reinit" => Some(EventKind::Reinit),
            "corrector_fail" => Some(EventKind::CorrectorFail),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Event {
    pub kind: EventKind,
    pub p: f64,
    pub s: Complex64,
    /// Index of the sample the event is attached to.
    pub sample: usize,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Termination {
    Completed,
    /// Stopped at a fold that could not be passed.
    Fold { p: f64 },
    /// Stopped by an error; the samples up to that point are kept.
    Aborted { p: f64, reason: String },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<TrackState>,
    pub events: Vec<Event>,
    pub options: TrackOptions,
    pub termination: Termination,
}

impl Trajectory {
    pub fn last(&self) -> &TrackState {
        self.samples.last().expect("trajectory has at least the initial sample")
    }

    pub fn events_of(&self, kind: EventKind) -> impl Iterator<Item = &Event> {
        self.events.iter().filter(move |e| e.kind == kind)
    }

    pub fn is_complete(&self) -> bool {
        self.termination == Termination::Completed
    }
}

/// Advances `state` by `dp`. Runge-Kutta stages re-assemble the system at
/// intermediate points through `assemble_at`; `system` is the system at
/// `state` itself. The returned residual is carried over from `state`.
pub fn integrate_step(
    system: &ContinuationSystem,
    state: &TrackState,
    dp: f64,
    method: Method,
    mut assemble_at: impl FnMut(&TrackState) -> Result<ContinuationSystem>,
) -> Result<TrackState> {
    let y0 = state.y();
    let p0 = state.p;
    let shifted = |k: &[f64], a: f64| -> Vec<f64> { y0.iter().zip(k).map(|(y, d)| y + a * d).collect() };
    let mut slope_at = |p: f64, y: &[f64]| -> Result<Vec<f64>> { assemble_at(&state.with_y(p, y))?.tangent() };

    let k1 = system.tangent()?;
    let y1 = match method {
        Method::Euler => shifted(&k1, dp),
        Method::Heun => {
            let k2 = slope_at(p0 + dp, &shifted(&k1, dp))?;
            let k: Vec<f64> = k1.iter().zip(&k2).map(|(a, b)| 0.5 * (a + b)).collect();
            shifted(&k, dp)
        }
        Method::Rk4 => {
            let k2 = slope_at(p0 + 0.5 * dp, &shifted(&k1, 0.5 * dp))?;
            let k3 = slope_at(p0 + 0.5 * dp, &shifted(&k2, 0.5 * dp))?;
            let k4 = slope_at(p0 + dp, &shifted(&k3, dp))?;
            let k: Vec<f64> = (0..k1.len()).map(|i| (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i]) / 6.0).collect();
            shifted(&k, dp)
        }
    };
    if y1.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { s: state.s() });
    }
    Ok(state.with_y(p0 + dp, &y1))
}
