//! Linear delay differential-algebraic models `E x' = A0 x + Σ A_j x(t - τ_j)`
//! and families of them indexed by a scalar continuation parameter.

use crate::error::{Error, Result};
use crate::sparse::SparseMat;

#[derive(Clone, Debug, PartialEq)]
pub struct DelayTerm {
    pub tau: f64,
    pub matrix: SparseMat<f64>,
}

impl DelayTerm {
    pub fn new(tau: f64, matrix: SparseMat<f64>) -> Self {
        Self { tau, matrix }
    }
}

/// The matrix tuple `(E, A0, {(τ_j, A_j)})` at one parameter value.
#[derive(Clone, Debug, PartialEq)]
pub struct DelayedLinearModel {
    pub e: SparseMat<f64>,
    pub a0: SparseMat<f64>,
    pub delays: Vec<DelayTerm>,
    /// Number of dynamic states; the remaining columns of `E` must vanish.
    pub n_dyn: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ModelIssue {
    NotSquare { slot: String, rows: usize, cols: usize },
    DimensionMismatch { slot: String, expected: usize, found: (usize, usize) },
    NonPositiveDelay { index: usize, tau: f64 },
    NonFinite { slot: String },
    DynamicCountExceedsDimension { n_dyn: usize, dim: usize },
    AlgebraicColumnNonzero { col: usize },
}

impl std::fmt::Display for ModelIssue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ModelIssue::NotSquare { slot, rows, cols } => write!(f, "{slot} is {rows}x{cols}, not square"),
            ModelIssue::DimensionMismatch { slot, expected, found } => {
                write!(f, "{slot} is {}x{}, expected {expected}x{expected}", found.0, found.1)
            }
            ModelIssue::NonPositiveDelay { index, tau } => write!(f, "delay {index} has non-positive tau {tau}"),
            ModelIssue::NonFinite { slot } => write!(f, "{slot} has non-finite entries"),
            ModelIssue::DynamicCountExceedsDimension { n_dyn, dim } => {
                write!(f, "n_dyn = {n_dyn} exceeds model dimension {dim}")
            }
            ModelIssue::AlgebraicColumnNonzero { col } => {
                write!(f, "E has a nonzero entry in algebraic column {col}")
            }
        }
    }
}

impl DelayedLinearModel {
    pub fn new(e: SparseMat<f64>, a0: SparseMat<f64>, delays: Vec<DelayTerm>) -> Self {
        Self { e, a0, delays, n_dyn: None }
    }

    pub fn with_n_dyn(mut self, n_dyn: usize) -> Self {
        self.n_dyn = Some(n_dyn);
        self
    }

    /// Convenience constructor from dense row-major blocks.
    pub fn from_dense(e: &[Vec<f64>], a0: &[Vec<f64>], delays: &[(f64, Vec<Vec<f64>>)]) -> Self {
        Self::new(
            SparseMat::from_dense(e),
            SparseMat::from_dense(a0),
            delays
                .iter()
                .map(|(tau, a)| DelayTerm::new(*tau, SparseMat::from_dense(a)))
                .collect(),
        )
    }

    /// Scalar model `e x' = a0 x + Σ a_j x(t - τ_j)`.
    pub fn scalar(e: f64, a0: f64, delays: &[(f64, f64)]) -> Self {
        Self::from_dense(
            &[vec![e]],
            &[vec![a0]],
            &delays.iter().map(|&(tau, a)| (tau, vec![vec![a]])).collect::<Vec<_>>(),
        )
    }

    pub fn dim(&self) -> usize {
        self.e.nrows()
    }

    pub fn delay_count(&self) -> usize {
        self.delays.len()
    }

    pub fn tau_max(&self) -> f64 {
        self.delays.iter().map(|d| d.tau).fold(0.0, f64::max)
    }

    /// Lists every violated structural invariant; empty means valid.
    pub fn validate(&self) -> Vec<ModelIssue> {
        let mut issues = Vec::new();
        let (r, c) = self.e.shape();
        if r != c {
            issues.push(ModelIssue::NotSquare { slot: "E".into(), rows: r, cols: c });
        }
        let mut check = |slot: String, m: &SparseMat<f64>| {
            if m.shape() != (r, r) {
                issues.push(ModelIssue::DimensionMismatch { slot: slot.clone(), expected: r, found: m.shape() });
            }
            if !m.is_finite() {
                issues.push(ModelIssue::NonFinite { slot });
            }
        };
        check("E".into(), &self.e);
        check("A0".into(), &self.a0);
        for (j, d) in self.delays.iter().enumerate() {
            check(format!("A{}", j + 1), &d.matrix);
        }
        for (j, d) in self.delays.iter().enumerate() {
            if !(d.tau > 0.0 && d.tau.is_finite()) {
                issues.push(ModelIssue::NonPositiveDelay { index: j, tau: d.tau });
            }
        }
        if let Some(n_dyn) = self.n_dyn {
            if n_dyn > r {
                issues.push(ModelIssue::DynamicCountExceedsDimension { n_dyn, dim: r });
            } else {
                let mut cols: Vec<usize> = self
                    .e
                    .iter()
                    .filter(|&(_, j, v)| j >= n_dyn && v != 0.0)
                    .map(|(_, j, _)| j)
                    .collect();
                cols.sort_unstable();
                cols.dedup();
                issues.extend(cols.into_iter().map(|col| ModelIssue::AlgebraicColumnNonzero { col }));
            }
        }
        issues
    }

    pub fn ensure_valid(&self) -> Result<()> {
        let issues = self.validate();
        if issues.is_empty() {
            Ok(())
        } else {
            let msg: Vec<String> = issues.iter().map(ToString::to_string).collect();
            Err(Error::Config(msg.join("; ")))
        }
    }
}

/// Parameter derivatives `(Ė, Ȧ0, Ȧ_j)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelDerivatives {
    pub d_e: SparseMat<f64>,
    pub d_a0: SparseMat<f64>,
    pub d_delays: Vec<SparseMat<f64>>,
}

impl ModelDerivatives {
    pub fn zeros_like(model: &DelayedLinearModel) -> Self {
        let r = model.dim();
        Self {
            d_e: SparseMat::zeros(r, r),
            d_a0: SparseMat::zeros(r, r),
            d_delays: vec![SparseMat::zeros(r, r); model.delay_count()],
        }
    }

    pub fn is_zero(&self) -> bool {
        self.d_e.is_zero() && self.d_a0.is_zero() && self.d_delays.iter().all(SparseMat::is_zero)
    }
}

#[derive(Clone, Debug)]
pub enum FamilyKind {
    /// `M(p) = base + p · slope` for every matrix slot; delays are constant.
    Affine { base: DelayedLinearModel, slope: ModelDerivatives },
    /// Entrywise piecewise-linear interpolation between snapshots sorted by `p`.
    Tabulated { snapshots: Vec<(f64, DelayedLinearModel)> },
    /// Constant matrices; delay term `index` has magnitude `τ = p`.
    DelayParameter { model: DelayedLinearModel, index: usize },
}

#[derive(Clone, Debug)]
pub struct ModelFamily {
    kind: FamilyKind,
    p_range: (f64, f64),
    fd_step: Option<f64>,
}

fn same_structure(a: &DelayedLinearModel, b: &DelayedLinearModel) -> bool {
    a.dim() == b.dim() && a.delay_count() == b.delay_count()
}

fn slope_fits(base: &DelayedLinearModel, slope: &ModelDerivatives) -> bool {
    let r = base.dim();
    slope.d_e.shape() == (r, r)
        && slope.d_a0.shape() == (r, r)
        && slope.d_delays.len() == base.delay_count()
        && slope.d_delays.iter().all(|m| m.shape() == (r, r))
}

fn check_range(p_range: (f64, f64)) -> Result<()> {
    if !(p_range.0.is_finite() && p_range.1.is_finite() && p_range.0 <= p_range.1) {
        return Err(Error::Config(format!("invalid parameter range [{}, {}]", p_range.0, p_range.1)));
    }
    Ok(())
}

impl ModelFamily {
    pub fn affine(base: DelayedLinearModel, slope: ModelDerivatives, p_range: (f64, f64)) -> Result<Self> {
        check_range(p_range)?;
        base.ensure_valid()?;
        if !slope_fits(&base, &slope) {
            return Err(Error::Dimension("affine slope does not match the base model".into()));
        }
        Ok(Self { kind: FamilyKind::Affine { base, slope }, p_range, fd_step: None })
    }

    /// Family with constant matrices.
    pub fn constant(model: DelayedLinearModel, p_range: (f64, f64)) -> Result<Self> {
        let slope = ModelDerivatives::zeros_like(&model);
        Self::affine(model, slope, p_range)
    }

    /// Snapshots are sorted by `p`; the parameter range is their span.
    pub fn tabulated(mut snapshots: Vec<(f64, DelayedLinearModel)>) -> Result<Self> {
        if snapshots.len() < 2 {
            return Err(Error::Config(format!(
                "tabulated family needs at least 2 snapshots, got {}",
                snapshots.len()
            )));
        }
        snapshots.sort_by(|a, b| a.0.total_cmp(&b.0));
        if snapshots.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(Error::Config("tabulated snapshots must have distinct parameter values".into()));
        }
        let first = &snapshots[0].1;
        for (p, m) in &snapshots {
            m.ensure_valid()?;
            if !same_structure(first, m) {
                return Err(Error::Dimension(format!("snapshot at p = {p} changes dimension or delay count")));
            }
            if m.delays.iter().zip(&first.delays).any(|(a, b)| a.tau != b.tau) {
                return Err(Error::Config(format!("snapshot at p = {p} changes a delay magnitude")));
            }
        }
        let p_range = (snapshots[0].0, snapshots[snapshots.len() - 1].0);
        Ok(Self { kind: FamilyKind::Tabulated { snapshots }, p_range, fd_step: None })
    }

    pub fn delay_parameter(model: DelayedLinearModel, index: usize, p_range: (f64, f64)) -> Result<Self> {
        check_range(p_range)?;
        if index >= model.delay_count() {
            return Err(Error::Config(format!(
                "delay index {index} out of range for a model with {} delays",
                model.delay_count()
            )));
        }
        if !(p_range.0 > 0.0) {
            return Err(Error::Config("delay-parameter range must be strictly positive".into()));
        }
        model.ensure_valid()?;
        Ok(Self { kind: FamilyKind::DelayParameter { model, index }, p_range, fd_step: None })
    }

    pub fn with_fd_step(mut self, h: f64) -> Self {
        self.fd_step = Some(h);
        self
    }

    pub fn kind(&self) -> &FamilyKind {
        &self.kind
    }

    pub fn p_range(&self) -> (f64, f64) {
        self.p_range
    }

    /// Index of the delay whose magnitude is the parameter, if any.
    pub fn delay_index(&self) -> Option<usize> {
        match self.kind {
            FamilyKind::DelayParameter { index, .. } => Some(index),
            _ => None,
        }
    }

    pub fn dim(&self) -> usize {
        self.reference().dim()
    }

    pub fn delay_count(&self) -> usize {
        self.reference().delay_count()
    }

    fn reference(&self) -> &DelayedLinearModel {
        match &self.kind {
            FamilyKind::Affine { base, .. } => base,
            FamilyKind::Tabulated { snapshots } => &snapshots[0].1,
            FamilyKind::DelayParameter { model, .. } => model,
        }
    }

    /// Explicit finite-difference step, if one was set.
    pub fn fd_step(&self) -> Option<f64> {
        self.fd_step
    }

    pub fn fd_step_at(&self, p: f64) -> f64 {
        self.fd_step.unwrap_or(1e-6 * p.abs().max(1.0))
    }

    fn check_param(&self, p: f64, slack: f64) -> Result<()> {
        let (lo, hi) = self.p_range;
        if !(p >= lo - slack && p <= hi + slack) {
            return Err(Error::Range { p, lo, hi });
        }
        Ok(())
    }

    pub fn evaluate(&self, p: f64) -> Result<DelayedLinearModel> {
        self.check_param(p, self.fd_step_at(p) * (1.0 + 1e-9))?;
        Ok(match &self.kind {
            FamilyKind::Affine { base, slope } => {
                let r = base.dim();
                let lin = |a: &SparseMat<f64>, b: &SparseMat<f64>| SparseMat::combine(r, r, &[(1.0, a), (p, b)]);
                DelayedLinearModel {
                    e: lin(&base.e, &slope.d_e),
                    a0: lin(&base.a0, &slope.d_a0),
                    delays: base
                        .delays
                        .iter()
                        .zip(&slope.d_delays)
                        .map(|(d, s)| DelayTerm::new(d.tau, lin(&d.matrix, s)))
                        .collect(),
                    n_dyn: base.n_dyn,
                }
            }
            FamilyKind::Tabulated { snapshots } => {
                let k = snapshots.partition_point(|(q, _)| *q <= p).clamp(1, snapshots.len() - 1) - 1;
                let (p0, m0) = &snapshots[k];
                let (p1, m1) = &snapshots[k + 1];
                let w = (p - p0) / (p1 - p0);
                let r = m0.dim();
                let lerp = |a: &SparseMat<f64>, b: &SparseMat<f64>| SparseMat::combine(r, r, &[(1.0 - w, a), (w, b)]);
                DelayedLinearModel {
                    e: lerp(&m0.e, &m1.e),
                    a0: lerp(&m0.a0, &m1.a0),
                    delays: m0
                        .delays
                        .iter()
                        .zip(&m1.delays)
                        .map(|(a, b)| DelayTerm::new(a.tau, lerp(&a.matrix, &b.matrix)))
                        .collect(),
                    n_dyn: m0.n_dyn,
                }
            }
            FamilyKind::DelayParameter { model, index } => {
                let mut m = model.clone();
                m.delays[*index].tau = p;
                m
            }
        })
    }

    pub fn derivatives(&self, p: f64) -> Result<ModelDerivatives> {
        self.check_param(p, 0.0)?;
        match &self.kind {
            FamilyKind::Affine { slope, .. } => Ok(slope.clone()),
            FamilyKind::DelayParameter { model, .. } => Ok(ModelDerivatives::zeros_like(model)),
            FamilyKind::Tabulated { .. } => {
                let h = self.fd_step_at(p);
                let (lo, hi) = self.p_range;
                let (a, b) = if p + h <= hi {
                    (p, p + h)
                } else if p - h >= lo {
                    (p - h, p)
                } else {
                    return Err(Error::Range { p: p + h, lo, hi });
                };
                let ma = self.evaluate(a)?;
                let mb = self.evaluate(b)?;
                let r = ma.dim();
                let diff = |x: &SparseMat<f64>, y: &SparseMat<f64>| {
                    SparseMat::combine(r, r, &[(1.0 / (b - a), y), (-1.0 / (b - a), x)])
                };
                Ok(ModelDerivatives {
                    d_e: diff(&ma.e, &mb.e),
                    d_a0: diff(&ma.a0, &mb.a0),
                    d_delays: ma
                        .delays
                        .iter()
                        .zip(&mb.delays)
                        .map(|(x, y)| diff(&x.matrix, &y.matrix))
                        .collect(),
                })
            }
        }
    }
}
