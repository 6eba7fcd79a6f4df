use num_complex::Complex64;

use super::{
    assemble, integrate_step, ContinuationSystem, Event, EventKind, Regime, Termination, TrackOptions, TrackState,
    Trajectory,
};
use crate::error::{Error, Result};
use crate::init::{discretize, eig_residual, lift_eigenvector, refine_newton, solve_discretized};
use crate::model::ModelFamily;
use crate::sparse::norm2;

/// Minimum normalized eigenvector overlap accepted on reinitialization.
const OVERLAP_THRESHOLD: f64 = 0.5;

/// Candidates whose overlap is within this fraction of the best are ties.
const OVERLAP_TIE: f64 = 0.05;

#[derive(Clone, Debug, PartialEq)]
pub struct Crossing {
    pub p: f64,
    pub s: Complex64,
}

fn check_regime(family: &ModelFamily, regime: &Regime) -> Result<()> {
    let mu = family.delay_count();
    match regime {
        Regime::Single | Regime::Wams(_) if mu != 1 => Err(Error::Config(format!(
            "{} regime needs exactly one delay term, family has {mu}",
            regime.name()
        ))),
        Regime::DelayParam { index } if family.delay_index() != Some(*index) => Err(Error::Config(format!(
            "delay_param regime with index {index} needs a delay-parameter family over that delay"
        ))),
        Regime::Wams(spec) => spec.validate(),
        _ => Ok(()),
    }
}

fn system_at(family: &ModelFamily, regime: &Regime, state: &TrackState) -> Result<ContinuationSystem> {
    let model = family.evaluate(state.p)?;
    let derivs = family.derivatives(state.p)?;
    assemble(regime, &model, &derivs, state)
}

fn residual_at(family: &ModelFamily, regime: &Regime, state: &TrackState) -> Result<f64> {
    let model = family.evaluate(state.p)?;
    eig_residual(&regime.characteristic(&model), state.s(), &state.phi())
}

/// Newton correction at fixed `p`, starting from `warm`.
fn refine_state(family: &ModelFamily, opts: &TrackOptions, p: f64, warm: &TrackState) -> Result<TrackState> {
    let model = family.evaluate(p)?;
    let ch = opts.regime.characteristic(&model);
    let out = refine_newton(&ch, warm.s(), &warm.phi(), opts.corrector_tol, opts.corrector_max_iter)?;
    Ok(TrackState::new(p, out.s, &out.phi, out.residual))
}

/// Looks at the tail of `window` for two eigenvalues about to coalesce.
///
/// For a conjugate pair a fold is flagged when `|s_i|` drops below
/// `fold_eps` or changes sign, or when `s_i²`, which is linear in `p` near a
/// quadratic fold, extrapolates to zero within one more step. On a real
/// branch the slope `ds/dp` grows like `(p - p*)^(-1/2)` towards the fold, so
/// `|ds/dp|⁻²` is extrapolated instead, using the last four samples.
pub fn detect_fold(window: &[TrackState], fold_eps: f64) -> Option<Event> {
    let [.., a, b] = window else { return None };
    let step = b.p - a.p;
    if step == 0.0 {
        return None;
    }
    let fold = |p: f64, detail: &str| Event {
        kind: EventKind::Fold,
        p,
        s: b.s(),
        sample: 0,
        detail: detail.to_string(),
    };
    if a.s_i.abs() < fold_eps {
        return real_fold(window).map(|p| fold(p, "real branch ends within three steps"));
    }
    if a.s_i * b.s_i < 0.0 {
        let t = a.s_i.abs() / (a.s_i.abs() + b.s_i.abs());
        return Some(fold(a.p + t * step, "imaginary part changed sign"));
    }
    if b.s_i.abs() < fold_eps {
        return Some(fold(b.p, "imaginary part below fold_eps"));
    }
    let (qa, qb) = (a.s_i * a.s_i, b.s_i * b.s_i);
    let slope = (qb - qa) / step;
    if slope * step < 0.0 {
        let ahead = -qb / slope;
        if ahead / step <= 1.0 + 1e-6 {
            return Some(fold(b.p + ahead, "coalescence predicted within one step"));
        }
    }
    None
}

/// Where `|ds/dp|⁻²` through the secant slopes of `x, a, b` extrapolates to
/// zero, provided the slope is growing.
fn fold_estimate(x: &TrackState, a: &TrackState, b: &TrackState) -> Option<f64> {
    let (h1, h2) = (a.p - x.p, b.p - a.p);
    if h1 * h2 <= 0.0 {
        return None;
    }
    let (d1, d2) = ((a.s() - x.s()).norm(), (b.s() - a.s()).norm());
    // Slopes at rounding level carry no curvature information.
    if d1 == 0.0 || d2 <= d1 || d2 <= 1e-6 * (1.0 + b.s().norm()) {
        return None;
    }
    let (w1, w2) = ((h1 / d1).powi(2), (h2 / d2).powi(2));
    let slope = (w2 - w1) / (0.5 * (h1 + h2));
    Some(0.5 * (a.p + b.p) - w2 / slope)
}

/// A square-root fold keeps predicting the same `p*` as it is approached,
/// unlike a real eigenvalue turning around, whose estimate runs ahead. An
/// explicit integrator lags behind the steepening branch, which biases `p*`
/// by up to a few steps, hence the margin of three.
fn real_fold(window: &[TrackState]) -> Option<f64> {
    let [.., w, x, a, b] = window else { return None };
    let (early, late) = (fold_estimate(w, x, a)?, fold_estimate(x, a, b)?);
    let h = b.p - a.p;
    let ahead = (late - b.p) / h;
    ((late - early).abs() <= 0.25 * h.abs() && ahead > -1.0 && ahead <= 3.0).then_some(late)
}

fn overlap(a: &[Complex64], b: &[Complex64]) -> f64 {
    let dot: Complex64 = a.iter().zip(b).map(|(x, y)| x.conj() * y).sum();
    dot.norm() / (norm2(a) * norm2(b))
}

/// Recomputes the eigenpair at `p` from the collocation pencil and picks the
/// refined candidate whose eigenvector best overlaps `prev`.
///
/// Candidates within 5% of the best overlap are ties, resolved towards the
/// candidates nearest `prev.s`; past a fold (`after_fold`) the larger real
/// part of the two nearest ones wins. Returns the state and its overlap.
pub fn reinitialize_at(
    family: &ModelFamily,
    p: f64,
    prev: &TrackState,
    opts: &TrackOptions,
    after_fold: bool,
) -> Result<(TrackState, f64)> {
    let model = family.evaluate(p)?;
    let nodes = if model.delays.is_empty() { 0 } else { opts.init.nodes.max(2) };
    let pencil = discretize(&model, nodes)?;
    let sol = solve_discretized(&pencil, prev.s(), opts.init.count.max(2))?;
    let ch = opts.regime.characteristic(&model);
    let phi_prev = prev.phi();

    let mut cands: Vec<(TrackState, f64)> = Vec::new();
    for entry in &sol.entries {
        let phi = lift_eigenvector(&pencil, &entry.phi);
        let Ok(out) = refine_newton(&ch, entry.s, &phi, opts.corrector_tol, opts.corrector_max_iter) else {
            continue;
        };
        let dup = cands.iter().any(|(c, _)| (c.s() - out.s).norm() <= 1e-8 * out.s.norm().max(1.0));
        if !dup {
            let ov = overlap(&phi_prev, &out.phi);
            cands.push((TrackState::new(p, out.s, &out.phi, out.residual), ov));
        }
    }
    let best = cands.iter().map(|c| c.1).fold(0.0, f64::max);
    if cands.is_empty() || best < OVERLAP_THRESHOLD {
        return Err(Error::ReinitFailed { threshold: OVERLAP_THRESHOLD, best });
    }
    let s_prev = prev.s();
    let mut tied: Vec<(TrackState, f64)> = cands.into_iter().filter(|c| c.1 >= best * (1.0 - OVERLAP_TIE)).collect();
    tied.sort_by(|x, y| (x.0.s() - s_prev).norm().total_cmp(&(y.0.s() - s_prev).norm()));
    if after_fold {
        tied.truncate(2);
        tied.sort_by(|x, y| y.0.s_r.total_cmp(&x.0.s_r));
    }
    Ok(tied.swap_remove(0))
}

/// Sweeps from `initial.p` to `options.p_fin`.
///
/// Grid points are `p_init + k·dp` with the last step shortened to land on
/// `p_fin`. Runtime failures end the sweep with a [`Termination`] other than
/// `Completed` and keep the samples computed so far; only invalid inputs are
/// returned as errors.
pub fn track_run(family: &ModelFamily, initial: &TrackState, options: &TrackOptions) -> Result<Trajectory> {
    check_regime(family, &options.regime)?;
    if initial.dim() != family.dim() || initial.phi_i.len() != initial.dim() {
        return Err(Error::Dimension(format!(
            "initial state of size {} for a family of size {}",
            initial.dim(),
            family.dim()
        )));
    }
    let p0 = initial.p;
    let span = options.p_fin - p0;
    let dp = options.dp;
    if !(dp.is_finite() && dp != 0.0) || (span != 0.0 && span.signum() != dp.signum()) {
        return Err(Error::Config(format!("step {dp} does not move from {p0} towards {}", options.p_fin)));
    }
    if !(options.corrector_tol > 0.0 && options.fold_eps > 0.0) {
        return Err(Error::Config("corrector_tol and fold_eps must be positive".into()));
    }
    let n_steps = if span == 0.0 { 0 } else { (span / dp - 1e-9).ceil().max(1.0) as usize };
    let grid = |k: usize| if k >= n_steps { options.p_fin } else { p0 + k as f64 * dp };
    let regime = &options.regime;

    let mut first = initial.clone();
    first.residual = residual_at(family, regime, initial)?;
    let mut traj = Trajectory {
        samples: vec![first],
        events: Vec::new(),
        options: options.clone(),
        termination: Termination::Completed,
    };

    let mut k = 1;
    while k <= n_steps {
        let prev = traj.last().clone();
        let p_next = grid(k);
        let stepped = system_at(family, regime, &prev).and_then(|sys| {
            integrate_step(&sys, &prev, p_next - prev.p, options.method, |st| system_at(family, regime, st))
        });
        let mut fold_at: Option<f64> = None;
        match stepped {
            Ok(mut next) => {
                next.p = p_next;
                let correct = options.corrector_every > 0 && (k % options.corrector_every == 0 || k == n_steps);
                if correct {
                    match refine_state(family, options, p_next, &next) {
                        Ok(fixed) => next = fixed,
                        Err(e) => {
                            traj.events.push(Event {
                                kind: EventKind::CorrectorFail,
                                p: p_next,
                                s: next.s(),
                                sample: traj.samples.len(),
                                detail: e.to_string(),
                            });
                            if options.reinit {
                                if let Ok((fresh, ov)) = reinitialize_at(family, p_next, &next, options, false) {
                                    traj.events.push(Event {
                                        kind: EventKind::Reinit,
                                        p: p_next,
                                        s: fresh.s(),
                                        sample: traj.samples.len(),
                                        detail: format!("overlap {ov:.3}"),
                                    });
                                    next = fresh;
                                }
                            }
                        }
                    }
                }
                // The integrator only keeps φᵀφ = 1 to first order; rescaling
                // does not move s.
                if next.norm_defect() > options.norm_tol {
                    next.renormalize();
                }
                if !correct || next.residual == prev.residual {
                    match residual_at(family, regime, &next) {
                        Ok(res) => next.residual = res,
                        Err(e) => {
                            traj.termination = Termination::Aborted { p: p_next, reason: e.to_string() };
                            break;
                        }
                    }
                }
                let idx = traj.samples.len();
                if prev.s_r != 0.0 && (prev.s_r * next.s_r < 0.0 || next.s_r == 0.0) {
                    let t = prev.s_r / (prev.s_r - next.s_r);
                    traj.events.push(Event {
                        kind: EventKind::AxisCrossing,
                        p: prev.p + t * (next.p - prev.p),
                        s: next.s(),
                        sample: idx,
                        detail: String::new(),
                    });
                }
                traj.samples.push(next);
                if let Some(mut ev) = detect_fold(&traj.samples[idx.saturating_sub(3)..], options.fold_eps) {
                    ev.sample = idx;
                    fold_at = Some(ev.p);
                    traj.events.push(ev);
                }
            }
            Err(Error::Defective { s }) => {
                traj.events.push(Event {
                    kind: EventKind::Fold,
                    p: prev.p,
                    s,
                    sample: traj.samples.len() - 1,
                    detail: "continuation matrix singular".into(),
                });
                fold_at = Some(prev.p);
            }
            Err(e) => {
                traj.termination = Termination::Aborted { p: prev.p, reason: e.to_string() };
                break;
            }
        }

        let Some(p_fold) = fold_at else {
            k += 1;
            continue;
        };
        if !options.reinit || k == n_steps {
            traj.termination = Termination::Fold { p: p_fold };
            break;
        }
        // Resume at the first grid point at least one step past the fold.
        let past = (k + 1..=n_steps).find(|&j| (grid(j) - p_fold) * dp.signum() >= dp.abs() * (1.0 - 1e-9));
        let Some(j) = past else {
            traj.termination = Termination::Fold { p: p_fold };
            break;
        };
        let last = traj.last().clone();
        match reinitialize_at(family, grid(j), &last, options, true) {
            Ok((fresh, ov)) => {
                traj.events.push(Event {
                    kind: EventKind::Reinit,
                    p: fresh.p,
                    s: fresh.s(),
                    sample: traj.samples.len(),
                    detail: format!("branch s = {} (overlap {ov:.3})", fresh.s()),
                });
                traj.samples.push(fresh);
                k = j + 1;
            }
            Err(e) => {
                traj.events.push(Event {
                    kind: EventKind::Reinit,
                    p: grid(j),
                    s: last.s(),
                    sample: traj.samples.len() - 1,
                    detail: format!("failed: {e}"),
                });
                traj.termination = Termination::Fold { p: p_fold };
                break;
            }
        }
    }
    Ok(traj)
}

/// Locates each sign change of `Re s` between consecutive samples by
/// bisection in `p`, re-solving the eigenpair by Newton at every midpoint.
pub fn find_crossing(family: &ModelFamily, trajectory: &Trajectory, options: &TrackOptions) -> Result<Vec<Crossing>> {
    let mut out = Vec::new();
    for pair in trajectory.samples.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        if a.s_r == 0.0 {
            if out.last().is_none_or(|c: &Crossing| c.p != a.p) {
                out.push(Crossing { p: a.p, s: a.s() });
            }
            continue;
        }
        if a.s_r * b.s_r >= 0.0 {
            continue;
        }
        let mut lo = refine_state(family, options, a.p, a).unwrap_or_else(|_| a.clone());
        let mut hi = refine_state(family, options, b.p, b).unwrap_or_else(|_| b.clone());
        if lo.s_r * hi.s_r > 0.0 {
            continue;
        }
        let mut found = None;
        for _ in 0..200 {
            if lo.s_r == 0.0 || hi.s_r == 0.0 || (hi.p - lo.p).abs() < 1e-9 {
                break;
            }
            let mid = 0.5 * (lo.p + hi.p);
            let warm = if lo.s_r.abs() <= hi.s_r.abs() { &lo } else { &hi };
            let st = refine_state(family, options, mid, warm)?;
            if st.s_r.abs() < 1e-9 {
                found = Some(st);
                break;
            }
            if st.s_r * lo.s_r > 0.0 {
                lo = st;
            } else {
                hi = st;
            }
        }
        let st = found.unwrap_or_else(|| if lo.s_r.abs() <= hi.s_r.abs() { lo } else { hi });
        out.push(Crossing { p: st.p, s: st.s() });
    }
    if let Some(last) = trajectory.samples.last() {
        if last.s_r == 0.0 && out.last().is_none_or(|c| c.p != last.p) {
            out.push(Crossing { p: last.p, s: last.s() });
        }
    }
    Ok(out)
}
