//! Acceptance suite. Every criterion prints one PASS/FAIL line to stderr,
//! including under the default output capture.

mod common;

use std::f64::consts::FRAC_PI_2;
use std::io::Write as _;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use common::*;
use delaytrack::charfun::{eval_hp, eval_hp_ds, eval_hs, eval_hs_ds, Characteristic, WamsSpec};
use delaytrack::init::refine_newton;
use delaytrack::model::{DelayTerm, DelayedLinearModel, ModelDerivatives, ModelFamily};
use delaytrack::oracle::{compare_trajectory, hayes_roots, rand_ddae, spectrum_at, CompareOptions};
use delaytrack::sparse::SparseMat;
use delaytrack::track::{
    assemble, assemble_multi, assemble_single, assemble_wams, find_crossing, integrate_step, track_run, EventKind,
    Method, Regime, TrackOptions, TrackState, Trajectory,
};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn hayes_initial(p: f64) -> TrackState {
    refined_state(&hayes_family(), &Regime::DelayParam { index: 0 }, p, c(-0.3, 1.3))
}

fn hayes_sweep(dp: f64, method: Method, corrector_every: usize) -> Trajectory {
    let regime = Regime::DelayParam { index: 0 };
    let mut opts = TrackOptions::new(1.0, 2.0, regime);
    opts.dp = dp;
    opts.method = method;
    opts.corrector_every = corrector_every;
    track_run(&hayes_family(), &hayes_initial(1.0), &opts).expect("sweep")
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let sol = spectrum_at(&hayes_family(), 1.0, 16, c(0.0, 0.0), 4).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let truth = hayes_roots(0.0, -1.0, 1.0, 2).map_err(|e| e.to_string())?;
    let principal = truth[0];
    let g = |s: Complex64| s + (-s).exp();
    if g(principal).norm() >= 1e-12 {
        return Err(format!("oracle root {principal} not certified"));
    }
    let mut worst: f64 = 0.0;
    for t in [principal, principal.conj()] {
        let near = sol.nearest(t).ok_or("empty spectrum")?;
        worst = worst.max((near.s - t).norm());
    }
    check(
        worst < 1e-6 && elapsed < Duration::from_secs(1),
        format!("principal pair {principal:.6}, max error {worst:.2e}, {:.3} s", elapsed.as_secs_f64()),
    )
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let family = hayes_family();
    let regime = Regime::DelayParam { index: 0 };
    let mut opts = TrackOptions::new(1.0, 2.0, regime.clone());
    opts.dp = 1e-3;
    opts.corrector_every = 10;
    let traj = track_run(&family, &hayes_initial(1.0), &opts).map_err(|e| e.to_string())?;
    let crossings = find_crossing(&family, &traj, &opts).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let [x] = crossings.as_slice() else {
        return Err(format!("expected one crossing, found {}", crossings.len()));
    };
    let err = (x.p - FRAC_PI_2).abs();
    check(
        traj.is_complete() && err < 1e-6 && x.s.re.abs() < 1e-9 && elapsed < Duration::from_secs(5),
        format!("p* = {:.12}, |p* - pi/2| = {err:.2e}, |Re s*| = {:.2e}, {:.3} s", x.p, x.s.re.abs(), elapsed.as_secs_f64()),
    )
}

/// Rightmost real part of the 2×2 family at `p`, from the quadratic formula
/// on the evaluated matrices.
fn two_by_two_abscissa(family: &ModelFamily, p: f64) -> f64 {
    let m = family.evaluate(p).unwrap().a0.to_dense();
    let tr = m[0][0] + m[1][1];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let disc = Complex64::new(tr * tr / 4.0 - det, 0.0).sqrt();
    (tr / 2.0 + disc.re).max(tr / 2.0 - disc.re)
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let flo = f(lo);
    assert!(flo * f(hi) < 0.0, "no sign change on [{lo}, {hi}]");
    while hi - lo > 1e-15 {
        let mid = 0.5 * (lo + hi);
        if f(mid) * flo > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn criterion_3() -> Outcome {
    let family = two_crossing_family();
    let regime = Regime::Multi;
    let truth = [
        bisect(|p| two_by_two_abscissa(&family, p), 0.5, 1.5),
        bisect(|p| two_by_two_abscissa(&family, p), 1.5, 2.5),
    ];
    let initial = refined_state(&family, &regime, 0.5, c(0.0, 2.0));
    let mut opts = TrackOptions::new(0.5, 2.5, regime);
    opts.dp = 1e-3;
    opts.corrector_every = 10;
    let traj = track_run(&family, &initial, &opts).map_err(|e| e.to_string())?;
    let crossings = find_crossing(&family, &traj, &opts).map_err(|e| e.to_string())?;
    if crossings.len() != 2 {
        return Err(format!("expected two crossings, found {}", crossings.len()));
    }
    let errs: Vec<f64> = crossings.iter().zip(&truth).map(|(x, t)| (x.p - t).abs()).collect();
    check(
        traj.is_complete() && errs.iter().all(|e| *e < 1e-6),
        format!(
            "p* = {:.10}, {:.10} vs truth {:.10}, {:.10} (errors {:.1e}, {:.1e})",
            crossings[0].p, crossings[1].p, truth[0], truth[1], errs[0], errs[1]
        ),
    )
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let regimes: Vec<(String, usize, Regime)> = vec![
        ("single".into(), 1, Regime::Single),
        ("multi mu=2".into(), 2, Regime::Multi),
        ("multi mu=3".into(), 3, Regime::Multi),
        ("multi mu=5".into(), 5, Regime::Multi),
        ("delay_param".into(), 3, Regime::DelayParam { index: 1 }),
        ("wams".into(), 1, Regime::Wams(wams_spec())),
    ];
    let mut parts = Vec::new();
    let mut ok = true;
    for (name, mu, regime) in regimes {
        let mut worst: f64 = 0.0;
        for _ in 0..100 {
            let r = rng.gen_range(2..=6);
            let mut model = random_model(&mut rng, r, mu);
            if let Regime::Wams(spec) = &regime {
                model.delays[0].tau = spec.tau0;
            }
            let derivs = random_derivs(&mut rng, &model);
            let state = random_state(&mut rng, r, 1.0);
            let sys = assemble(&regime, &model, &derivs, &state).map_err(|e| e.to_string())?;
            let (m, h) = split_oracle(&regime, &model, &derivs, &state);
            worst = worst.max(scaled_gap(&sys.matrix().to_dense(), &m)).max(scaled_gap_vec(&sys.h, &h));
        }
        ok &= worst <= 1e-13;
        parts.push(format!("{name} {worst:.1e}"));
    }
    check(ok, format!("max scaled entry gap: {}", parts.join(", ")))
}

fn system_gap(a: &delaytrack::track::ContinuationSystem, b: &delaytrack::track::ContinuationSystem) -> f64 {
    scaled_gap(&a.matrix().to_dense(), &b.matrix().to_dense()).max(scaled_gap_vec(&a.h, &b.h))
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut multi_single, mut wams_single, mut merge): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for _ in 0..100 {
        let model = random_model(&mut rng, 5, 1);
        let derivs = random_derivs(&mut rng, &model);
        let state = random_state(&mut rng, 5, 1.0);
        let single = assemble_single(&model, &derivs, &state).map_err(|e| e.to_string())?;
        let multi = assemble_multi(&model, &derivs, &state).map_err(|e| e.to_string())?;
        multi_single = multi_single.max(system_gap(&multi, &single));
        let spec = WamsSpec::constant(model.delays[0].tau);
        let wams = assemble_wams(&model, &derivs, &state, &spec).map_err(|e| e.to_string())?;
        wams_single = wams_single.max(system_gap(&wams, &single));

        // Two terms sharing one delay against their merged sum.
        let tau = model.delays[0].tau;
        let a = &model.delays[0].matrix;
        let b = random_sparse(&mut rng, 5, 0.4);
        let db = random_sparse(&mut rng, 5, 0.4);
        let split = DelayedLinearModel::new(
            model.e.clone(),
            model.a0.clone(),
            vec![DelayTerm::new(tau, a.clone()), DelayTerm::new(tau, b.clone())],
        );
        let split_d = ModelDerivatives {
            d_e: derivs.d_e.clone(),
            d_a0: derivs.d_a0.clone(),
            d_delays: vec![derivs.d_delays[0].clone(), db.clone()],
        };
        let merged = DelayedLinearModel::new(
            model.e.clone(),
            model.a0.clone(),
            vec![DelayTerm::new(tau, SparseMat::combine(5, 5, &[(1.0, a), (1.0, &b)]))],
        );
        let merged_d = ModelDerivatives {
            d_e: derivs.d_e.clone(),
            d_a0: derivs.d_a0.clone(),
            d_delays: vec![SparseMat::combine(5, 5, &[(1.0, &derivs.d_delays[0]), (1.0, &db)])],
        };
        let lhs = assemble_multi(&split, &split_d, &state).map_err(|e| e.to_string())?;
        let rhs = assemble_single(&merged, &merged_d, &state).map_err(|e| e.to_string())?;
        merge = merge.max(system_gap(&lhs, &rhs));
    }
    check(
        multi_single <= 1e-13 && wams_single <= 1e-13 && merge <= 1e-13,
        format!("multi(mu=1)/single {multi_single:.1e}, wams(constant)/single {wams_single:.1e}, merge {merge:.1e}"),
    )
}

/// `ṡ` from the continuation system against a central difference of
/// Newton-refined eigenvalues.
fn sensitivity_gap(family: &ModelFamily, regime: &Regime, p: f64, shift: Complex64) -> Result<f64, String> {
    let st = refined_state(family, regime, p, shift);
    let model = family.evaluate(p).map_err(|e| e.to_string())?;
    let derivs = family.derivatives(p).map_err(|e| e.to_string())?;
    let y = assemble(regime, &model, &derivs, &st).and_then(|s| s.tangent()).map_err(|e| e.to_string())?;
    let r = st.dim();
    let sdot = c(y[2 * r], y[2 * r + 1]);
    let h = 1e-5;
    let refine_at = |q: f64| -> Result<Complex64, String> {
        let m = family.evaluate(q).map_err(|e| e.to_string())?;
        let ch = match regime {
            Regime::Wams(spec) => Characteristic::Wams(&m, spec),
            _ => Characteristic::Plain(&m),
        };
        refine_newton(&ch, st.s(), &st.phi(), 1e-14, 30).map(|o| o.s).map_err(|e| e.to_string())
    };
    let fd = (refine_at(p + h)? - refine_at(p - h)?) / (2.0 * h);
    Ok((sdot - fd).norm())
}

fn criterion_6() -> Outcome {
    let cases: Vec<(&str, ModelFamily, Regime, f64, Complex64)> = vec![
        ("single", single_delay_family(), Regime::Single, 0.8, c(0.0, 1.0)),
        ("multi", multi_delay_family(), Regime::Multi, 0.7, c(0.0, 1.0)),
        ("multi quadratic", quadratic_family(), Regime::Multi, 0.5, c(0.0, 1.0)),
        ("multi two-crossing", two_crossing_family(), Regime::Multi, 1.3, c(0.0, 2.4)),
        ("multi fold", fold_family(), Regime::Multi, 0.5, c(-1.0, 0.7)),
        ("delay_param hayes", hayes_family(), Regime::DelayParam { index: 0 }, 1.0, c(-0.3, 1.3)),
        ("delay_param 2x2", delay_param_family(), Regime::DelayParam { index: 1 }, 1.2, c(0.0, 1.0)),
        ("wams", wams_family(), Regime::Wams(wams_spec()), 1.0, c(0.0, 1.4)),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, family, regime, p, shift) in cases {
        let gap = sensitivity_gap(&family, &regime, p, shift)?;
        ok &= gap < 1e-5;
        parts.push(format!("{name} {gap:.1e}"));
    }
    check(ok, format!("|sdot - FD|: {}", parts.join(", ")))
}

fn endpoint_error(traj: &Trajectory) -> f64 {
    let last = traj.last();
    let model = hayes_family().evaluate(last.p).unwrap();
    let truth = refine_newton(&Characteristic::Plain(&model), last.s(), &last.phi(), 1e-14, 30).unwrap();
    (last.s() - truth.s).norm()
}

fn criterion_7() -> Outcome {
    let e1 = endpoint_error(&hayes_sweep(1e-2, Method::Euler, 0));
    let e2 = endpoint_error(&hayes_sweep(5e-3, Method::Euler, 0));
    let r1 = endpoint_error(&hayes_sweep(0.1, Method::Rk4, 0));
    let r2 = endpoint_error(&hayes_sweep(0.05, Method::Rk4, 0));
    let euler = e1 / e2;
    let rk4 = r1 / r2;
    check(
        (1.7..=2.3).contains(&euler) && rk4 >= 12.0,
        format!("euler ratio {euler:.3} ({e1:.2e} -> {e2:.2e}), rk4 ratio {rk4:.2} ({r1:.2e} -> {r2:.2e})"),
    )
}

fn criterion_8() -> Outcome {
    let family = quadratic_family();
    let initial = refined_state(&family, &Regime::Multi, 0.1, c(0.0, 1.0));
    let mut opts = TrackOptions::new(0.1, 1.0, Regime::Multi);
    opts.dp = 1e-3;
    opts.corrector_every = 10;
    let quad = track_run(&family, &initial, &opts).map_err(|e| e.to_string())?;
    let closed_form = quad.samples.iter().map(|s| (s.s() - quadratic_root(s.p)).norm()).fold(0.0, f64::max);
    let q = compare_trajectory(&quad, &family, 10, &CompareOptions::default());
    let hayes = hayes_sweep(1e-3, Method::Euler, 10);
    let h = compare_trajectory(&hayes, &hayes_family(), 11, &CompareOptions::default());
    check(
        quad.is_complete() && hayes.is_complete() && q.max_distance < 1e-6 && h.max_distance < 1e-6,
        format!(
            "quadratic max_distance {:.1e} (all samples vs closed form {closed_form:.1e}), hayes max_distance {:.1e}",
            q.max_distance, h.max_distance
        ),
    )
}

fn criterion_9() -> Outcome {
    let family = fold_family();
    let regime = Regime::Multi;
    let initial = refined_state(&family, &regime, 0.0, c(-1.0, 1.0));
    let mut opts = TrackOptions::new(0.0, 1.8, regime);
    opts.dp = 1e-3;
    opts.corrector_every = 10;
    opts.reinit = true;
    let traj = track_run(&family, &initial, &opts).map_err(|e| e.to_string())?;
    let fold = traj.events_of(EventKind::Fold).next().ok_or("no fold event")?;
    let fold_err = (fold.p - 1.0).abs();
    let reinit = traj.events_of(EventKind::Reinit).next().ok_or("no reinitialization")?;
    let resumed = &traj.samples[reinit.sample];
    let root = (resumed.p - 1.0).sqrt();
    let branch_err = [-1.0 + root, -1.0 - root]
        .iter()
        .map(|b| (resumed.s() - c(*b, 0.0)).norm())
        .fold(f64::INFINITY, f64::min);
    let end = traj.last();
    let end_err = (end.s() - c(-1.0 + (end.p - 1.0).sqrt(), 0.0)).norm();
    check(
        fold_err <= 2.0 * opts.dp && branch_err < 1e-8 && traj.is_complete() && end_err < 1e-6,
        format!(
            "fold at p = {:.6} (|dp| {fold_err:.1e}), resumed at p = {:.4} on branch s = {:.6} ({}), end error {end_err:.1e}",
            fold.p,
            resumed.p,
            resumed.s().re,
            reinit.detail
        ),
    )
}

fn criterion_10() -> Outcome {
    let r = 5000;
    let model = rand_ddae(r, r / 2, 1e-3, 4, 10);
    let derivs = ModelDerivatives {
        d_e: SparseMat::zeros(r, r),
        d_a0: SparseMat::identity(r),
        d_delays: model.delays.iter().enumerate().map(|(j, d)| d.matrix.scale(0.5 + 0.25 * j as f64)).collect(),
    };
    let phi: Vec<Complex64> = (0..r).map(|i| c(1.0 / (1.0 + i as f64).sqrt(), 0.1)).collect();
    let state = TrackState::new(0.0, c(-1.0, 2.0), &phi, 0.0);
    let start = Instant::now();
    let sys = assemble_multi(&model, &derivs, &state).map_err(|e| e.to_string())?;
    let next = integrate_step(&sys, &state, 1e-3, Method::Euler, |st| assemble_multi(&model, &derivs, st))
        .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let finite = next.y().iter().all(|v| v.is_finite());
    let peak = peak_rss().ok_or("VmHWM unavailable")?;
    check(
        finite && elapsed < Duration::from_secs(10) && peak < 2 << 30,
        format!(
            "system dimension {}, nnz(M) {}, {:.3} s, peak RSS {:.0} MiB",
            sys.dim(),
            sys.matrix().nnz(),
            elapsed.as_secs_f64(),
            peak as f64 / (1 << 20) as f64
        ),
    )
}

fn criterion_11() -> Outcome {
    let specs = [wams_spec(), WamsSpec::new(0.05, 0.3, 0.05, 0.02, 1.5).unwrap()];
    let mut worst: f64 = 0.0;
    let mut points = 0;
    for spec in &specs {
        for i in 0..10 {
            for k in 0..10 {
                let s = c(-3.0 + 0.6 * i as f64 + 0.05, -9.5 + 2.0 * k as f64);
                // h_p loses about two digits to cancellation near s = 0, so a
                // smaller step would be dominated by rounding.
                let h = 1e-4 * s.norm().max(1.0);
                let fd = |f: &dyn Fn(Complex64) -> Complex64| (f(s + h) - f(s - h)) / (2.0 * h);
                let hp = |z: Complex64| eval_hp(spec, z).unwrap();
                let hs = |z: Complex64| eval_hs(spec, z).unwrap();
                let ap = eval_hp_ds(spec, s).map_err(|e| e.to_string())?;
                let as_ = eval_hs_ds(spec, s).map_err(|e| e.to_string())?;
                worst = worst.max((ap - fd(&hp)).norm() / ap.norm()).max((as_ - fd(&hs)).norm() / as_.norm());
                points += 1;
            }
        }
    }
    check(worst < 1e-6, format!("{points} grid points, max relative error {worst:.1e}"))
}

#[test]
fn primary_criteria() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("Hayes initializer accuracy", criterion_1),
        ("analytic delay margin", criterion_2),
        ("two-crossing recovery", criterion_3),
        ("encoding equivalence", criterion_4),
        ("reduction lattice", criterion_5),
        ("sensitivity oracle", criterion_6),
        ("integrator order", criterion_7),
        ("trajectory fidelity", criterion_8),
        ("fold handling", criterion_9),
        ("scalability smoke test", criterion_10),
        ("WAMS transfer derivatives", criterion_11),
    ];
    let mut failed = Vec::new();
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d),
            Err(d) => ("FAIL", d),
        };
        let _ = writeln!(std::io::stderr(), "[{tag}] criterion {:>2}: {name}: {detail} [{secs:.2} s]", i + 1);
        if outcome.is_err() {
            failed.push(i + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
