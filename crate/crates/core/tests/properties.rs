mod common;

use common::*;
use delaytrack::charfun::{eval_dp_ds, eval_p, eval_st, eval_std, WamsSpec};
use delaytrack::init::{EigenEntry, Eigensolution};
use delaytrack::model::{DelayedLinearModel, ModelDerivatives, ModelFamily};
use delaytrack::oracle::rand_ddae;
use delaytrack::sparse::SparseMat;
use delaytrack::track::{assemble_multi, track_run, Regime, TrackOptions};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn max_gap(a: &SparseMat<Complex64>, b: &SparseMat<Complex64>) -> f64 {
    let (a, b) = (a.to_dense(), b.to_dense());
    a.iter().flatten().zip(b.iter().flatten()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn affine_family(seed: u64, r: usize, mu: usize) -> (ModelFamily, DelayedLinearModel, ModelDerivatives) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut base = random_model(&mut rng, r, mu);
    base.e = SparseMat::identity(r);
    let slope = random_derivs(&mut rng, &base);
    let fam = ModelFamily::affine(base.clone(), slope.clone(), (-1.0, 1.0)).unwrap();
    (fam, base, slope)
}

fn cplx() -> impl Strategy<Value = Complex64> {
    (-3.0..1.0f64, -8.0..8.0f64).prop_map(|(re, im)| c(re, im))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn affine_derivatives_are_the_slope(seed in any::<u64>(), p in -1.0..1.0f64, r in 1usize..6, mu in 0usize..3) {
        let (fam, _, slope) = affine_family(seed, r, mu);
        let d = fam.derivatives(p).unwrap();
        let gap = |a: &SparseMat<f64>, b: &SparseMat<f64>| {
            a.to_dense().iter().flatten().zip(b.to_dense().iter().flatten()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
        };
        prop_assert!(gap(&d.d_e, &slope.d_e) <= 1e-14);
        prop_assert!(gap(&d.d_a0, &slope.d_a0) <= 1e-14);
        for (x, y) in d.d_delays.iter().zip(&slope.d_delays) {
            prop_assert!(gap(x, y) <= 1e-14);
        }
    }

    #[test]
    fn tabulated_snapshots_of_an_affine_family_recover_its_slope(seed in any::<u64>(), p in -0.9..0.9f64) {
        let (fam, _, slope) = affine_family(seed, 3, 1);
        let snaps = (0..=20).map(|k| {
            let q = -1.0 + 0.1 * k as f64;
            (q, fam.evaluate(q).unwrap())
        }).collect();
        let tab = ModelFamily::tabulated(snaps).unwrap();
        let d = tab.derivatives(p).unwrap();
        let bound = 10.0 * tab.fd_step_at(p);
        for (x, y) in d.d_a0.to_dense().iter().flatten().zip(slope.d_a0.to_dense().iter().flatten()) {
            prop_assert!((x - y).abs() <= bound, "{} vs {}", x, y);
        }
    }

    #[test]
    fn evaluation_is_reproducible(seed in any::<u64>(), p in -1.0..1.0f64) {
        let (fam, _, _) = affine_family(seed, 4, 2);
        prop_assert_eq!(fam.evaluate(p).unwrap(), fam.evaluate(p).unwrap());
    }

    #[test]
    fn characteristic_matrix_commutes_with_conjugation(seed in any::<u64>(), s in cplx()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_model(&mut rng, 4, 2);
        let a = eval_p(&m, s.conj()).unwrap();
        let b = eval_p(&m, s).unwrap().map(|v| v.conj());
        prop_assert!(max_gap(&a, &b) <= 1e-12 * (1.0 + a.max_abs()));
    }

    #[test]
    fn s_derivative_matches_central_difference(seed in any::<u64>(), s in cplx()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_model(&mut rng, 3, 2);
        let d = 1e-6;
        let hi = eval_p(&m, s + d).unwrap();
        let lo = eval_p(&m, s - d).unwrap();
        let fd = (&hi - &lo).scale(Complex64::new(0.5 / d, 0.0));
        let exact = eval_dp_ds(&m, s).unwrap();
        prop_assert!(max_gap(&fd, &exact) <= 1e-6 * exact.max_abs().max(1.0));
    }

    #[test]
    fn constant_delay_wams_reduces_to_the_plain_delay(seed in any::<u64>(), s in cplx(), tau0 in 0.01..1.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_model(&mut rng, 3, 1);
        let derivs = random_derivs(&mut rng, &m);
        let spec = WamsSpec::constant(tau0);
        let f = (-s * tau0).exp();
        let st = eval_st(&m, &spec, s).unwrap();
        let std = eval_std(&m, &derivs, &spec, s).unwrap();
        prop_assert!(max_gap(&st, &m.delays[0].matrix.map(|v| f * v)) <= 1e-14 * (1.0 + f.norm()));
        prop_assert!(max_gap(&std, &derivs.d_delays[0].map(|v| f * v)) <= 1e-14 * (1.0 + f.norm()));
    }

    #[test]
    fn eigensolution_is_sorted(values in proptest::collection::vec(cplx(), 0..12)) {
        let mut entries: Vec<EigenEntry> = values.iter().map(|&s| EigenEntry { s, phi: vec![s], residual: 0.0 }).collect();
        // Conjugate partners exercise the tie rule.
        entries.extend(values.iter().map(|&s| EigenEntry { s: s.conj(), phi: vec![s.conj()], residual: 0.0 }));
        let sol = Eigensolution::new(entries);
        for w in sol.entries.windows(2) {
            let (a, b) = (w[0].s, w[1].s);
            prop_assert!(a.re > b.re - 1e-9);
            if a == b.conj() && a.im != 0.0 {
                prop_assert!(a.im > 0.0);
            }
        }
        for e in &sol.entries {
            prop_assert_eq!(e.phi[0], e.s);
        }
    }

    #[test]
    fn rand_ddae_is_reproducible_with_static_algebraic_states(
        r in 2usize..40, frac in 0.0..1.0f64, density in 0.05..1.0f64, mu in 0usize..4, seed in any::<u64>()
    ) {
        let n_dyn = ((r as f64) * frac) as usize;
        let a = rand_ddae(r, n_dyn, density, mu, seed);
        prop_assert_eq!(&a, &rand_ddae(r, n_dyn, density, mu, seed));
        prop_assert_eq!(a.delay_count(), mu);
        for (i, j, v) in a.e.iter() {
            prop_assert!(i < n_dyn && j < n_dyn && v != 0.0);
        }
        for d in &a.delays {
            prop_assert!((0.01..=0.1).contains(&d.tau));
        }
    }

    #[test]
    fn state_survives_the_real_split(seed in any::<u64>(), r in 1usize..8, p in -5.0..5.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let st = random_state(&mut rng, r, p);
        let y = st.y();
        prop_assert_eq!(y.len(), 2 * r + 2);
        let back = st.with_y(p, &y);
        prop_assert_eq!(back.s(), st.s());
        prop_assert_eq!(back.phi(), st.phi());
    }

    #[test]
    fn multi_system_matches_the_complex_oracle(seed in any::<u64>(), r in 1usize..6, mu in 0usize..3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = random_model(&mut rng, r, mu);
        let derivs = random_derivs(&mut rng, &model);
        let state = random_state(&mut rng, r, 0.0);
        let sys = assemble_multi(&model, &derivs, &state).unwrap();
        let (m, h) = split_oracle(&Regime::Multi, &model, &derivs, &state);
        prop_assert!(scaled_gap(&sys.matrix().to_dense(), &m) <= 1e-12);
        prop_assert!(scaled_gap_vec(&sys.h, &h) <= 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn sweeps_are_monotone_with_events_in_range(a in 0.06..0.5f64, b in 0.7..1.19f64, forward in any::<bool>()) {
        let fam = quadratic_family();
        let (p0, p1) = if forward { (a, b) } else { (b, a) };
        let regime = Regime::Multi;
        let initial = refined_state(&fam, &regime, p0, c(0.0, 1.0));
        let mut opts = TrackOptions::new(p0, p1, regime);
        opts.dp = 2e-3 * (p1 - p0).signum();
        let traj = track_run(&fam, &initial, &opts).unwrap();
        let dir = (p1 - p0).signum();
        for w in traj.samples.windows(2) {
            prop_assert!((w[1].p - w[0].p) * dir > 0.0);
        }
        prop_assert!((traj.last().p - p1).abs() < 1e-12);
        let (lo, hi) = (p0.min(p1), p0.max(p1));
        for e in &traj.events {
            prop_assert!(e.p >= lo - 1e-12 && e.p <= hi + 1e-12);
            prop_assert!(e.sample < traj.samples.len());
        }
    }
}
