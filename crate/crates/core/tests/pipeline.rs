//! End-to-end invariants across modules.

use std::f64::consts::PI;

use lvperiodic::dde::{aligned_step, integrate, perturbed_history, Frame, HistoryFunction, IntegrateOptions, LvDelay};
use lvperiodic::degree::{certify, homotopy_scan, orbit_index, CertifyConfig, DegreeError, SigmaMap};
use lvperiodic::field::{apriori_bounds, eval_f, BetaChoice, BetaVariant, FourierLoop, GeometryConfig, ThetaGeometry};
use lvperiodic::model::{LVSystem, Mat2, Vec2};
use lvperiodic::orbitfinder::{residual, solve_candidate, sup_norm, verify_orbit, BetaMode, CollocationProblem, OrbitSolution, SweepOptions};
use lvperiodic::spectrum::{catalog, hopf_window, solve_amplitudes, HopfWindow};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn running() -> LVSystem {
    LVSystem::from_entries(2.0, 1.0, 1.0, 2.0, 3.0, 3.0, 3.0).unwrap()
}

fn random_loop(seed: u64, modes: usize, scale: f64) -> FourierLoop {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v: Vec<f64> = (0..4 * modes).map(|i| scale * rng.gen_range(-1.0..1.0) / (1 + i / 4) as f64).collect();
    FourierLoop::from_slice(modes, &v)
}

fn solve_running(modes: usize) -> (LVSystem, HopfWindow, OrbitSolution) {
    let sys = running();
    let w = hopf_window(&sys, None).unwrap();
    let cat = catalog(&sys, &w);
    let prob = CollocationProblem::new(&sys, modes, BetaMode::One, FourierLoop::zeros(modes));
    let sol = solve_candidate(&cat[0], &prob, Some(&w), &SweepOptions::default()).unwrap();
    (sys, w, sol)
}

#[test]
fn truncation_doubling_is_spectrally_accurate() {
    let (_, _, s32) = solve_running(32);
    let (_, _, s64) = solve_running(64);
    assert!((s32.lambda - s64.lambda).abs() < 1e-9, "{} vs {}", s32.lambda, s64.lambda);
    let diff = s64.loop_.resized(32).sub(&s32.loop_).max_abs_coeff();
    assert!(diff < 1e-8, "coefficient change {diff}");
}

#[test]
fn periodic_segment_has_zero_mean() {
    // integrate one period from the orbit's own history and average the trajectory
    let (sys, _, sol) = solve_running(32);
    let lambda = sol.lambda;
    let period = sol.period;
    let x = sol.loop_.clone();
    let dx = x.derivative();
    let h = aligned_step(period / 4000.0, sys.tau);
    let hist = HistoryFunction::from_fn(sys.tau, (sys.tau / h).round() as usize, |s| {
        let v = x.eval(s / lambda);
        let d = dx.eval(s / lambda);
        (v.to_vec(), vec![d[0] / lambda, d[1] / lambda])
    });
    let tr = integrate(&LvDelay::new(&sys, Frame::Shifted), &hist, period, h, &IntegrateOptions::default()).unwrap();
    // the step is aligned to τ, not T, so sample the dense output on [0, T]
    assert!(tr.t1 >= period - 1e-12);
    let n = 4000;
    let mut area = [0.0; 2];
    let mut buf = [0.0; 2];
    for q in 0..n {
        tr.eval(period * q as f64 / n as f64, &mut buf);
        for i in 0..2 {
            area[i] += buf[i] * period / n as f64;
        }
    }
    for a in area {
        assert!(a.abs() < 1e-6 * period, "integral {a}");
    }
}

#[test]
fn homotopy_keeps_orbit_off_the_boundary() {
    let (sys, w, sol) = solve_running(16);
    let geom = ThetaGeometry::build(&sys, w.lambda_hi, &GeometryConfig::default(), &[sol.norm()]).unwrap();
    let scan = homotopy_scan(&sol.loop_, sol.lambda, &sys, &geom, 200);
    assert!(scan.iter().all(|s| s.margin > 0.0));
    assert!(scan.last().unwrap().residual < 1e-10);
    // Lipschitz in θ: the jumps on a uniform mesh stay proportional to the step
    let jumps: Vec<f64> = scan.windows(2).map(|p| (p[1].residual - p[0].residual).abs()).collect();
    let worst = jumps.iter().cloned().fold(0.0, f64::max);
    let span = scan.iter().map(|s| s.residual).fold(0.0, f64::max);
    assert!(worst <= 4.0 * span / 200.0 + 1e-14, "jump {worst} vs span {span}");
}

#[test]
fn tau_zero_admits_no_orbit_and_no_certificate() {
    let sys = running().with_tau(0.0).unwrap();
    let prob = CollocationProblem::new(&sys, 8, BetaMode::One, FourierLoop::zeros(8));
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for q in 0..30 {
        let x = random_loop(100 + q, 8, 0.3);
        let mut p = prob.clone();
        p.phase_ref = x.clone();
        if let Ok(s) = lvperiodic::orbitfinder::newton_solve(&x, rng.gen_range(0.05..1.0), &p, &Default::default()) {
            assert!(s.norm() < 1e-8);
        }
    }
    assert!(matches!(certify(&sys.a, &sys.r, 0.0, &CertifyConfig::default()), Err(DegreeError::NoWindow(_))));
}

#[test]
fn resonant_fixture_is_rejected() {
    let a = Mat2::new(3.0, 2.0, 2.0, 3.0);
    let r = Vec2::new(5.0, 5.0);
    assert!(matches!(certify(&a, &r, 8.0, &CertifyConfig::default()), Err(DegreeError::DegenerateOrbit { k: 1, .. })));
    // the same matrix away from the resonance certifies
    let cert = certify(&a, &r, 7.0, &CertifyConfig { modes: 32, ..Default::default() }).unwrap();
    assert!(cert.nontrivial);
}

fn admissible() -> impl Strategy<Value = LVSystem> {
    (0.5f64..3.0, 0.05f64..1.0, 0.05f64..1.0, 0.5f64..3.0, 0.5f64..4.0, 0.5f64..4.0, 0.5f64..8.0)
        .prop_filter_map("needs (A0)-(A2) and a window", |(a11, a12, a21, a22, r1, r2, tau)| {
            let sys = LVSystem::from_entries(a11, a12, a21, a22, r1, r2, tau).ok()?;
            (sys.hypotheses().all_pass() && hopf_window(&sys, None).is_ok()).then_some(sys)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn accepted_candidates_have_clean_bordered_operators(sys in admissible()) {
        let w = hopf_window(&sys, None).unwrap();
        let mut cat = catalog(&sys, &w);
        let profile = GeometryConfig::default().profile(&sys).unwrap();
        prop_assume!(solve_amplitudes(&mut cat, &profile).is_ok());
        let sigma = SigmaMap::for_window(&w, &cat);
        for c in cat.iter().take(4) {
            if let Ok(idx) = orbit_index(c, &sys, &profile, &sigma, 16) {
                prop_assert!(idx.kernel_residual < 1e-8);
                prop_assert!((idx.functional_on_kernel - 1.0).abs() < 1e-10);
                prop_assert!(idx.tangent_residual < 1e-8);
                prop_assert!(idx.gamma.components.keys().all(|&k| k == c.k));
                prop_assert_eq!(idx.gamma.get(2 * c.k), 0);
            }
        }
    }

    #[test]
    fn f_output_has_zero_mean_and_closes(seed in 0u64..500, lambda in 0.2f64..0.6, theta in 0.0f64..1.0) {
        let sys = running();
        let x = random_loop(seed, 6, 0.3);
        let f = eval_f(&x, lambda, theta, &sys, &BetaChoice::One);
        let (a, b) = (f.eval(0.0), f.eval(2.0 * PI));
        let n = 512;
        for i in 0..2 {
            prop_assert!((a[i] - b[i]).abs() < 1e-12);
            let mean: f64 = (0..n).map(|q| f.eval(2.0 * PI * q as f64 / n as f64)[i]).sum::<f64>() / n as f64;
            prop_assert!(mean.abs() < 1e-12);
        }
    }

    #[test]
    fn beta_is_one_near_zero_and_alpha0_far_out(seed in 0u64..500, s in 1e-6f64..1e-3, big in 10.0f64..100.0) {
        let sys = running();
        let geom = ThetaGeometry::build(&sys, 3.0 / (2.0 * PI), &GeometryConfig::default(), &[]).unwrap();
        let x = random_loop(seed, 4, 1.0);
        let u = x.scaled(1.0 / x.norm());
        prop_assert_eq!(geom.beta(&u.scaled(s), BetaVariant::Radial), 1.0);
        prop_assert_eq!(geom.beta(&u.scaled(big), BetaVariant::Radial), geom.alpha0);
        prop_assert_eq!(geom.beta(&u.scaled(s), BetaVariant::Distance), 1.0);
        prop_assert_eq!(geom.beta(&u.scaled(1e20), BetaVariant::Distance), geom.alpha0);
    }

    #[test]
    fn residual_sup_is_invariant_under_grid_shifts(seed in 0u64..500, cells in 0usize..200, lambda in 0.2f64..0.6) {
        let sys = running();
        let prob = CollocationProblem::new(&sys, 8, BetaMode::One, FourierLoop::zeros(8));
        let m = prob.grid().points();
        let x = random_loop(seed, 8, 0.4);
        let phi = 2.0 * PI * (cells % m) as f64 / m as f64;
        let a = sup_norm(&residual(&x, lambda, &prob));
        let b = sup_norm(&residual(&x.act(phi), lambda, &prob));
        prop_assert!((a - b).abs() < 1e-12 * a.max(1.0));
    }

    #[test]
    fn trajectories_stay_positive_and_inside_the_box(eps in 1e-4f64..0.2, t_end in 2.0f64..10.0) {
        // before the instability grows out of the fixed step's reach
        let sys = running();
        let bounds = apriori_bounds(&sys, 3.0 / (2.0 * PI)).unwrap();
        let hist = perturbed_history([sys.b[0], sys.b[1]], eps, sys.tau);
        let tr = integrate(&LvDelay::new(&sys, Frame::Original), &hist, t_end, 0.01, &IntegrateOptions::default()).unwrap();
        for q in 0..tr.len() {
            for i in 0..2 {
                let u = tr.state(q)[i];
                prop_assert!(u > 0.0);
                let x = u - sys.b[i];
                prop_assert!(x > -bounds.d[i] && x < bounds.d[i + 2]);
            }
        }
    }
}

#[test]
fn found_orbit_passes_every_verification_check() {
    let (sys, w, sol) = solve_running(16);
    let rep = verify_orbit(&sol, &sys, Some(&w));
    assert!(rep.all_ok(), "{}", rep.render());
    assert!(sol.period > 1.5 && sol.period < 3.0);
}
