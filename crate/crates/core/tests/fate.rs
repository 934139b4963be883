use esdyn_core::asymptotics::{catalog_generator, CatalogParams};
use esdyn_core::dynamics::{self, Generator, SolverOptions};
use esdyn_core::ensemble::{sample_indexed, EnsembleSpec};
use esdyn_core::fate::{detect_fate, fate_statistics, margin_curve, FateError, FateOptions, FateTag};
use esdyn_core::geometry::min_pt_eigenvalue;
use esdyn_core::linalg::{real, CMatrix};
use esdyn_core::state::{product_ket, Bell, QState};

fn catalog(class_id: u8) -> Generator {
    catalog_generator(class_id, &CatalogParams::default()).unwrap()
}

/// `a|00⟩ + b|11⟩` with real amplitudes.
fn two_level(a2: f64) -> QState {
    let mut psi = esdyn_core::linalg::CVector::zeros(4);
    psi[0] = real(a2.sqrt());
    psi[3] = real((1.0 - a2).sqrt());
    QState::from_pure(&psi, 2, 2).unwrap()
}

/// Margin of `a|00⟩ + b|11⟩` under independent amplitude damping at γ = 1:
/// the {01, 10} block of the partial transpose has diagonal `b²p(1−p)` and
/// off-diagonal `ab(1−p)`, `p = 1 − e^{−t}`.
fn damped_margin(a2: f64, t: f64) -> f64 {
    let p = 1.0 - (-t).exp();
    let b2 = 1.0 - a2;
    let ab = (a2 * b2).sqrt();
    let block = b2 * p * (1.0 - p) - ab * (1.0 - p);
    // Other PT eigenvalues: populations of 00 and 11.
    let p00 = a2 + b2 * p * p;
    let p11 = b2 * (1.0 - p) * (1.0 - p);
    block.min(p00).min(p11)
}

#[test]
fn product_state_under_local_damping_is_never_entangled() {
    let rho = QState::from_pure(&product_ket(&[real(0.6), real(0.8)], &[real(0.8), real(-0.6)]), 2, 2).unwrap();
    let rec = detect_fate(&catalog(2), &rho, &FateOptions::default()).unwrap();
    assert_eq!(rec.fate_tag, FateTag::NeverEntangled);
    assert!(rec.death_time.is_none() && rec.birth_time.is_none() && rec.revival_times.is_empty());
}

#[test]
fn sudden_and_asymptotic_death_at_equal_concurrence() {
    let opts = FateOptions::default();
    // b² = 0.9: block margin (1−p)(0.9p − 0.3) vanishes at p = 1/3, t = ln 1.5.
    let sudden = detect_fate(&catalog(2), &two_level(0.1), &opts).unwrap();
    assert_eq!(sudden.fate_tag, FateTag::SuddenDeath);
    assert!((sudden.initial_concurrence - 0.6).abs() < 1e-12);
    let t_death = sudden.death_time.unwrap();
    assert!((t_death - 1.5_f64.ln()).abs() <= 2.0 * opts.refine_tol, "{t_death}");
    // Brute-force scan of the closed form agrees.
    let scan = (0..200_000).map(|k| k as f64 * 1e-5).find(|&t| damped_margin(0.1, t) >= -opts.margin_tol).unwrap();
    assert!((t_death - scan).abs() < 1e-4);
    assert!(sudden.final_margin >= -opts.margin_tol);

    // b² = 0.1: (1−p)(0.1p − 0.3) < 0 for every finite t.
    let slow = detect_fate(&catalog(2), &two_level(0.9), &opts).unwrap();
    assert!((slow.initial_concurrence - 0.6).abs() < 1e-12);
    assert_eq!(slow.fate_tag, FateTag::AsymptoticDeath);
    assert!(slow.death_time.is_none());
    assert!((slow.final_margin - damped_margin(0.9, opts.horizon)).abs() < 1e-9);
    assert!(slow.final_margin < 0.0 && slow.asymptotic_margin.abs() < 1e-12);
}

#[test]
fn death_bracket_straddles_the_threshold() {
    let opts = FateOptions::default();
    let g = catalog(2);
    let rho = two_level(0.1);
    let t = detect_fate(&g, &rho, &opts).unwrap().death_time.unwrap();
    let traj = dynamics::propagate(&g, &rho, &[0.0, t - opts.refine_tol, t], &SolverOptions::default()).unwrap();
    assert!(min_pt_eigenvalue(&traj.states()[1]) < -opts.margin_tol);
    assert!(min_pt_eigenvalue(&traj.states()[2]) >= -opts.margin_tol);
}

#[test]
fn phi_plus_under_depolarizing_dies_at_ln3() {
    // ρ(t) = e^{−t}Φ+ + (1 − e^{−t}) I/4: margin (1 − 3e^{−t})/4.
    let g = catalog(1);
    let rho = QState::bell(Bell::PhiPlus);
    let rec = detect_fate(&g, &rho, &FateOptions::default()).unwrap();
    assert_eq!(rec.fate_tag, FateTag::SuddenDeath);
    assert!((rec.death_time.unwrap() - 3.0_f64.ln()).abs() < 2e-6);

    let grid = dynamics::uniform_grid(5.0, 101);
    let curve = margin_curve(&dynamics::propagate(&g, &rho, &grid, &SolverOptions::default()).unwrap());
    let sign_changes = curve.windows(2).filter(|w| (w[0].margin < 0.0) != (w[1].margin < 0.0)).count();
    assert_eq!(sign_changes, 1);
    for p in &curve {
        assert!((p.margin - (1.0 - 3.0 * (-p.time).exp()) / 4.0).abs() < 1e-10);
        if p.margin >= 0.0 {
            assert!(p.concurrence.unwrap() < 1e-12);
        } else {
            assert!(p.concurrence.unwrap() > 0.0);
        }
    }
}

#[test]
fn zero_generator_gives_constant_margin() {
    let g = Generator::constant((2, 2), CMatrix::zeros(4, 4), vec![]).unwrap();
    let rho = QState::maximally_mixed(2, 2).mix(&QState::basis(2, 2, 1), 0.5).unwrap();
    let traj = dynamics::propagate(&g, &rho, &dynamics::uniform_grid(3.0, 7), &SolverOptions::default()).unwrap();
    let curve = margin_curve(&traj);
    assert!(curve.iter().all(|p| (p.margin - curve[0].margin).abs() < 1e-15));
}

#[test]
fn bell_pumping_creates_lasting_entanglement() {
    let rho = QState::basis(2, 2, 1);
    let rec = detect_fate(&catalog(3), &rho, &FateOptions::default()).unwrap();
    assert_eq!(rec.fate_tag, FateTag::AsymptoticallyEntangled);
    assert!(rec.birth_time.unwrap() > 0.0);
    assert!(rec.final_margin < -1e-4);
}

#[test]
fn short_horizon_is_reported() {
    let opts = FateOptions { horizon: 0.5, ..FateOptions::default() };
    let err = detect_fate(&catalog(1), &QState::bell(Bell::PhiPlus), &opts).unwrap_err();
    assert!(matches!(err, FateError::HorizonTooShort { .. }), "{err}");
}

#[test]
fn class1_haar_states_all_die_in_finite_time() {
    let spec = EnsembleSpec::haar_pure(17);
    let opts = FateOptions::default();
    let (stats, outcomes) = fate_statistics(&catalog(1), &spec, 200, &opts, Some(2)).unwrap();
    assert_eq!(stats.n_succeeded, 200);
    assert_eq!(stats.fraction(FateTag::AsymptoticallyEntangled).count, 0);
    let sudden = stats.fraction(FateTag::SuddenDeath);
    let never = stats.fraction(FateTag::NeverEntangled);
    assert!((sudden.fraction + never.fraction - 1.0).abs() < 1e-12);
    for o in &outcomes {
        let rec = o.record.as_ref().unwrap();
        if rec.initial_margin < -opts.margin_tol {
            let t = rec.death_time.unwrap();
            assert!(t > 0.0 && t < opts.horizon);
        }
    }
}

#[test]
fn record_invariants_hold_across_classes() {
    let opts = FateOptions::default();
    for class_id in 1..=6u8 {
        let spec = EnsembleSpec::hilbert_schmidt(class_id as u64);
        let (stats, outcomes) = fate_statistics(&catalog(class_id), &spec, 40, &opts, None).unwrap();
        let total: f64 = stats.fractions.values().map(|f| f.fraction).sum();
        assert!((total - 1.0).abs() < 1e-12 || stats.n_succeeded == 0);
        for f in stats.fractions.values() {
            assert!(f.ci_low <= f.fraction && f.fraction <= f.ci_high);
        }
        for rec in outcomes.iter().filter_map(|o| o.record.as_ref()) {
            match rec.fate_tag {
                FateTag::SuddenDeath => assert!(rec.death_time.is_some() && rec.final_margin >= -opts.margin_tol),
                FateTag::AsymptoticallyEntangled => assert!(rec.final_margin < -opts.margin_tol),
                _ => {}
            }
            assert!(rec.revival_times.windows(2).all(|w| w[0] < w[1]));
            if let Some(d) = rec.death_time {
                assert!(rec.revival_times.iter().all(|&r| r > d));
            }
            if matches!(class_id, 3 | 6) && rec.initial_margin < -opts.margin_tol {
                assert!(rec.final_margin <= opts.margin_tol);
            }
        }
    }
}

#[test]
fn statistics_do_not_depend_on_worker_count() {
    let spec = EnsembleSpec::fixed_concurrence(0.6, 5).unwrap();
    let opts = FateOptions::default();
    let (s1, o1) = fate_statistics(&catalog(2), &spec, 48, &opts, Some(1)).unwrap();
    let (s3, o3) = fate_statistics(&catalog(2), &spec, 48, &opts, Some(3)).unwrap();
    assert_eq!(s1, s3);
    assert_eq!(o1, o3);
}

#[test]
fn single_sample_fractions_are_degenerate() {
    let (stats, _) = fate_statistics(&catalog(1), &EnsembleSpec::haar_pure(1), 1, &FateOptions::default(), Some(1)).unwrap();
    for f in stats.fractions.values() {
        assert!(f.fraction == 0.0 || f.fraction == 1.0);
        assert!(f.ci_low <= f.fraction && f.fraction <= f.ci_high);
    }
}

#[test]
fn local_dynamics_never_entangle_separable_inputs() {
    let spec = EnsembleSpec::hilbert_schmidt(99);
    let opts = FateOptions::default();
    let n = 200;
    let (stats, _) = fate_statistics(&catalog(2), &spec, n, &opts, None).unwrap();
    let separable = (0..n as u64)
        .filter(|&k| min_pt_eigenvalue(&sample_indexed(&spec, (2, 2), k).unwrap()) >= -opts.margin_tol)
        .count();
    assert_eq!(stats.fraction(FateTag::NeverEntangled).count, separable);
}
