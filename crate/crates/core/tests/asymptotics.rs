use esdyn_core::asymptotics::{
    asymptotic_set, asymptotic_set_nonautonomous, catalog_generator, classify_generator, classify_theorem_class,
    stationary_set_autonomous, AsymptoticOptions, AsymptoticsError, CatalogParams, Cardinality, Representation,
    CLASS4_MIN_STRENGTH, CLASS6_MIN_STRENGTH, DEFAULT_CLASS_TOL, DEFAULT_SPECTRAL_TOL,
};
use esdyn_core::dynamics::{self, Generator, Hamiltonian, Jump, RateFn, SolverOptions};
use esdyn_core::ensemble::{sample_indexed, EnsembleSpec};
use esdyn_core::linalg::{self, CMatrix};
use esdyn_core::state::{Bell, QState};

const TOL: f64 = DEFAULT_CLASS_TOL;

fn catalog(class_id: u8) -> Generator {
    catalog_generator(class_id, &CatalogParams::default()).unwrap()
}

fn strength(c: f64) -> CatalogParams {
    CatalogParams { gamma: None, strength: Some(c) }
}

fn random_states(n: u64, seed: u64) -> Vec<QState> {
    let spec = EnsembleSpec::hilbert_schmidt(seed);
    (0..n).map(|k| sample_indexed(&spec, (2, 2), k).unwrap()).collect()
}

/// Pauli jumps at rate `amplitude·e^{−t}` each, built without the catalog.
fn quenched_depolarizing_by_hand(amplitude: f64) -> Generator {
    let p = [linalg::identity(2), linalg::pauli_x(), linalg::pauli_y(), linalg::pauli_z()];
    let mut jumps = Vec::new();
    for i in 0..4 {
        for j in 0..4 {
            if i + j > 0 {
                jumps.push(Jump::new(linalg::kron(&p[i], &p[j]), RateFn::Exponential { amplitude, tau: 1.0 }));
            }
        }
    }
    Generator::new((2, 2), Hamiltonian::Constant(CMatrix::zeros(4, 4)), jumps).unwrap().force_nonautonomous()
}

#[test]
fn depolarizing_has_unique_maximally_mixed_fixed_point() {
    let g = catalog(1);
    let a = stationary_set_autonomous(&g, DEFAULT_SPECTRAL_TOL).unwrap();
    assert_eq!(a.diagnostics().kernel_dimension, Some(1));
    assert_eq!(a.cardinality(), Cardinality::One);
    let Representation::Unique(s) = a.representation() else { panic!("expected unique") };
    let mixed = QState::maximally_mixed(2, 2);
    assert!(s.trace_distance(&mixed).unwrap() < 1e-12);
    // Cross-check by propagation to 50/γ.
    for rho in random_states(10, 11) {
        let traj = dynamics::propagate(&g, &rho, &[0.0, 50.0], &SolverOptions::default()).unwrap();
        assert!(traj.last().unwrap().1.trace_distance(&mixed).unwrap() < 1e-12);
    }
}

#[test]
fn dephasing_stationary_set_is_all_diagonal_states() {
    let a = stationary_set_autonomous(&catalog(5), DEFAULT_SPECTRAL_TOL).unwrap();
    assert_eq!(a.diagnostics().kernel_dimension, Some(4));
    assert_eq!(a.cardinality(), Cardinality::Many);
    let Representation::AffineFamily { basis, .. } = a.representation() else { panic!("expected affine family") };
    assert_eq!(basis.len(), 3);
    for b in basis {
        assert!(linalg::trace(b).norm() < 1e-12);
        assert!(linalg::hermiticity_defect(b) < 1e-12);
    }
    for rho in random_states(20, 5) {
        let diag = QState::new(CMatrix::from_diagonal(&rho.matrix().diagonal()), 2, 2).unwrap();
        assert!(a.membership_residual(&diag) < 1e-10);
        // Off-diagonal states are not members.
        assert!(a.membership_residual(&rho) > 1e-3);
    }
    assert!(a.membership_residual(&QState::basis(2, 2, 0)) < 1e-10);
    assert!(a.membership_residual(&QState::maximally_mixed(2, 2)) < 1e-10);
}

#[test]
fn amplitude_damping_fixed_point_is_ground_state() {
    let a = stationary_set_autonomous(&catalog(2), DEFAULT_SPECTRAL_TOL).unwrap();
    let Representation::Unique(s) = a.representation() else { panic!("expected unique") };
    assert!(s.trace_distance(&QState::basis(2, 2, 0)).unwrap() < 1e-12);
}

#[test]
fn bell_pumping_fixed_point_is_phi_plus() {
    let a = stationary_set_autonomous(&catalog(3), DEFAULT_SPECTRAL_TOL).unwrap();
    let Representation::Unique(s) = a.representation() else { panic!("expected unique") };
    assert!(s.trace_distance(&QState::bell(Bell::PhiPlus)).unwrap() < 1e-12);
}

#[test]
fn quenched_depolarizing_total_map_matches_closed_form() {
    // Each Pauli at rate (c/16)e^{−t}: the identity weight decays as
    // exp(−∫γ) with ∫γ = c, so Φ∞(ρ) = e^{−c}ρ + (1 − e^{−c}) I/4.
    let c = 2.0;
    let a = asymptotic_set_nonautonomous(&catalog(4), 50.0, 1e-9, &SolverOptions::default()).unwrap();
    assert!(matches!(a.representation(), Representation::ImageOfD { .. }));
    assert_eq!(a.cardinality(), Cardinality::Many);
    let mixed = QState::maximally_mixed(2, 2);
    for rho in random_states(10, 2) {
        let expected = rho.mix(&mixed, (-c as f64).exp()).unwrap();
        let got = a.limit_of(&rho).unwrap();
        assert!(linalg::max_abs(&(got.matrix() - expected.matrix())) < 1e-6);
    }
    // Catalog and hand-built versions agree.
    let b = asymptotic_set_nonautonomous(&quenched_depolarizing_by_hand(c / 16.0), 50.0, 1e-9, &SolverOptions::default()).unwrap();
    assert!(linalg::max_abs(&(a.limit_map() - b.limit_map())) < 1e-9);
}

#[test]
fn forced_nonautonomous_route_agrees_with_spectral_route() {
    for class_id in [1, 2, 3, 5] {
        let g = catalog(class_id);
        let spectral = stationary_set_autonomous(&g, DEFAULT_SPECTRAL_TOL).unwrap();
        let forced = g.clone().force_nonautonomous();
        // Amplitude-damping coherences decay as e^{−γt/2}: T = 50 is too short.
        let image = asymptotic_set_nonautonomous(&forced, 100.0, 1e-9, &SolverOptions::default()).unwrap();
        for rho in random_states(5, class_id as u64) {
            let sigma = image.limit_of(&rho).unwrap();
            assert!(spectral.membership_residual(&sigma) < 1e-6, "class {class_id}");
            assert!(sigma.trace_distance(&spectral.limit_of(&rho).unwrap()).unwrap() < 1e-6);
        }
    }
}

#[test]
fn zero_strength_quench_is_the_identity_map() {
    let a = asymptotic_set_nonautonomous(&quenched_depolarizing_by_hand(0.0), 50.0, 1e-12, &SolverOptions::default()).unwrap();
    assert!(linalg::max_abs(&(a.limit_map() - CMatrix::identity(16, 16))) < 1e-14);
    assert_eq!(a.cardinality(), Cardinality::Many);
    for rho in random_states(5, 9) {
        assert!(a.membership_residual(&rho) < 1e-10);
    }
}

#[test]
fn short_horizon_is_not_converged() {
    match asymptotic_set_nonautonomous(&catalog(4), 4.0, 1e-9, &SolverOptions::default()).unwrap_err() {
        AsymptoticsError::NotConverged { residual, horizon } => {
            assert!(residual > 1e-9);
            assert_eq!(horizon, 4.0);
        }
        e => panic!("unexpected {e}"),
    }
}

#[test]
fn unique_sets_classify_by_region() {
    for (class_id, expected) in [(1, 1), (2, 2), (3, 3)] {
        let a = stationary_set_autonomous(&catalog(class_id), DEFAULT_SPECTRAL_TOL).unwrap();
        let t = classify_theorem_class(&a, TOL, 8, 0).unwrap();
        assert_eq!(t.class_id, expected);
        assert_eq!(t.evidence.cardinality, Cardinality::One);
    }
    let a = stationary_set_autonomous(&catalog(2), DEFAULT_SPECTRAL_TOL).unwrap();
    let t = classify_theorem_class(&a, TOL, 8, 0).unwrap();
    assert!(t.evidence.min_margin.abs() < 1e-12);
}

#[test]
fn quenched_depolarizing_worst_probe_is_a_bell_image() {
    let (_, t) = classify_generator(&catalog(4), &AsymptoticOptions::default(), TOL, 16, 3).unwrap();
    assert_eq!(t.class_id, 4);
    // Werner form w = e^{−2} of a Bell image: margin (1 − 3w)/4.
    let expected = (1.0 - 3.0 * (-2.0_f64).exp()) / 4.0;
    assert!((t.evidence.min_margin - expected).abs() < 1e-6, "{}", t.evidence.min_margin);
    assert!((expected - 0.148).abs() < 1e-3);
    let bell_names: Vec<String> = Bell::ALL.iter().map(|b| format!("image of |{}>", b.name())).collect();
    for name in &bell_names {
        let m = t.evidence.probes.iter().find(|p| &p.probe == name).unwrap().margin;
        assert!((m - expected).abs() < 1e-6);
    }
    assert!((t.evidence.max_margin - 0.25).abs() < 1e-6);
}

#[test]
fn every_catalog_generator_lands_in_its_class() {
    for class_id in 1..=6u8 {
        let (a, t) = classify_generator(&catalog(class_id), &AsymptoticOptions::default(), TOL, 16, 7).unwrap();
        assert_eq!(t.class_id, class_id, "evidence {:?}", t.evidence);
        let expected_cardinality = if class_id <= 3 { Cardinality::One } else { Cardinality::Many };
        assert_eq!(a.cardinality(), expected_cardinality);
        assert!(t.separation() > 0.0);
    }
}

#[test]
fn class6_every_probe_is_entangled() {
    let (_, t) = classify_generator(&catalog_generator(6, &strength(10.0)).unwrap(), &AsymptoticOptions::default(), TOL, 32, 1)
        .unwrap();
    assert_eq!(t.class_id, 6);
    assert!(t.evidence.probes.iter().all(|p| p.margin < -TOL));
    // Largest margin over the image is e^{−c} − 1/2.
    assert!((t.evidence.max_margin - ((-10.0_f64).exp() - 0.5)).abs() < 1e-6);
}

#[test]
fn class4_threshold_follows_werner_margin() {
    // c = 1: (1 − 3e^{−1})/4 < 0, so the catalog refuses it.
    assert!(matches!(catalog_generator(4, &strength(1.0)), Err(AsymptoticsError::BadParams(_))));
    assert!(CLASS4_MIN_STRENGTH > 3.0_f64.ln());
    // Built by hand, c = 1 straddles ∂S: never class 4.
    let (_, t) = classify_generator(&quenched_depolarizing_by_hand(1.0 / 16.0), &AsymptoticOptions::default(), TOL, 16, 0)
        .unwrap();
    assert_eq!(t.class_id, 5);
    assert!(t.evidence.min_margin < -TOL && t.evidence.max_margin > TOL);
    // c = 0.5, same story.
    let r = classify_generator(&quenched_depolarizing_by_hand(0.5 / 16.0), &AsymptoticOptions::default(), TOL, 16, 0);
    assert!(matches!(r, Ok((_, ref t)) if t.class_id == 5) || matches!(r, Err(AsymptoticsError::Inconclusive { .. })));
}

#[test]
fn catalog_rejects_bad_parameters() {
    assert!(matches!(catalog_generator(0, &CatalogParams::default()), Err(AsymptoticsError::BadParams(_))));
    assert!(matches!(catalog_generator(7, &CatalogParams::default()), Err(AsymptoticsError::BadParams(_))));
    assert!(matches!(catalog_generator(6, &strength(CLASS6_MIN_STRENGTH - 0.1)), Err(AsymptoticsError::BadParams(_))));
    let gamma = CatalogParams { gamma: Some(-1.0), strength: None };
    assert!(matches!(catalog_generator(1, &gamma), Err(AsymptoticsError::BadParams(_))));
    assert!(matches!(catalog_generator(4, &CatalogParams { gamma: Some(1.0), strength: None }), Err(AsymptoticsError::BadParams(_))));
}

#[test]
fn midpoints_of_members_remain_members() {
    for class_id in 1..=6u8 {
        let a = asymptotic_set(&catalog(class_id), &AsymptoticOptions::default()).unwrap();
        let members = a.sample_members(10, 21).unwrap();
        for pair in members.chunks(2) {
            let mid = pair[0].mix(&pair[1], 0.5).unwrap();
            assert!(a.membership_residual(&mid) <= 1e-8, "class {class_id}: {}", a.membership_residual(&mid));
        }
    }
}

#[test]
fn members_are_forward_invariant() {
    let opts = SolverOptions::default();
    for class_id in 1..=6u8 {
        let g = catalog(class_id);
        let a = asymptotic_set(&g, &AsymptoticOptions::default()).unwrap();
        let t0 = a.diagnostics().horizon.unwrap_or(0.0);
        let bound = a.diagnostics().convergence_residual.map_or(1e-6, |r| r.max(1e-9) * 16.0);
        for sigma in a.sample_members(5, 4).unwrap() {
            let traj = dynamics::propagate(&g, &sigma, &[t0, t0 + 10.0], &opts).unwrap();
            let moved = traj.last().unwrap().1.trace_distance(&sigma).unwrap();
            assert!(moved <= bound, "class {class_id}: moved {moved:e}");
        }
    }
}

#[test]
fn random_states_are_attracted() {
    let opts = SolverOptions::default();
    for class_id in 1..=6u8 {
        let g = catalog(class_id);
        let a = asymptotic_set(&g, &AsymptoticOptions::default()).unwrap();
        for rho in random_states(20, 100 + class_id as u64) {
            let end = dynamics::propagate(&g, &rho, &[0.0, 50.0], &opts).unwrap().last().unwrap().1.clone();
            let distance = match a.representation() {
                Representation::ImageOfD { .. } => end.trace_distance(&a.limit_of(&rho).unwrap()).unwrap(),
                _ => a.membership_residual(&end),
            };
            assert!(distance < 1e-4, "class {class_id}: {distance:e}");
        }
    }
}

#[test]
fn classification_rejects_unsupported_dimensions() {
    let g = Generator::constant((2, 3), CMatrix::zeros(6, 6), vec![]).unwrap();
    let a = stationary_set_autonomous(&g, DEFAULT_SPECTRAL_TOL).unwrap();
    assert_eq!(classify_theorem_class(&a, TOL, 4, 0).unwrap_err(), AsymptoticsError::UnsupportedDimension(2, 3));
}
