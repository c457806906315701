use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use vtqw_core::linalg::{basis_vector, real, CVector};
use vtqw_core::phase_estimation::{
    audit_decision, decide_with_spectrum, random_planted_instance, verify_negative_witness, verify_positive_witness,
    DecisionConfig, Mode, OrthogonalSide, PhaseEstimationInstance, WitnessCertificate,
};

fn rotated(phi: f64) -> PhaseEstimationInstance {
    let a = CVector::from_vec(vec![real(phi.cos()), real(phi.sin())]);
    PhaseEstimationInstance::new(basis_vector(2, 1), &[a], &[basis_vector(2, 0)], 1e-12).unwrap()
}

#[test]
fn rotation_instance_has_phases_two_phi() {
    let phi = std::f64::consts::PI / 8.0;
    let inst = rotated(phi);
    assert_eq!(inst.orthogonal_side(), OrthogonalSide::B);
    let spectrum = inst.spectrum();
    for p in &spectrum.phases {
        assert!((p - 2.0 * phi).abs() < 1e-12, "phase {p}");
    }
    // Oracle: the 2x2 rotation by 2φ has trace 2cos(2φ).
    let u = inst.walk_operator();
    assert!(((u[(0, 0)] + u[(1, 1)]).re - 2.0 * (2.0 * phi).cos()).abs() < 1e-12);
    assert!(spectrum.unitarity_residual < 1e-12);
    for mode in [Mode::Spectral, Mode::Circuit] {
        let d = decide_with_spectrum(&spectrum, 1.0, &DecisionConfig { mode, ..Default::default() }).unwrap();
        assert!(!d.positive);
        assert!(d.delta < std::f64::consts::FRAC_PI_4);
        assert_eq!(d.m_delta, 0.0);
    }
    // Once Δ exceeds the phase, the whole state counts.
    let wide = DecisionConfig { kappa: 1.0, ..Default::default() };
    assert!(decide_with_spectrum(&spectrum, 1.0, &wide).unwrap().positive);
}

#[test]
fn witness_error_from_direct_projection() {
    let inst = PhaseEstimationInstance::new(basis_vector(3, 1), &[basis_vector(3, 0)], &[], 1e-12).unwrap();
    let w = CVector::from_vec(vec![real(0.1), real(1.0), real(0.0)]);
    let r = verify_positive_witness(&inst, &w).unwrap();
    assert!((r.delta - 0.01 / 1.01).abs() < 1e-15);
    assert!((r.c_plus - 1.01).abs() < 1e-15);

    let inst =
        PhaseEstimationInstance::new(basis_vector(3, 0), &[basis_vector(3, 0)], &[basis_vector(3, 1)], 1e-12).unwrap();
    let w_a = CVector::from_vec(vec![real(1.0), real(0.0), real(0.1)]);
    let w_b = CVector::from_vec(vec![real(0.0), real(0.0), real(-0.1)]);
    let r = verify_negative_witness(&inst, &w_a, &w_b, 1e-9).unwrap();
    assert!((r.delta_prime - 0.01).abs() < 1e-15);
    assert!((r.c_minus - 1.01).abs() < 1e-15);
}

#[test]
fn planted_instances_are_decided_and_certified() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for k in 0..40 {
        let positive = k % 2 == 0;
        let dim = 6 + k % 7;
        let (inst, cert) = random_planted_instance(dim, positive, &mut rng);
        cert.verify(&inst, 1e-9).unwrap();
        let c_minus = match &cert {
            WitnessCertificate::Negative { c_minus, .. } => *c_minus,
            WitnessCertificate::Positive { .. } => 4.0,
        };
        let spectrum = inst.spectrum();
        for mode in [Mode::Spectral, Mode::Circuit] {
            let config = DecisionConfig { mode, seed: k as u64, ..Default::default() };
            let d = decide_with_spectrum(&spectrum, c_minus, &config).unwrap();
            let audit = audit_decision(&inst, &spectrum, &d, &cert, 50.0, c_minus).unwrap();
            assert!(audit.decision_correct && !audit.margin_violation, "{k} {mode:?} {audit:?} {d:?}");
            assert!(audit.theorem_hypotheses_met);
        }
    }
}
