use std::time::Instant;

use vtqw_core::alg_compose::{
    assemble_composed, decide_composed, set_parameters, Bucket, ComposeConfig, ComposedInstance, CompositionParameters,
    OuterAlgorithm, OuterStep, DEFAULT_ETA,
};
use vtqw_core::linalg::{real, CMatrix, CVector};
use vtqw_core::subroutine::{build_from_classical, ClassicalInput, ClassicalSpec};

fn inner(times: &[usize], g: &[usize]) -> ClassicalSpec {
    ClassicalSpec {
        horizon: None,
        inputs: times.iter().zip(g).map(|(&t, &a)| ClassicalInput::deterministic(t, a)).collect(),
    }
}

fn assembled(outer: &OuterAlgorithm, spec: &ClassicalSpec) -> (ComposedInstance, CompositionParameters) {
    let (sub, ext) = build_from_classical(spec).unwrap();
    let p = set_parameters(outer, &sub, DEFAULT_ETA).unwrap();
    (assemble_composed(outer, &sub, &ext, p.w0, p.w1_out, p.w0_out).unwrap(), p)
}

/// Householder reflection taking `|0, 0⟩` to `√a|1, 0⟩ + √(1−a)|2, 0⟩` on `n = 2`, `|Y| = 1`.
fn prepare(a: f64) -> CMatrix {
    let mut v = CVector::from_element(6, real(0.0));
    v[0] = real(1.0);
    v[2] = real(-a.sqrt());
    v[4] = real(-(1.0 - a).sqrt());
    let scale = real(2.0 / v.norm_squared());
    CMatrix::identity(6, 6) - &v * v.transpose() * scale
}

#[test]
fn outer_runs_follow_hand_computation() {
    let id = OuterAlgorithm::identity_bit();
    assert!((id.run(&[1]).unwrap().output_one - 1.0).abs() < 1e-15);
    assert!(id.run(&[0]).unwrap().output_one.abs() < 1e-15);
    let idle = OuterAlgorithm::new(1, 1, vec![OuterStep::Unitary(CMatrix::identity(4, 4))], vec![false, true]).unwrap();
    assert_eq!(idle.run(&[1]).unwrap().output_one, 0.0);
    assert!(idle.query_weights(&[1]).is_err());
}

#[test]
fn query_weights_average_over_levels() {
    let uniform =
        OuterAlgorithm::new(2, 1, vec![OuterStep::Unitary(prepare(0.5)), OuterStep::Query], vec![false; 4]).unwrap();
    let q = uniform.query_weights(&[0, 1]).unwrap();
    assert!((q.average[1] - 0.5).abs() < 1e-12 && (q.average[2] - 0.5).abs() < 1e-12);

    let single =
        OuterAlgorithm::new(2, 1, vec![OuterStep::Unitary(prepare(0.3)), OuterStep::Query], vec![false; 4]).unwrap();
    let q = single.query_weights(&[1, 1]).unwrap();
    assert!((q.average[1] - 0.3).abs() < 1e-12 && (q.average[2] - 0.7).abs() < 1e-12);
    assert!((q.average.iter().sum::<f64>() - 1.0).abs() < 1e-12);

    let swapped = OuterAlgorithm::new(
        2,
        1,
        vec![
            OuterStep::Unitary(prepare(0.3)),
            OuterStep::Query,
            OuterStep::Unitary(prepare(0.3)),
            OuterStep::Unitary(prepare(0.7)),
            OuterStep::Query,
        ],
        vec![false; 4],
    )
    .unwrap();
    let q = swapped.query_weights(&[0, 0]).unwrap();
    assert!((q.average[1] - 0.5).abs() < 1e-12 && (q.average[2] - 0.5).abs() < 1e-12);
}

#[test]
fn parameters_from_averages() {
    let p = CompositionParameters::from_averages(2, 1, 1.0, 0.0, 0.1, DEFAULT_ETA).unwrap();
    assert!((p.w0 - 1.0 / 7.0).abs() < 1e-15);
    assert!((p.w1_out - 0.9 / 56.0).abs() < 1e-15);
    assert!((p.w0_out - 0.1 / 56.0).abs() < 1e-15);
    assert!((p.c_minus - 196.0).abs() < 1e-12);
    assert!(p.w1_out > p.w0_out && !p.output_floor_applied);

    let exact = CompositionParameters::from_averages(2, 1, 1.0, 0.0, 0.0, DEFAULT_ETA).unwrap();
    assert!(exact.output_floor_applied && exact.w0_out > 0.0);
    assert!(exact.c_plus_bound <= exact.c_plus);

    let noisy = CompositionParameters::from_averages(2, 1, 1.0, 1e-3, 0.0, DEFAULT_ETA).unwrap();
    assert!(!noisy.within_threshold);
    for k in 0..50 {
        let eps = 0.49 * f64::from(k) / 50.0;
        let p = CompositionParameters::from_averages(4, 2, 2.0, 0.0, eps, DEFAULT_ETA).unwrap();
        assert!(p.w1_out > p.w0_out);
    }
    assert!(CompositionParameters::from_averages(2, 1, 1.0, 0.0, 0.5, DEFAULT_ETA).is_err());
}

#[test]
fn minimal_instance_has_the_hand_counted_dimension() {
    let idle = CMatrix::identity(4, 4);
    let outer =
        OuterAlgorithm::new(1, 1, vec![OuterStep::Query, OuterStep::Unitary(idle)], vec![false, false]).unwrap();
    assert_eq!(outer.len(), 2);
    let (inst, _) = assembled(&outer, &inner(&[1], &[1]));
    // Inner copy: 2 registers × 4 slots (a ∈ {0,1}, t ∈ {0,1}) per (b, y), one query level.
    assert_eq!(inst.blocks.inner, 2 * 4 * 2);
    // Junctions: (i, b) ∈ {0,1}² at levels 0, 1, 2; terminals: (i, b); one initial coordinate.
    assert_eq!(inst.blocks.junction, 4 * 3);
    assert_eq!(inst.blocks.terminal, 4);
    assert_eq!(inst.dim(), 16 + 12 + 4 + 1);
    assert!(inst.gram_residual.0 <= 1e-12 && inst.gram_residual.1 <= 1e-12);
}

#[test]
fn overlaps_only_cross_buckets() {
    let (inst, _) = assembled(&OuterAlgorithm::or2(), &inner(&[1, 3], &[0, 1]));
    let pairs = inst.overlap_pairs(1e-12);
    assert!(!pairs.is_empty());
    for ((f, a), (g, b)) in pairs {
        assert_ne!(a, b, "{f:?} overlaps {g:?} inside one bucket");
    }
    assert_eq!(inst.phase.initial_overlaps().0, 0.0);
    assert!(inst.states.iter().any(|s| s.bucket == Bucket::B));
}

#[test]
fn witnesses_on_exact_instances() {
    for (outer, spec) in [
        (OuterAlgorithm::identity_bit(), inner(&[1], &[1])),
        (OuterAlgorithm::identity_bit(), inner(&[3], &[0])),
        (OuterAlgorithm::or2(), inner(&[1, 3], &[0, 1])),
        (OuterAlgorithm::or2(), inner(&[2, 3], &[0, 0])),
        (OuterAlgorithm::and2(), inner(&[3, 1], &[1, 0])),
        (OuterAlgorithm::and2(), inner(&[2, 1], &[1, 1])),
    ] {
        let (inst, p) = assembled(&outer, &spec);
        assert!(inst.gram_residual.0 <= 1e-12 && inst.gram_residual.1 <= 1e-12);
        if inst.expected_output().unwrap() {
            let pos = inst.positive_witness().unwrap();
            assert!((pos.overlap - 1.0 / p.w0.sqrt()).abs() < 1e-9);
            assert!(pos.max_family_overlap <= 1e-10, "{}", pos.max_family_overlap);
            assert!(pos.beta_residual <= 1e-12);
            assert!(pos.report.delta <= 1e-12, "{:?}", pos.report);
            assert!(pos.report.c_plus <= p.c_plus_bound + 1e-9 && p.c_plus_bound <= 18.0);
            assert!(inst.negative_witness().is_err());
        } else {
            let neg = inst.negative_witness().unwrap();
            assert!(neg.report.decomposition_residual <= 1e-10);
            assert!((neg.report.c_minus - neg.closed_form).abs() <= 1e-9 * neg.closed_form);
            assert!(
                neg.report.c_minus <= 4.0 / p.w0 * (p.length as f64 + 2.0 * p.queries as f64 * (p.t_avg + 1.0) + 1.0)
            );
            assert!(neg.error_tilde_a <= 1e-20 && neg.error_tilde_b <= 1e-20);
            assert!(
                neg.report.delta_prime <= p.delta_prime_target + 1e-12,
                "{:?} vs {}",
                neg.report,
                p.delta_prime_target
            );
            assert!(inst.positive_witness().is_err());
        }
    }
}

#[test]
fn witness_errors_follow_the_inner_error() {
    let outer = OuterAlgorithm::or2();
    let spec = ClassicalSpec {
        horizon: None,
        inputs: vec![
            ClassicalInput { halt_law: vec![(1, 0.5), (3, 0.5)], answer: 0, errors: vec![(1, 0.01), (3, 0.02)] },
            ClassicalInput { halt_law: vec![(2, 1.0)], answer: 0, errors: vec![(2, 0.03)] },
        ],
    };
    let (inst, p) = assembled(&outer, &spec);
    let neg = inst.negative_witness().unwrap();
    let bound = 2.0 * p.queries as f64 * p.eps_avg;
    assert!(neg.error_tilde_a <= bound + 1e-12, "{} > {bound}", neg.error_tilde_a);
    assert!(neg.error_tilde_b <= bound + 1e-12, "{} > {bound}", neg.error_tilde_b);
    assert!(neg.error_tilde_a > 0.0);
}

#[test]
fn decisions_on_small_compositions() {
    let config = ComposeConfig::default();
    let start = Instant::now();
    for (g, want) in [([1], true), ([0], false)] {
        let (sub, ext) = build_from_classical(&inner(&[1], &g)).unwrap();
        let d = decide_composed(&OuterAlgorithm::identity_bit(), &sub, &ext, &config).unwrap();
        assert_eq!(d.output, want);
        assert_eq!(d.expected, want);
        assert!(!d.audit.unwrap().margin_violation);
    }
    let (sub, ext) = build_from_classical(&inner(&[1, 3], &[0, 1])).unwrap();
    let d = decide_composed(&OuterAlgorithm::or2(), &sub, &ext, &config).unwrap();
    assert!(d.output && d.decision.margin > 0.0, "{:?}", d.decision);
    assert!(d.cost_estimate > 0.0);
    eprintln!("dimension {} in {:?}", d.dimension, start.elapsed());
}
