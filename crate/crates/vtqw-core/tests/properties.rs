use proptest::prelude::*;
use vtqw_core::network::{Distribution, Network, Target};
use vtqw_core::subroutine::{build_from_classical, AlphaSchedule, AlphaWeights, ClassicalInput, ClassicalSpec};
use vtqw_core::vt_states::build_transition_states;

/// A path `0 – 1 – … – k` plus chords, all with the given weights.
fn network(path: Vec<f64>, chords: Vec<(usize, usize, f64)>) -> Network {
    let n = path.len() + 1;
    let mut edges: Vec<(usize, usize, f64)> = path.iter().enumerate().map(|(k, &w)| (k, k + 1, w)).collect();
    edges.extend(chords.into_iter().map(|(a, b, w)| (a % n, b % n, w)).filter(|(a, b, _)| a != b));
    Network::new(n, &edges).unwrap()
}

fn graphs() -> impl Strategy<Value = Network> {
    (prop::collection::vec(0.1f64..5.0, 1..7), prop::collection::vec((0usize..8, 0usize..8, 0.1f64..5.0), 0..4))
        .prop_map(|(path, chords)| network(path, chords))
}

proptest! {
    #[test]
    fn stationary_distribution_is_reversible(net in graphs()) {
        let pi = net.stationary_distribution().unwrap();
        let p = net.transition_matrix().unwrap();
        let n = net.vertex_count();
        prop_assert!((pi.0.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for u in 0..n {
            prop_assert!((p.row(u).sum() - 1.0).abs() < 1e-12);
            for v in 0..n {
                prop_assert!((pi.get(u) * p[(u, v)] - pi.get(v) * p[(v, u)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn resistance_is_monotone_in_conductance(path in prop::collection::vec(0.1f64..5.0, 2..6), k in 0usize..5, boost in 1.0f64..4.0) {
        let n = path.len() + 1;
        let sigma = Distribution::point(n, 0);
        let target = Target::Set(vec![n - 1]);
        let base = network(path.clone(), vec![]).effective_resistance(&sigma, &target).unwrap();
        // Series resistors on a path.
        let series: f64 = path.iter().map(|w| 1.0 / w).sum();
        prop_assert!((base - series).abs() <= 1e-10 * series);
        let mut stronger = path;
        let k = k % stronger.len();
        stronger[k] *= boost;
        let boosted = network(stronger, vec![]).effective_resistance(&sigma, &target).unwrap();
        prop_assert!(boosted <= base + 1e-12);
    }

    #[test]
    fn transition_buckets_stay_orthogonal(
        laws in prop::collection::vec((1usize..5, 0usize..2, 0.0f64..0.3), 1..4),
        schedule in prop_oneof![Just(AlphaSchedule::Const), Just(AlphaSchedule::Linear), Just(AlphaSchedule::Inverse)],
    ) {
        let inputs = laws
            .into_iter()
            .map(|(t, a, e)| ClassicalInput { halt_law: vec![(t, 1.0)], answer: a, errors: vec![(t, e)] })
            .collect();
        let (sub, ext) = build_from_classical(&ClassicalSpec { horizon: None, inputs }).unwrap();
        let alpha = AlphaWeights::schedule(schedule, sub.horizon());
        let states = build_transition_states(&sub, &ext, &alpha).unwrap();
        prop_assert!(states.bucket_gram_residual(0) <= 1e-10);
        prop_assert!(states.bucket_gram_residual(1) <= 1e-10);
    }
}
