//! Property tests for the structural invariants of every layer.

mod common;

use proptest::prelude::*;

use slln_core::capacity::{
    choquet_integral_finite, lower_capacity, upper_capacity, EventPredicate,
};
use slln_core::engine::{
    lower_expectation, oracle_upper_expectation_auto, strategy_measure_expectation, upper_expectation,
    AdversaryStrategy, Functional, SequenceModel, WindowFn,
};
use slln_core::lln::{lower_capacity_maximal_check, mean_bounds_sequence, simulate_paths};
use slln_core::measures::{AmbiguitySet, FiniteDistribution, SamplableDistribution};
use slln_core::sequences::{blocking_scheme, build_weights_M, geometric_subsequence, weight_sequence_check};
use slln_core::Error;

fn probs(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1.0, len).prop_map(|w| {
        let w: Vec<f64> = w.into_iter().map(|x| x + 0.05).collect();
        let t: f64 = w.iter().sum();
        w.into_iter().map(|x| x / t).collect()
    })
}

/// Support of size 1 to 3 with 1 to 3 laws on it.
fn small_set() -> impl Strategy<Value = AmbiguitySet> {
    (1usize..=3, 1usize..=3)
        .prop_flat_map(|(s, k)| (prop::collection::btree_set(-3i32..=3, s), prop::collection::vec(probs(s), k)))
        .prop_map(|(support, laws)| {
            let support: Vec<f64> = support.into_iter().map(f64::from).collect();
            AmbiguitySet::new(laws.into_iter().map(|p| SamplableDistribution::finite(support.clone(), p).unwrap()).collect())
                .unwrap()
        })
}

fn small_model() -> impl Strategy<Value = SequenceModel> {
    (small_set(), 0usize..=2, any::<bool>()).prop_map(|(set, m, max)| match (m, max) {
        (0, _) => SequenceModel::iid(set),
        (m, false) => SequenceModel::moving_window(m, set, WindowFn::Mean),
        (m, true) => SequenceModel::moving_window(m, set, WindowFn::Max),
    })
}

fn model_and_horizon() -> impl Strategy<Value = (SequenceModel, usize)> {
    small_model().prop_flat_map(|model| {
        let max_n = 5 - model.m();
        (Just(model), 1..=max_n)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn finite_distributions_are_canonical(values in prop::collection::vec(-5i32..5, 1..8), w in prop::collection::vec(0.01f64..1.0, 8)) {
        let n = values.len();
        let t: f64 = w[..n].iter().sum();
        let p: Vec<f64> = w[..n].iter().map(|x| x / t).collect();
        let d = FiniteDistribution::new(values.iter().map(|v| f64::from(*v)).collect(), p).unwrap();
        prop_assert!((d.probs().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        prop_assert!(d.support().windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn exact_capable_iff_shared_finite_support(set in small_set(), pareto in any::<bool>()) {
        prop_assert!(set.exact_capable());
        if pareto {
            let mut laws = set.laws().to_vec();
            laws.push(SamplableDistribution::pareto(1.5, 1.0).unwrap());
            prop_assert!(!AmbiguitySet::new(laws).unwrap().exact_capable());
        }
        let shifted = SamplableDistribution::finite(vec![10.0], vec![1.0]).unwrap();
        let mut laws = set.laws().to_vec();
        laws.push(shifted);
        prop_assert!(!AmbiguitySet::new(laws).unwrap().exact_capable());
    }

    #[test]
    fn dp_matches_oracle((model, n) in model_and_horizon(), shape in 0usize..5) {
        let (_, phi) = common::payoff_shapes(n).swap_remove(shape);
        let dp = upper_expectation(&model, &phi).unwrap();
        let oracle = oracle_upper_expectation_auto(&model, &phi).unwrap();
        prop_assert!((dp - oracle.value).abs() <= 1e-10, "dp {} oracle {}", dp, oracle.value);
    }

    #[test]
    fn conjugacy_is_exact((model, n) in model_and_horizon(), shape in 0usize..5) {
        let (_, phi) = common::payoff_shapes(n).swap_remove(shape);
        prop_assert_eq!(lower_expectation(&model, &phi).unwrap(), -upper_expectation(&model, &phi.neg()).unwrap());
    }

    #[test]
    fn every_strategy_is_sandwiched((model, n) in model_and_horizon(), shape in 0usize..5, pick in 0usize..3, seed in any::<u64>()) {
        let (_, phi) = common::payoff_shapes(n).swap_remove(shape);
        let k = model.driver().len();
        let strategy = match pick {
            0 => AdversaryStrategy::Constant((seed % k as u64) as usize),
            1 => AdversaryStrategy::EpochSchedule(vec![(1 + (seed % 2) as usize, 0), (1, k - 1)]),
            _ => {
                let support = model.driver().common_support().unwrap().to_vec();
                let entries = support.iter().enumerate().map(|(i, v)| (vec![*v], (i + seed as usize) % k)).collect();
                AdversaryStrategy::Table { entries, default: k - 1 }
            }
        };
        let v = strategy_measure_expectation(&model, &strategy, &phi).unwrap();
        prop_assert!(lower_expectation(&model, &phi).unwrap() - 1e-10 <= v);
        prop_assert!(v <= upper_expectation(&model, &phi).unwrap() + 1e-10);
    }

    #[test]
    fn capacities_are_monotone_subadditive_and_dual(set in small_set(), mask_a in any::<u16>(), mask_b in any::<u16>()) {
        let model = SequenceModel::iid(set);
        let support = model.driver().common_support().unwrap().to_vec();
        let s = support.len();
        // Events on two coordinates, as sets of outcome codes.
        let code = move |x: &[f64], sup: &[f64]| {
            let i = sup.iter().position(|v| *v == x[0]).unwrap();
            let j = sup.iter().position(|v| *v == x[1]).unwrap();
            i * s + j
        };
        let event = |mask: u16| {
            let sup = support.clone();
            EventPredicate::new(2, move |x| mask >> code(x, &sup) & 1 == 1)
        };
        let (a, b, both) = (event(mask_a), event(mask_b), event(mask_a | mask_b));
        let va = upper_capacity(&model, &a).unwrap();
        let vb = upper_capacity(&model, &b).unwrap();
        let vab = upper_capacity(&model, &both).unwrap();
        prop_assert!(va <= vab + 1e-12 && vb <= vab + 1e-12);
        prop_assert!(vab <= va + vb + 1e-12);
        prop_assert_eq!(lower_capacity(&model, &a).unwrap(), 1.0 - upper_capacity(&model, &a.complement()).unwrap());
        prop_assert_eq!(upper_capacity(&model, &EventPredicate::never(2)).unwrap(), 0.0);
        prop_assert_eq!(upper_capacity(&model, &EventPredicate::always(2)).unwrap(), 1.0);
    }

    #[test]
    fn choquet_dominates_extended_mean((model, n) in model_and_horizon()) {
        let n = n.min(3);
        let x = Functional::sum(n);
        let c = choquet_integral_finite(&model, &x.map(f64::abs)).unwrap();
        let abs = upper_expectation(&model, &x.map(f64::abs)).unwrap();
        let plain = upper_expectation(&model, &x).unwrap();
        prop_assert!(c >= abs - 1e-10 && abs >= plain.abs() - 1e-10);
    }

    #[test]
    fn lower_capacity_maximal_inequality_holds(model in small_model(), n in 1usize..=3, t in prop::collection::vec(0.0f64..=1.0, 3), x in 0.25f64..3.0) {
        let pair = slln_core::expectation_pair(&model, &Functional::coordinate(1, 0)).unwrap();
        let mus: Vec<f64> = t[..n].iter().map(|t| pair.lower + t * (pair.upper - pair.lower)).collect();
        let r = lower_capacity_maximal_check(&model, n, &mus, x).unwrap();
        prop_assert!(r.pass, "{:?}", r);
    }

    #[test]
    fn mean_bounds_stay_in_bracket(model in small_model(), n in 1usize..60) {
        let seq = mean_bounds_sequence(&model, n).unwrap();
        for (u, l) in seq.upper_means.iter().zip(&seq.lower_means) {
            prop_assert!(seq.bracket.0 - 1e-10 <= *l && l <= &(u + 1e-10) && *u <= seq.bracket.1 + 1e-10);
        }
    }

    #[test]
    fn weight_partial_sums_are_nondecreasing(s in prop::collection::vec(0.0f64..4.0, 1..200), start in 1.0f64..3.0) {
        let a: Vec<f64> = (0..s.len()).map(|i| start + i as f64).collect();
        let r = weight_sequence_check(&s, &a).unwrap();
        prop_assert!(r.partial_sums.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn weights_satisfy_the_telescoping_bound(s in prop::collection::vec(0.0f64..0.01, 1..100)) {
        let m = build_weights_M(&s).unwrap();
        let total: f64 = s.iter().sum();
        prop_assert!(m.windows(2).all(|w| w[0] <= w[1]) && m.iter().all(|v| *v >= 1.0));
        if total <= 1.0 {
            let weighted: f64 = m.iter().zip(&s).map(|(a, b)| a * b).sum();
            prop_assert!(weighted <= 2.0 * total.sqrt() + 1e-12);
        }
    }

    #[test]
    fn blocking_invariants_hold(m in 0usize..=3, growth in 0.0f64..4.0, n in 4usize..1000) {
        let weights: Vec<f64> = (1..=n).map(|i| (i as f64).powf(growth)).collect();
        match blocking_scheme(m, &weights, n) {
            Ok(scheme) => {
                prop_assert!(scheme.invariant_violations().is_empty(), "{:?}", scheme.invariant_violations());
                prop_assert!(*scheme.a.last().unwrap() >= n);
            }
            Err(Error::HorizonTooSmall(_)) => prop_assert!(n < m + 1),
            Err(other) => prop_assert!(false, "{other}"),
        }
    }

    #[test]
    fn wittmann_bounds_hold_when_certified(steps in prop::collection::vec(0.0f64..3.0, 2..300), lambda in 1.1f64..5.0) {
        let mut a = vec![1.0];
        for s in steps {
            a.push(a.last().unwrap() + s);
        }
        match geometric_subsequence(&a, lambda) {
            Ok(nk) => {
                for w in nk.windows(2) {
                    prop_assert!(lambda * a[w[0] - 1] <= a[w[1] - 1]);
                    prop_assert!(a[w[1] - 1] <= lambda.powi(3) * a[w[0]]);
                }
            }
            Err(Error::HorizonExhausted { .. }) | Err(Error::BoundViolated { .. }) => {}
            Err(other) => prop_assert!(false, "{other}"),
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn simulation_is_reproducible_and_bounded(model in small_model(), seed in any::<u64>(), law in 0usize..3) {
        let k = model.driver().len();
        let strategy = AdversaryStrategy::EpochSchedule(vec![(50, law % k), (30, k - 1)]);
        let cps = [10, 100, 1000, 2000];
        let a = simulate_paths(&model, &strategy, 2000, 3, &cps, seed, 0.0).unwrap();
        let b = simulate_paths(&model, &strategy, 2000, 3, &cps, seed, 0.0).unwrap();
        prop_assert_eq!(&a, &b);
        let (lo, hi) = model.driver().common_support().map(|s| (s[0], s[s.len() - 1])).unwrap();
        for p in &a {
            prop_assert!(p.running_means.iter().all(|m| *m >= lo - 1e-12 && *m <= hi + 1e-12));
        }
    }
}
