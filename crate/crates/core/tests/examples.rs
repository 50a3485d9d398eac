//! Worked examples and seeded statistical checks across modules.

use approx::assert_abs_diff_eq;
use slln_core::engine::{
    expectation_pair, upper_expectation, AdversaryStrategy, Expr, Functional, SequenceModel, WindowFn,
};
use slln_core::fixtures;
use slln_core::lln::{
    cluster_set_experiment, divergence_experiment, estimate_mu_limits, geometric_checkpoints, mean_bounds_sequence,
    simulate_paths, theorem1_experiment, ClusterConfig, DivergenceConfig, MeanBoundsSequence, Theorem1Config,
    WeightKind,
};
use slln_core::measures::{path_stream, pareto_from_uniform, AmbiguitySet, FiniteDistribution, SamplableDistribution};
use slln_core::sequences::{blocking_report, block_sum_functionals, blocking_scheme, make_moving_window_model, BlockKind};
use slln_core::Error;

#[test]
fn constructor_examples() {
    let d = FiniteDistribution::new(vec![0.0, 0.0, 1.0], vec![0.2, 0.1, 0.7]).unwrap();
    assert_eq!(d.support(), &[0.0, 1.0]);
    assert_abs_diff_eq!(d.probs()[0], 0.3, epsilon = 1e-15);
    let three = FiniteDistribution::new(vec![0.0, 1.0, 2.0], vec![0.5, 0.3, 0.2]).unwrap();
    assert_abs_diff_eq!(three.mean(), 0.7, epsilon = 1e-15);
    assert!(matches!(FiniteDistribution::new(vec![0.0], vec![-1.0]), Err(Error::NegativeProb(_))));
    assert!(matches!(FiniteDistribution::new(vec![0.0, 1.0], vec![0.5, 0.6]), Err(Error::NotNormalizable(_))));
    assert_eq!(pareto_from_uniform(1.0, 1.0, 0.5), 2.0);
}

#[test]
fn finite_sample_mean_within_four_standard_errors() {
    let law = SamplableDistribution::finite(vec![-1.0, 0.0, 2.0], vec![0.2, 0.5, 0.3]).unwrap();
    let d = law.as_finite().unwrap();
    let (mean, var) = (d.mean(), d.expectation(|x| x * x) - d.mean().powi(2));
    let mut rng = path_stream(2024, 0);
    let n = 1_000_000;
    let total: f64 = (0..n).map(|_| law.sample(&mut rng)).sum();
    let se = (var / n as f64).sqrt();
    assert!((total / n as f64 - mean).abs() <= 4.0 * se);
}

/// `max_{k <= n} |S_k| / k` is often set by the first few draws, so the
/// literal statistic grows between 10^3 and 10^5 on most paths but not all.
#[test]
fn pareto_one_running_max_keeps_growing() {
    let law = SamplableDistribution::pareto(1.0, 1.0).unwrap();
    let growing = (0..100u64)
        .filter(|&path| {
            let mut rng = path_stream(11, path);
            let (mut s, mut best, mut at_1e3) = (0.0, 0.0f64, 0.0);
            for k in 1..=100_000usize {
                s += law.sample(&mut rng).abs();
                best = best.max(s / k as f64);
                if k == 1000 {
                    at_1e3 = best;
                }
            }
            best > at_1e3
        })
        .count();
    println!("{growing} of 100 Pareto(1) paths grow");
    assert!(growing >= 55, "{growing} of 100 paths grow");
}

#[test]
fn moving_window_examples() {
    let bern = AmbiguitySet::bernoullis(&[0.3, 0.7]).unwrap();
    let avg = make_moving_window_model(1, bern, WindowFn::Mean);
    let p = expectation_pair(&avg, &Functional::coordinate(1, 0)).unwrap();
    assert_abs_diff_eq!(p.upper, 0.7, epsilon = 1e-15);
    assert_abs_diff_eq!(p.lower, 0.3, epsilon = 1e-15);
    let max3 = make_moving_window_model(2, AmbiguitySet::bernoullis(&[0.5]).unwrap(), WindowFn::Max);
    assert_abs_diff_eq!(upper_expectation(&max3, &Functional::coordinate(1, 0)).unwrap(), 0.875, epsilon = 1e-15);
    let s3 = expectation_pair(&fixtures::moving_average(), &Functional::sum(3)).unwrap();
    assert_abs_diff_eq!(s3.upper, 2.1, epsilon = 1e-12);
    assert_abs_diff_eq!(s3.lower, 0.9, epsilon = 1e-12);
}

#[test]
fn sign_flipped_sum_has_conjugate_mean() {
    let model = SequenceModel::iid(AmbiguitySet::bernoullis(&[0.3, 0.7]).unwrap());
    for n in [1usize, 5, 40] {
        let v = upper_expectation(&model, &Functional::sum(n).neg()).unwrap();
        assert_abs_diff_eq!(v / n as f64, -0.3, epsilon = 1e-12);
    }
}

#[test]
fn singleton_mean_bounds_are_flat() {
    let seq = mean_bounds_sequence(&fixtures::classical_singleton(), 32).unwrap();
    assert!(seq.upper_means.iter().chain(&seq.lower_means).all(|v| (v - 0.5).abs() < 1e-12));
    let lim = estimate_mu_limits(&seq, 1e-10).unwrap();
    assert_abs_diff_eq!(lim.mu_bar, 0.5, epsilon = 1e-12);
    assert!(lim.converged);
    let octaves = fixtures::alternating_octaves(4096);
    let mut s = 0.0;
    let means: Vec<f64> = octaves.iter().enumerate().map(|(i, x)| { s += x; s / (i + 1) as f64 }).collect();
    let toy = MeanBoundsSequence::from_values(means.clone(), means, (0.0, 1.0)).unwrap();
    assert!(!estimate_mu_limits(&toy, 1e-6).unwrap().converged);
}

#[test]
fn z_blocks_are_independent_across_gaps() {
    let model = fixtures::moving_average();
    let scheme = blocking_scheme(1, &[1.0; 8], 8).unwrap();
    assert_eq!(scheme.l[..2], [2, 2]);
    let z2 = block_sum_functionals(&scheme, BlockKind::Z, 2).unwrap();
    assert_eq!(z2.eval(&[1.0, 1.0, 0.5, 1.0]), 0.5);
    // Z_1 = Y_1 and Z_2 = Y_3 share no driver when m = 1.
    let report = slln_core::engine::check_block_independence(
        &model,
        1..=1,
        3..=3,
        &[std::sync::Arc::new(|x: &[f64], y: &[f64]| (x[0] - y[0]).powi(2) - x[0] * y[0])],
    )
    .unwrap();
    assert!(report.passed(), "{:?}", report.violations);
    let report = blocking_report(&model, 200, 20).unwrap();
    assert!(report.passed());
}

#[test]
fn constant_high_law_runs_inside_clt_band() {
    let model = SequenceModel::iid(AmbiguitySet::bernoullis(&[0.3, 0.7]).unwrap());
    let n = 100_000;
    let paths = simulate_paths(&model, &AdversaryStrategy::Constant(1), n, 100, &[n], 5, 0.7).unwrap();
    let inside = paths.iter().filter(|p| (p.running_means[0] - 0.7).abs() <= 0.01).count();
    assert!(inside >= 95, "{inside} of 100 paths in band");
}

#[test]
fn epoch_schedule_oscillates() {
    let model = SequenceModel::iid(AmbiguitySet::bernoullis(&[0.3, 0.7]).unwrap());
    let schedule = AdversaryStrategy::EpochSchedule(vec![(10, 0), (100, 1), (1000, 0), (10_000, 1), (100_000, 0)]);
    let cps = geometric_checkpoints(10, 111_110, 20);
    let path = simulate_paths(&model, &schedule, 111_110, 1, &cps, 9, 0.5).unwrap().remove(0);
    let tail = &path.running_means[path.running_means.len() / 2..];
    let hi = tail.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = tail.iter().copied().fold(f64::INFINITY, f64::min);
    assert!(hi > lo + 0.1, "limsup estimate {hi}, liminf estimate {lo}");
}

#[test]
fn bounded_final_means_stay_near_bracket() {
    let model = fixtures::moving_average();
    let n = 100_000;
    for strategy in [
        AdversaryStrategy::Constant(0),
        AdversaryStrategy::EpochSchedule(vec![(777, 0), (333, 1)]),
        AdversaryStrategy::Table { entries: vec![(vec![1.0], 0), (vec![0.0], 1)], default: 0 },
    ] {
        for p in simulate_paths(&model, &strategy, n, 4, &[1000, n], 3, 0.5).unwrap() {
            let last = *p.running_means.last().unwrap();
            assert!((0.3 - 0.05..=0.7 + 0.05).contains(&last), "{} ended at {last}", p.strategy);
        }
    }
}

#[test]
fn cluster_guards_and_degenerate_targets() {
    let model = fixtures::moving_average();
    assert!(matches!(cluster_set_experiment(&model, &ClusterConfig::new(0.6, 0.4, 1000, 1)), Err(Error::TargetOrder { .. })));
    assert!(matches!(
        cluster_set_experiment(&model, &ClusterConfig::new(0.2, 0.7, 1000, 1)),
        Err(Error::TargetOutOfBracket { .. })
    ));
    let r = cluster_set_experiment(&model, &ClusterConfig::new(0.3, 0.3, 100_000, 3)).unwrap();
    assert!((r.final_mean - 0.3).abs() <= 0.02, "{}", r.final_mean);
    let single = cluster_set_experiment(&fixtures::classical_singleton(), &ClusterConfig::new(0.5, 0.5, 100_000, 3)).unwrap();
    assert!((single.final_mean - 0.5).abs() <= 0.02 && single.pass);
}

#[test]
fn divergence_needs_a_heavy_tail() {
    let bounded = SequenceModel::iid(AmbiguitySet::bernoullis(&[0.3, 0.7]).unwrap());
    assert_eq!(divergence_experiment(&bounded, &DivergenceConfig::new(10_000, 4, 1)).unwrap_err(), Error::NoHeavyTailLaw);
}

fn two_pairs() -> Vec<AmbiguitySet> {
    vec![AmbiguitySet::bernoullis(&[0.3, 0.7]).unwrap(), AmbiguitySet::bernoullis(&[0.1, 0.6]).unwrap()]
}

#[test]
fn independent_law_with_linear_weights_passes() {
    let r = theorem1_experiment(&two_pairs(), &Theorem1Config::new(WeightKind::Linear, 200_000, 42)).unwrap();
    assert!(r.pass, "{:?}", r.outcomes);
    assert!(r.outcomes.iter().all(|o| o.final_upper <= 0.05 && o.final_lower >= -0.05));
}

#[test]
fn independent_law_refuses_failing_weight_conditions() {
    for kind in [WeightKind::Sqrt, WeightKind::SqrtNLogN] {
        let r = theorem1_experiment(&two_pairs(), &Theorem1Config::new(kind, 100_000, 1));
        assert!(matches!(r, Err(Error::WeightConditionFails(_))), "{r:?}");
    }
}

#[test]
fn config_expressions_build_functionals() {
    let e: Expr = serde_json::from_str(r#"{"op":"power","k":2,"of":{"op":"affine","a":1,"b":-1}}"#).unwrap();
    let model = SequenceModel::iid(AmbiguitySet::bernoullis(&[0.3, 0.7]).unwrap());
    let v = upper_expectation(&model, &e.build(2).unwrap()).unwrap();
    let direct = upper_expectation(&model, &Functional::new(2, |x| (x[0] + x[1] - 1.0).powi(2))).unwrap();
    assert_abs_diff_eq!(v, direct, epsilon = 1e-12);
}
