//! Built-in models used by the CLI and the test suites.

use crate::engine::{SequenceModel, WindowFn};
use crate::error::{Error, Result};
use crate::measures::{AmbiguitySet, SamplableDistribution};

/// `(name, description)` of every built-in fixture.
pub const FIXTURES: &[(&str, &str)] = &[
    ("moving-average", "X_i = (e_i + e_{i+1}) / 2 over drivers {Bernoulli(0.3), Bernoulli(0.7)}"),
    ("heavy-tail", "i.i.d. drivers {Bernoulli(0.5), Pareto(alpha = 1, scale = 1)}"),
    ("classical-singleton", "i.i.d. Bernoulli(0.5), a single law"),
    ("pareto2-control", "i.i.d. Pareto(alpha = 2, scale = 1), finite mean"),
];

pub fn moving_average() -> SequenceModel {
    SequenceModel::moving_window(1, AmbiguitySet::bernoullis(&[0.3, 0.7]).expect("valid laws"), WindowFn::Mean)
}

pub fn heavy_tail() -> SequenceModel {
    let laws = vec![
        SamplableDistribution::bernoulli(0.5).expect("valid law"),
        SamplableDistribution::pareto(1.0, 1.0).expect("valid law"),
    ];
    SequenceModel::iid(AmbiguitySet::new(laws).expect("nonempty"))
}

pub fn classical_singleton() -> SequenceModel {
    SequenceModel::iid(AmbiguitySet::bernoullis(&[0.5]).expect("valid law"))
}

pub fn pareto2_control() -> SequenceModel {
    let law = SamplableDistribution::pareto(2.0, 1.0).expect("valid law");
    SequenceModel::iid(AmbiguitySet::new(vec![law]).expect("nonempty"))
}

pub fn by_name(name: &str) -> Result<SequenceModel> {
    match name {
        "moving-average" => Ok(moving_average()),
        "heavy-tail" => Ok(heavy_tail()),
        "classical-singleton" => Ok(classical_singleton()),
        "pareto2-control" => Ok(pareto2_control()),
        other => Err(Error::InvalidParameter(format!("unknown fixture {other:?}"))),
    }
}

/// Driver sets on supports `{1}`, `{0, 1}` and `{-1, 0, 2}` with one to three
/// laws each.
pub fn small_driver_sets() -> Vec<(String, AmbiguitySet)> {
    let pools: [(Vec<f64>, [Vec<f64>; 3]); 3] = [
        (vec![1.0], [vec![1.0], vec![1.0], vec![1.0]]),
        (vec![0.0, 1.0], [vec![0.3, 0.7], vec![0.7, 0.3], vec![0.5, 0.5]]),
        (vec![-1.0, 0.0, 2.0], [vec![0.2, 0.5, 0.3], vec![0.6, 0.1, 0.3], vec![0.1, 0.3, 0.6]]),
    ];
    let mut out = Vec::new();
    for (support, probs) in pools {
        for k in 1..=3 {
            let laws = probs[..k]
                .iter()
                .map(|p| SamplableDistribution::finite(support.clone(), p.clone()).expect("valid law"))
                .collect();
            out.push((format!("support{support:?} laws={k}"), AmbiguitySet::new(laws).expect("nonempty")));
        }
    }
    out
}

/// Every small driver set under i.i.d. drivers and under mean and max windows
/// with `m = 1, 2`: 45 models.
pub fn exhaustive_small_family() -> Vec<(String, SequenceModel)> {
    let mut out = Vec::new();
    for (name, set) in small_driver_sets() {
        out.push((format!("{name} iid"), SequenceModel::iid(set.clone())));
        for m in 1..=2 {
            for (wname, w) in [("mean", WindowFn::Mean), ("max", WindowFn::Max)] {
                out.push((format!("{name} m={m} {wname}"), SequenceModel::moving_window(m, set.clone(), w)));
            }
        }
    }
    out
}

/// Deterministic `{0, 1}` sequence that is 1 on even index octaves
/// `[2^k, 2^(k+1))`, so its running means oscillate forever.
pub fn alternating_octaves(n: usize) -> Vec<f64> {
    (1..=n).map(|i| if i.ilog2() % 2 == 0 { 1.0 } else { 0.0 }).collect()
}
