#![allow(dead_code)]

use std::io::Write;

use slln_core::engine::{CrossingSpec, Deviation, Functional, SequenceModel};
use slln_core::fixtures;
use slln_core::measures::AmbiguitySet;

pub fn driver_sets() -> Vec<(String, AmbiguitySet)> {
    fixtures::small_driver_sets()
}

pub struct Instance {
    pub label: String,
    pub model: SequenceModel,
    pub laws: usize,
}

pub fn model_family() -> Vec<Instance> {
    fixtures::exhaustive_small_family()
        .into_iter()
        .map(|(label, model)| Instance { laws: model.driver().len(), label, model })
        .collect()
}

/// Five payoff shapes on `n` observables: linear, a function of the sum, a
/// crossing indicator, a max-deviation payoff and an opaque path payoff.
pub fn payoff_shapes(n: usize) -> Vec<(&'static str, Functional)> {
    let nf = n as f64;
    vec![
        ("sum", Functional::sum(n)),
        ("abs_centered_sum", Functional::of_sum(n, move |s| (s - 0.5 * nf).abs())),
        (
            "crossing",
            Functional::crossing_indicator(CrossingSpec {
                centers: (1..=n).map(|k| 0.5 * k as f64).collect(),
                threshold: 0.5,
                deviation: Deviation::Absolute,
            }),
        ),
        ("max_dev_sq", Functional::max_partial_sum_deviation(n, 0.3).map(|d| d * d)),
        (
            "path",
            Functional::new(n, |x| {
                let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let var: f64 = x.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
                x[0] * x[x.len() - 1] - max + var
            }),
        ),
    ]
}

/// Writes a result line straight to the process stdout, past the test
/// harness's capture.
pub fn announce(line: &str) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{line}");
    let _ = out.flush();
}
