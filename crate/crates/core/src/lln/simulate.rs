use rayon::prelude::*;
use serde::Serialize;

use crate::engine::{AdversaryStrategy, PathSimulator, SequenceModel};
use crate::error::{Error, Result};

/// Running statistics of one simulated path, recorded at checkpoints.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathStats {
    pub seed: u64,
    pub path: u64,
    pub strategy: String,
    pub checkpoints: Vec<usize>,
    /// `S_n / n`.
    pub running_means: Vec<f64>,
    /// `max_{k <= n} |S_k| / k`.
    pub running_sup: Vec<f64>,
    /// `max_{k <= n} |S_k - k center|`.
    pub running_max_dev: Vec<f64>,
}

/// `round(start 10^(i / per_decade))` up to `n`, deduplicated, with `n` last.
pub fn geometric_checkpoints(start: usize, n: usize, per_decade: usize) -> Vec<usize> {
    let mut out: Vec<usize> = Vec::new();
    if start == 0 || start > n || per_decade == 0 {
        return vec![n];
    }
    for i in 0.. {
        let c = (start as f64 * 10f64.powf(i as f64 / per_decade as f64)).round() as usize;
        if c >= n {
            break;
        }
        if out.last() != Some(&c) {
            out.push(c);
        }
    }
    out.push(n);
    out
}

fn validate_checkpoints(checkpoints: &[usize], n: usize) -> Result<()> {
    if checkpoints.is_empty() || checkpoints[0] == 0 || checkpoints.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("checkpoints must be positive and strictly increasing".into()));
    }
    if *checkpoints.last().unwrap() > n {
        return Err(Error::InvalidParameter(format!("checkpoint {} exceeds n = {n}", checkpoints.last().unwrap())));
    }
    Ok(())
}

fn one_path(
    model: &SequenceModel,
    strategy: &AdversaryStrategy,
    checkpoints: &[usize],
    center: f64,
    seed: u64,
    path: u64,
) -> Result<PathStats> {
    let mut sim = PathSimulator::new(model, strategy, seed, path);
    let len = checkpoints.len();
    let (mut running_means, mut running_sup, mut running_max_dev) =
        (Vec::with_capacity(len), Vec::with_capacity(len), Vec::with_capacity(len));
    let (mut s, mut sup, mut dev) = (0.0f64, 0.0f64, 0.0f64);
    let mut next = 0;
    for k in 1..=*checkpoints.last().unwrap() {
        s += sim.next_observable()?;
        sup = sup.max(s.abs() / k as f64);
        dev = dev.max((s - k as f64 * center).abs());
        if checkpoints[next] == k {
            running_means.push(s / k as f64);
            running_sup.push(sup);
            running_max_dev.push(dev);
            next += 1;
        }
    }
    Ok(PathStats {
        seed,
        path,
        strategy: strategy.label(),
        checkpoints: checkpoints.to_vec(),
        running_means,
        running_sup,
        running_max_dev,
    })
}

/// Simulates `n_paths` independent paths of the measure `strategy` induces.
/// Path `i` reads only the streams of `(seed, i)`, so results do not depend
/// on scheduling.
pub fn simulate_paths(
    model: &SequenceModel,
    strategy: &AdversaryStrategy,
    n: usize,
    n_paths: usize,
    checkpoints: &[usize],
    seed: u64,
    center: f64,
) -> Result<Vec<PathStats>> {
    strategy.validate(model.driver().len())?;
    validate_checkpoints(checkpoints, n)?;
    (0..n_paths as u64).into_par_iter().map(|p| one_path(model, strategy, checkpoints, center, seed, p)).collect()
}
