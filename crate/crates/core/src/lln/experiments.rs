use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::simulate::{geometric_checkpoints, simulate_paths};
use crate::capacity::{choquet_finiteness_for_set, FinitenessReport};
use crate::engine::{
    expectation_pair, strategy_measure_expectation, AdversaryStrategy, Functional, LawChoice, PathSimulator,
    SequenceModel,
};
use crate::error::{Error, Result};
use crate::measures::{path_stream, AmbiguitySet, SamplableDistribution};
use crate::report::ExperimentRow;
use crate::sequences::weight_sequence_check;

/// Slack on the target bracket check.
const BRACKET_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterConfig {
    pub a: f64,
    pub b: f64,
    /// Epoch ends satisfy `T_{e+1} = ceil(T_e^growth)`, so log-lengths grow
    /// geometrically by this factor.
    pub epoch_growth: f64,
    pub n: usize,
    pub seed: u64,
    /// End of the first epoch.
    pub first_epoch: usize,
    /// Fraction of each epoch whose running means enter the extremes.
    pub tail_fraction: f64,
    /// Coverage radius around grid points.
    pub resolution: f64,
    pub grid_points: usize,
    /// Running means before `n * burn_in` are ignored for coverage.
    pub burn_in: f64,
    /// Band for the limsup/liminf checks.
    pub epsilon: f64,
    pub min_coverage: f64,
}

impl ClusterConfig {
    pub fn new(a: f64, b: f64, n: usize, seed: u64) -> Self {
        Self {
            a,
            b,
            epoch_growth: 2.0,
            n,
            seed,
            first_epoch: 10,
            tail_fraction: 0.1,
            resolution: 0.02,
            grid_points: 101,
            burn_in: 1e-3,
            epsilon: 0.05,
            min_coverage: 0.9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochSummary {
    pub end: usize,
    pub target: f64,
    pub weight_high: f64,
    pub tail_max: f64,
    pub tail_min: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterReport {
    pub config: ClusterConfig,
    /// `(mu_under, mu_bar)`.
    pub bracket: (f64, f64),
    pub high_law: usize,
    pub low_law: usize,
    pub epochs: Vec<EpochSummary>,
    /// Tail maximum of the most recent `b` epoch.
    pub limsup_estimate: f64,
    /// Tail minimum of the most recent `a` epoch.
    pub liminf_estimate: f64,
    pub coverage: f64,
    pub final_mean: f64,
    pub pass: bool,
}

impl ClusterReport {
    pub fn rows(&self, fixture: &str) -> Vec<ExperimentRow> {
        let c = &self.config;
        let strategy = format!("mixture({}/{})", self.high_law, self.low_law);
        let row = |n: usize, stat: &str, v: f64, pass: bool| ExperimentRow::new("cluster", fixture, &strategy, n as u64, stat, v, pass);
        let mut rows = Vec::new();
        for e in &self.epochs {
            rows.push(row(e.end, "epoch_target", e.target, true));
            rows.push(row(e.end, "epoch_tail_max", e.tail_max, true));
            rows.push(row(e.end, "epoch_tail_min", e.tail_min, true));
        }
        rows.push(row(c.n, "limsup_estimate", self.limsup_estimate, self.limsup_estimate >= c.b - c.epsilon));
        rows.push(row(c.n, "liminf_estimate", self.liminf_estimate, self.liminf_estimate <= c.a + c.epsilon));
        rows.push(row(c.n, "coverage", self.coverage, self.coverage >= c.min_coverage));
        rows.push(row(c.n, "final_mean", self.final_mean, true));
        rows.push(row(c.n, "summary", f64::from(u8::from(self.pass)), self.pass));
        rows
    }
}

/// Mean of `X_1` when the adversary always plays law `j`.
fn constant_law_mean(model: &SequenceModel, j: usize) -> Result<f64> {
    if model.driver().exact_capable() {
        return strategy_measure_expectation(model, &AdversaryStrategy::Constant(j), &Functional::coordinate(1, 0));
    }
    match (model.is_iid(), model.driver().laws()[j].mean()) {
        (true, Some(mu)) => Ok(mu),
        _ => Err(Error::InvalidParameter(format!("law {j} has no computable observable mean"))),
    }
}

fn epoch_ends(first: usize, growth: f64, n: usize) -> Vec<usize> {
    let mut ends = vec![first.min(n)];
    while *ends.last().unwrap() < n {
        let t = *ends.last().unwrap() as f64;
        let next = (t.powf(growth).ceil() as usize).max(ends.last().unwrap() + 1).min(n);
        ends.push(next);
    }
    ends
}

/// Drives the running mean between `a` and `b` by mixing the extreme laws in
/// epochs of growing length, alternating targets and ending on `b`.
pub fn cluster_set_experiment(model: &SequenceModel, config: &ClusterConfig) -> Result<ClusterReport> {
    let ClusterConfig { a, b, n, .. } = *config;
    if a > b {
        return Err(Error::TargetOrder { a, b });
    }
    if !(config.epoch_growth > 1.0) || config.first_epoch < 2 || n < config.first_epoch || config.grid_points == 0 {
        return Err(Error::InvalidParameter("cluster experiment needs growth > 1, first epoch >= 2 and n >= first epoch".into()));
    }
    let means: Vec<f64> = (0..model.driver().len()).map(|j| constant_law_mean(model, j)).collect::<Result<_>>()?;
    let (lower, upper) = if model.driver().exact_capable() {
        let p = expectation_pair(model, &Functional::coordinate(1, 0))?;
        (p.lower, p.upper)
    } else {
        (means.iter().copied().fold(f64::INFINITY, f64::min), means.iter().copied().fold(f64::NEG_INFINITY, f64::max))
    };
    if a < lower - BRACKET_TOL || b > upper + BRACKET_TOL {
        return Err(Error::TargetOutOfBracket { a, b, lower, upper });
    }
    // Lowest index wins ties on both ends.
    let high_law = (0..means.len()).fold(0, |best, j| if means[j] > means[best] { j } else { best });
    let low_law = (0..means.len()).fold(0, |best, j| if means[j] < means[best] { j } else { best });
    let (mu_lo, mu_hi) = (means[low_law], means[high_law]);
    let weight = |target: f64| if mu_hi > mu_lo { ((target - mu_lo) / (mu_hi - mu_lo)).clamp(0.0, 1.0) } else { 1.0 };

    let ends = epoch_ends(config.first_epoch, config.epoch_growth, n);
    let count = ends.len();
    let targets: Vec<f64> = (0..count).map(|e| if (count - 1 - e) % 2 == 0 { b } else { a }).collect();
    let strategy = AdversaryStrategy::Mixture {
        high: high_law,
        low: low_law,
        epochs: ends.iter().zip(&targets).map(|(end, t)| (*end, weight(*t))).collect(),
    };

    let grid: Vec<f64> = if config.grid_points == 1 || a == b {
        vec![a]
    } else {
        (0..config.grid_points).map(|i| a + (b - a) * i as f64 / (config.grid_points - 1) as f64).collect()
    };
    let mut covered = vec![false; grid.len()];
    let step = if grid.len() > 1 { grid[1] - grid[0] } else { 0.0 };
    let burn_in = ((n as f64) * config.burn_in).ceil() as usize;
    let mut mark = |r: f64| {
        if grid.len() == 1 {
            covered[0] |= (r - grid[0]).abs() <= config.resolution;
            return;
        }
        let lo = ((r - config.resolution - a) / step).ceil().max(0.0) as usize;
        let hi = ((r + config.resolution - a) / step).floor();
        if hi < 0.0 {
            return;
        }
        for i in lo..=(hi as usize).min(grid.len() - 1) {
            covered[i] |= (grid[i] - r).abs() <= config.resolution;
        }
    };

    let mut sim = PathSimulator::new(model, &strategy, config.seed, 0);
    let mut epochs: Vec<EpochSummary> = Vec::with_capacity(count);
    let (mut s, mut start) = (0.0, 0usize);
    for (e, &end) in ends.iter().enumerate() {
        let tail_start = end - ((end - start) as f64 * config.tail_fraction).floor() as usize;
        let (mut tail_max, mut tail_min) = (f64::NEG_INFINITY, f64::INFINITY);
        for k in start + 1..=end {
            s += sim.next_observable()?;
            let r = s / k as f64;
            if k >= tail_start {
                tail_max = tail_max.max(r);
                tail_min = tail_min.min(r);
            }
            if k >= burn_in {
                mark(r);
            }
        }
        epochs.push(EpochSummary { end, target: targets[e], weight_high: weight(targets[e]), tail_max, tail_min });
        start = end;
    }
    let last_of = |target: f64| epochs.iter().rev().find(|e| e.target == target);
    let limsup_estimate = last_of(b).map_or(f64::NAN, |e| e.tail_max);
    let liminf_estimate = last_of(a).map_or(f64::NAN, |e| e.tail_min);
    let coverage = covered.iter().filter(|c| **c).count() as f64 / covered.len() as f64;
    let pass = limsup_estimate >= b - config.epsilon
        && liminf_estimate <= a + config.epsilon
        && coverage >= config.min_coverage;
    Ok(ClusterReport {
        config: config.clone(),
        bracket: (lower, upper),
        high_law,
        low_law,
        epochs,
        limsup_estimate,
        liminf_estimate,
        coverage,
        final_mean: s / n as f64,
        pass,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DivergenceConfig {
    pub n: usize,
    pub n_paths: usize,
    pub seed: u64,
    /// First checkpoint; the statistic is compared between it and `n`.
    pub start: usize,
    pub per_decade: usize,
    /// Law the adversary plays. `None` selects the heavy-tailed law and
    /// fails when there is none.
    pub law: Option<usize>,
    pub min_growing_fraction: f64,
}

impl DivergenceConfig {
    pub fn new(n: usize, n_paths: usize, seed: u64) -> Self {
        Self { n, n_paths, seed, start: 1000, per_decade: 10, law: None, min_growing_fraction: 0.9 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DivergenceReport {
    pub config: DivergenceConfig,
    pub law: usize,
    pub checkpoints: Vec<usize>,
    /// Median over paths of `max_{c <= n} |S_c| / c`, the maximum over
    /// checkpoints `c` from `start`.
    pub median_statistic: Vec<f64>,
    pub growing_paths: usize,
    pub growing_fraction: f64,
    /// Median of statistic(n) / statistic(start).
    pub median_growth_ratio: f64,
    pub finiteness: FinitenessReport,
    pub divergent: bool,
}

impl DivergenceReport {
    pub fn rows(&self, fixture: &str) -> Vec<ExperimentRow> {
        let strategy = format!("constant({})", self.law);
        let row = |n: usize, stat: &str, v: f64, pass: bool| ExperimentRow::new("divergence", fixture, &strategy, n as u64, stat, v, pass);
        let mut rows: Vec<ExperimentRow> =
            self.checkpoints.iter().zip(&self.median_statistic).map(|(c, v)| row(*c, "median_running_sup", *v, true)).collect();
        let n = self.config.n;
        let enough = self.growing_fraction >= self.config.min_growing_fraction;
        rows.push(row(n, "growing_fraction", self.growing_fraction, enough));
        rows.push(row(n, "median_growth_ratio", self.median_growth_ratio, true));
        rows.push(row(n, "choquet_diverging", f64::from(u8::from(self.finiteness.diverging)), self.finiteness.diverging));
        rows.push(row(n, "summary", f64::from(u8::from(self.divergent)), self.divergent));
        rows
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Constant play of one law: is `max |S_c| / c` over geometric checkpoints
/// still growing at `n`, and do the Choquet diagnostics say `C_V(|X_1|)` is
/// infinite?
pub fn divergence_experiment(model: &SequenceModel, config: &DivergenceConfig) -> Result<DivergenceReport> {
    let law = match config.law {
        Some(j) => j,
        None => model.driver().heavy_tail_index().ok_or(Error::NoHeavyTailLaw)?,
    };
    if config.n_paths == 0 || config.start == 0 || config.start >= config.n {
        return Err(Error::InvalidParameter("divergence experiment needs paths and 0 < start < n".into()));
    }
    let checkpoints = geometric_checkpoints(config.start, config.n, config.per_decade);
    let paths = simulate_paths(model, &AdversaryStrategy::Constant(law), config.n, config.n_paths, &checkpoints, config.seed, 0.0)?;
    let stats: Vec<Vec<f64>> = paths
        .iter()
        .map(|p| {
            let mut best = 0.0f64;
            p.running_means.iter().map(|m| {
                best = best.max(m.abs());
                best
            }).collect()
        })
        .collect();
    let last = checkpoints.len() - 1;
    let median_statistic = (0..checkpoints.len()).map(|i| median(stats.iter().map(|s| s[i]).collect())).collect();
    let growing_paths = stats.iter().filter(|s| s[last] > s[0]).count();
    let growing_fraction = growing_paths as f64 / config.n_paths as f64;
    let median_growth_ratio = median(stats.iter().map(|s| s[last] / s[0]).collect());
    let played = AmbiguitySet::new(vec![model.driver().laws()[law].clone()])?;
    let finiteness = choquet_finiteness_for_set(&played, 1.0, 1 << 12, (1u64 << 20) as f64)?;
    let divergent = growing_fraction >= config.min_growing_fraction && finiteness.diverging;
    Ok(DivergenceReport {
        config: config.clone(),
        law,
        checkpoints,
        median_statistic,
        growing_paths,
        growing_fraction,
        median_growth_ratio,
        finiteness,
        divergent,
    })
}

/// Normalizing sequences for the independent strong law.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum WeightKind {
    /// `a_n = n`.
    Linear,
    /// `a_n = max(1, sqrt(n ln n))`.
    SqrtNLogN,
    /// `a_n = sqrt(n)`.
    Sqrt,
    Custom(Vec<f64>),
}

impl WeightKind {
    pub fn weights(&self, n: usize) -> Result<Vec<f64>> {
        let f = |i: usize| -> f64 {
            let x = i as f64;
            match self {
                Self::Linear => x,
                Self::SqrtNLogN => (x * x.ln()).sqrt().max(1.0),
                Self::Sqrt => x.sqrt(),
                Self::Custom(_) => unreachable!(),
            }
        };
        match self {
            Self::Custom(v) if v.len() < n => Err(Error::InvalidParameter(format!("{} weights for horizon {n}", v.len()))),
            Self::Custom(v) => Ok(v[..n].to_vec()),
            _ => Ok((1..=n).map(f).collect()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Theorem1Config {
    pub weights: WeightKind,
    pub n: usize,
    pub seed: u64,
    pub epsilon: f64,
    /// Checkpoints below `n * n0_fraction` are skipped.
    pub n0_fraction: f64,
    pub per_decade: usize,
    /// Epoch length of the periodic strategy.
    pub period: usize,
}

impl Theorem1Config {
    pub fn new(weights: WeightKind, n: usize, seed: u64) -> Self {
        Self { weights, n, seed, epsilon: 0.05, n0_fraction: 0.1, per_decade: 10, period: 100 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrategyOutcome {
    pub strategy: String,
    /// `max_{n >= n0} (S_n - E[S_n]) / a_n` over checkpoints.
    pub max_upper: f64,
    /// `min_{n >= n0} (S_n - e[S_n]) / a_n` over checkpoints.
    pub min_lower: f64,
    pub final_upper: f64,
    pub final_lower: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Theorem1Report {
    pub config: Theorem1Config,
    pub weight_partial_sum: f64,
    pub outcomes: Vec<StrategyOutcome>,
    pub pass: bool,
}

impl Theorem1Report {
    pub fn rows(&self, fixture: &str) -> Vec<ExperimentRow> {
        let n = self.config.n as u64;
        let mut rows = Vec::new();
        for o in &self.outcomes {
            let row = |stat: &str, v: f64, pass: bool| ExperimentRow::new("theorem1", fixture, &o.strategy, n, stat, v, pass);
            rows.push(row("max_upper_deviation", o.max_upper, o.max_upper <= self.config.epsilon));
            rows.push(row("min_lower_deviation", o.min_lower, o.min_lower >= -self.config.epsilon));
            rows.push(row("final_upper_deviation", o.final_upper, true));
            rows.push(row("final_lower_deviation", o.final_lower, true));
        }
        rows.push(ExperimentRow::new("theorem1", fixture, "all", n, "weight_partial_sum", self.weight_partial_sum, true));
        rows.push(ExperimentRow::new("theorem1", fixture, "all", n, "summary", f64::from(u8::from(self.pass)), self.pass));
        rows
    }
}

fn second_moment(law: &SamplableDistribution) -> f64 {
    match law {
        SamplableDistribution::Pareto { alpha, scale } if *alpha > 2.0 => alpha * scale * scale / (alpha - 2.0),
        other => other.as_finite().map_or(f64::INFINITY, |d| d.expectation(|x| x * x)),
    }
}

fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Constant, periodic and history-driven strategies.
fn strategy_battery(laws: usize, period: usize, seed: u64) -> Vec<AdversaryStrategy> {
    let mut out: Vec<AdversaryStrategy> = (0..laws).map(AdversaryStrategy::Constant).collect();
    out.push(AdversaryStrategy::EpochSchedule((0..laws).map(|j| (period.max(1), j)).collect()));
    out.push(AdversaryStrategy::hook("random-policy", move |step, history: &[f64]| {
        let last = history.last().map_or(0, |v| v.to_bits());
        (mix64(seed ^ mix64(step as u64) ^ last) % laws as u64) as usize
    }));
    out
}

/// Independent coordinates `X_i` with ambiguity set `sets[(i - 1) mod L]`,
/// simulated under a strategy battery and normalized by `a_n`.
pub fn theorem1_experiment(sets: &[AmbiguitySet], config: &Theorem1Config) -> Result<Theorem1Report> {
    let n = config.n;
    if sets.is_empty() || n == 0 {
        return Err(Error::InvalidParameter("theorem 1 experiment needs sets and n > 0".into()));
    }
    let laws = sets[0].len();
    if sets.iter().any(|s| s.len() != laws) {
        return Err(Error::InvalidParameter("every ambiguity set must have the same number of laws".into()));
    }
    let mut upper_mean = Vec::with_capacity(sets.len());
    let mut lower_mean = Vec::with_capacity(sets.len());
    let mut second = Vec::with_capacity(sets.len());
    for set in sets {
        let means: Vec<f64> = set
            .laws()
            .iter()
            .map(|l| l.mean().ok_or_else(|| Error::WeightConditionFails("a law has no finite mean".into())))
            .collect::<Result<_>>()?;
        upper_mean.push(means.iter().copied().fold(f64::NEG_INFINITY, f64::max));
        lower_mean.push(means.iter().copied().fold(f64::INFINITY, f64::min));
        second.push(set.laws().iter().map(second_moment).fold(0.0, f64::max));
    }
    let a = config.weights.weights(n)?;
    let moments: Vec<f64> = (0..n).map(|i| second[i % sets.len()]).collect();
    if moments.iter().any(|m| !m.is_finite()) {
        return Err(Error::WeightConditionFails("infinite second moment".into()));
    }
    let weight = weight_sequence_check(&moments, &a)?;
    if !weight.cauchy_flag {
        return Err(Error::WeightConditionFails(format!(
            "sum E[X_i^2] / a_i^2 is not settling: last octave increments {:?}",
            &weight.octave_increments[weight.octave_increments.len().saturating_sub(2)..]
        )));
    }
    let checkpoints = geometric_checkpoints(10, n, config.per_decade);
    let n0 = ((n as f64) * config.n0_fraction).ceil() as usize;
    let battery = strategy_battery(laws, config.period, config.seed);
    let outcomes: Vec<StrategyOutcome> = battery
        .par_iter()
        .enumerate()
        .map(|(idx, strategy)| {
            let mut rng = path_stream(config.seed, idx as u64);
            let mut history = Vec::new();
            let keep = strategy.needs_history();
            let (mut s, mut eu, mut el) = (0.0, 0.0, 0.0);
            let (mut max_upper, mut min_lower) = (f64::NEG_INFINITY, f64::INFINITY);
            let (mut final_upper, mut final_lower) = (0.0, 0.0);
            let mut next = 0;
            for i in 0..n {
                let set = i % sets.len();
                let j = match strategy.choose(i, &history) {
                    LawChoice::Pure(j) => j,
                    LawChoice::Mix { high, low, weight_high } => {
                        if rng.random::<f64>() < weight_high { high } else { low }
                    }
                };
                let x = sets[set].laws()[j].sample(&mut rng);
                if keep {
                    history.push(x);
                }
                s += x;
                eu += upper_mean[set];
                el += lower_mean[set];
                if next < checkpoints.len() && checkpoints[next] == i + 1 {
                    next += 1;
                    let (u, l) = ((s - eu) / a[i], (s - el) / a[i]);
                    final_upper = u;
                    final_lower = l;
                    if i + 1 >= n0 {
                        max_upper = max_upper.max(u);
                        min_lower = min_lower.min(l);
                    }
                }
            }
            let pass = max_upper <= config.epsilon && min_lower >= -config.epsilon;
            StrategyOutcome { strategy: strategy.label(), max_upper, min_lower, final_upper, final_lower, pass }
        })
        .collect();
    let pass = outcomes.iter().all(|o| o.pass);
    Ok(Theorem1Report { config: config.clone(), weight_partial_sum: weight.partial_sums[n - 1], outcomes, pass })
}
