//! Mean-bound sequences, maximal inequalities and the seeded path
//! experiments built on them.

mod experiments;
mod simulate;

use serde::Serialize;

use crate::capacity::{lower_capacity, upper_capacity, EventPredicate};
use crate::engine::{expectation_pair, upper_expectation, upper_linear_sequence, CrossingSpec, Deviation, Functional, SequenceModel};
use crate::error::{Error, Result};

pub use experiments::{
    cluster_set_experiment, divergence_experiment, theorem1_experiment, ClusterConfig, ClusterReport,
    DivergenceConfig, DivergenceReport, StrategyOutcome, Theorem1Config, Theorem1Report, WeightKind,
};
pub use simulate::{geometric_checkpoints, simulate_paths, PathStats};

/// Slack on the bracket invariant of [`MeanBoundsSequence`].
pub const BRACKET_SLACK: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeanBoundsSequence {
    pub n_values: Vec<usize>,
    /// `E[S_n] / n`.
    pub upper_means: Vec<f64>,
    /// `e[S_n] / n`.
    pub lower_means: Vec<f64>,
    /// `(e[X_1], E[X_1])`.
    pub bracket: (f64, f64),
}

impl MeanBoundsSequence {
    /// Wraps precomputed means, checking the bracket invariant.
    pub fn from_values(upper_means: Vec<f64>, lower_means: Vec<f64>, bracket: (f64, f64)) -> Result<Self> {
        if upper_means.len() != lower_means.len() {
            return Err(Error::InvalidParameter("upper and lower means differ in length".into()));
        }
        let seq = Self { n_values: (1..=upper_means.len()).collect(), upper_means, lower_means, bracket };
        seq.check_bracket()?;
        Ok(seq)
    }

    fn check_bracket(&self) -> Result<()> {
        let (lo, hi) = self.bracket;
        for (i, (u, l)) in self.upper_means.iter().zip(&self.lower_means).enumerate() {
            if !(lo - BRACKET_SLACK <= *l && *l <= u + BRACKET_SLACK && *u <= hi + BRACKET_SLACK) {
                return Err(Error::InvariantViolation(format!(
                    "n = {}: lower mean {l}, upper mean {u} outside bracket [{lo}, {hi}]",
                    i + 1
                )));
            }
        }
        Ok(())
    }
}

/// Exact `E[S_n]/n` and `e[S_n]/n` for `n = 1..=N` by the additive recursion.
#[allow(non_snake_case)]
pub fn mean_bounds_sequence(model: &SequenceModel, N: usize) -> Result<MeanBoundsSequence> {
    if N == 0 {
        return Err(Error::InvalidParameter("N must be positive".into()));
    }
    let upper = upper_linear_sequence(model, N, 1.0)?;
    let neg = upper_linear_sequence(model, N, -1.0)?;
    let first = expectation_pair(model, &Functional::coordinate(1, 0))?;
    let upper_means = upper.iter().enumerate().map(|(i, v)| v / (i + 1) as f64).collect();
    let lower_means = neg.iter().enumerate().map(|(i, v)| -v / (i + 1) as f64).collect();
    MeanBoundsSequence::from_values(upper_means, lower_means, (first.lower, first.upper))
}

/// Ratio of successive doubling deltas at or below which a mean sequence
/// counts as settling.
pub const SETTLING_RATIO: f64 = 0.75;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MuLimits {
    pub mu_bar: f64,
    pub mu_under: f64,
    /// Doubling points `n = 1, 2, 4, ...` used for the deltas.
    pub doublings: Vec<usize>,
    /// `|mean(2n) - mean(n)|` for the upper and lower sequences.
    pub upper_deltas: Vec<f64>,
    pub lower_deltas: Vec<f64>,
    pub converged: bool,
}

fn settles(deltas: &[f64], tol: f64) -> bool {
    match deltas {
        [.., prev, last] => *last <= tol || *last <= SETTLING_RATIO * prev,
        [last] => *last <= tol,
        [] => false,
    }
}

/// Last values and Cauchy-trend deltas over doublings. Reports instead of
/// asserting a limit.
pub fn estimate_mu_limits(seq: &MeanBoundsSequence, tol: f64) -> Result<MuLimits> {
    let n = seq.upper_means.len();
    if n < 8 {
        return Err(Error::HorizonTooSmall(format!("N = {n} is below 8")));
    }
    let mut doublings = vec![1usize];
    while doublings.last().unwrap() * 2 <= n {
        doublings.push(doublings.last().unwrap() * 2);
    }
    let deltas = |v: &[f64]| -> Vec<f64> { doublings.windows(2).map(|w| (v[w[1] - 1] - v[w[0] - 1]).abs()).collect() };
    let upper_deltas = deltas(&seq.upper_means);
    let lower_deltas = deltas(&seq.lower_means);
    let converged = settles(&upper_deltas, tol) && settles(&lower_deltas, tol);
    Ok(MuLimits {
        mu_bar: seq.upper_means[n - 1],
        mu_under: seq.lower_means[n - 1],
        doublings,
        upper_deltas,
        lower_deltas,
        converged,
    })
}

/// The exponential form `C_p d^-p x^-p sum E[X_i^2] + exp(-x^2 / (2 (1 + d) B_n^2))`
/// with the smallest `C_p` that makes it hold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExponentialForm {
    pub delta: f64,
    pub p: f64,
    pub exp_term: f64,
    pub min_constant: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InequalityReport {
    pub descriptor: String,
    pub lhs: f64,
    pub rhs: f64,
    /// `lhs / rhs`; for the Kolmogorov form this is the minimal constant.
    pub ratio: f64,
    pub pass: bool,
    /// Whether `pass` is a hard assertion for this instance.
    pub hard: bool,
    pub exponential: Option<ExponentialForm>,
}

/// Slack on `lhs <= rhs`.
pub const INEQUALITY_SLACK: f64 = 1e-12;

impl InequalityReport {
    fn new(descriptor: String, lhs: f64, rhs: f64, hard: bool) -> Self {
        let ratio = if rhs > 0.0 {
            lhs / rhs
        } else if lhs > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        Self { descriptor, lhs, rhs, ratio, pass: lhs <= rhs + INEQUALITY_SLACK, hard, exponential: None }
    }

    /// Holds unless the assertion is hard and fails.
    pub fn ok(&self) -> bool {
        self.pass || !self.hard
    }
}

/// Which capacity bounds the maximal deviation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CapacitySide {
    /// `V(max_k (S_k - E[S_k]) >= x)`.
    Upper,
    /// `v(max_k (S_k - e[S_k]) >= x)`.
    Lower,
}

/// `sum_{i <= n} E[X_i^2]`. The shipped models are stationary, so every
/// coordinate has the law of `X_1`.
fn second_moment_sum(model: &SequenceModel, n: usize) -> Result<f64> {
    Ok(n as f64 * upper_expectation(model, &Functional::coordinate(1, 0).map(|v| v * v))?)
}

/// Kolmogorov's maximal inequality with the constant left free: the report's
/// `rhs` is `x^-2 sum E[X_i^2]` and `ratio` the minimal constant. The bound
/// with constant 1 is asserted only for single-law independent models.
pub fn kolmogorov_report(
    model: &SequenceModel,
    side: CapacitySide,
    n: usize,
    x: f64,
    delta: f64,
    p: f64,
) -> Result<InequalityReport> {
    if !(x > 0.0) || !(delta > 0.0 && delta <= 1.0) || !(p >= 2.0) || n == 0 {
        return Err(Error::InvalidParameter(format!("need n > 0, x > 0, 0 < delta <= 1 and p >= 2, got n = {n}, x = {x}, delta = {delta}, p = {p}")));
    }
    let scale = match side {
        CapacitySide::Upper => 1.0,
        CapacitySide::Lower => -1.0,
    };
    let centers: Vec<f64> = upper_linear_sequence(model, n, scale)?.into_iter().map(|v| scale * v).collect();
    let event = EventPredicate::crossing(CrossingSpec { centers, threshold: x, deviation: Deviation::Upward });
    let lhs = match side {
        CapacitySide::Upper => upper_capacity(model, &event)?,
        CapacitySide::Lower => lower_capacity(model, &event)?,
    };
    let b2 = second_moment_sum(model, n)?;
    let classical = model.driver().len() == 1 && model.is_iid();
    let descriptor = format!("kolmogorov {side:?} n={n} x={x}");
    let mut report = InequalityReport::new(descriptor, lhs, b2 / (x * x), classical);
    let exp_term = if b2 > 0.0 { (-x * x / (2.0 * (1.0 + delta) * b2)).exp() } else { 0.0 };
    let min_constant = if b2 > 0.0 { (lhs - exp_term).max(0.0) * (delta * x).powf(p) / b2 } else { 0.0 };
    report.exponential = Some(ExponentialForm { delta, p, exp_term, min_constant });
    Ok(report)
}

/// `v(max_k |sum_{i <= k} (X_i - mu_i)| >= x) <= (2 / x^2) sum E[X_i^2]` for
/// `e[X_k] <= mu_k <= E[X_k]`. A hard assertion.
pub fn lower_capacity_maximal_check(model: &SequenceModel, n: usize, mus: &[f64], x: f64) -> Result<InequalityReport> {
    if mus.len() != n || n == 0 {
        return Err(Error::InvalidParameter(format!("{} centers for horizon {n}", mus.len())));
    }
    if !(x > 0.0) {
        return Err(Error::InvalidParameter(format!("x = {x} must be positive")));
    }
    let first = expectation_pair(model, &Functional::coordinate(1, 0))?;
    for (k, mu) in mus.iter().enumerate() {
        if !(first.lower - INEQUALITY_SLACK <= *mu && *mu <= first.upper + INEQUALITY_SLACK) {
            return Err(Error::MuOutOfBand { index: k + 1, mu: *mu, lower: first.lower, upper: first.upper });
        }
    }
    let mut acc = 0.0;
    let centers = mus
        .iter()
        .map(|mu| {
            acc += mu;
            acc
        })
        .collect();
    let event = EventPredicate::crossing(CrossingSpec { centers, threshold: x, deviation: Deviation::Absolute });
    let lhs = lower_capacity(model, &event)?;
    let rhs = 2.0 / (x * x) * second_moment_sum(model, n)?;
    Ok(InequalityReport::new(format!("maximal lower capacity n={n} x={x}"), lhs, rhs, true))
}
