//! Capacities, Choquet integrals, truncation and extended expectations.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::engine::{
    upper_expectation, AdversaryStrategy, CheckReport, CrossingSpec, Functional, PathSimulator, SequenceModel,
};
use crate::error::{Error, Result};
use crate::measures::{AmbiguitySet, SamplableDistribution};
use crate::report::ReportRow;

/// An event `{(X_1..X_n) in A}`.
#[derive(Clone)]
pub struct EventPredicate {
    horizon: usize,
    pred: Arc<dyn Fn(&[f64]) -> bool + Send + Sync>,
    /// Set when the event is a partial-sum crossing, so the engine can use the
    /// lattice recursion. `negated` marks the complement of that crossing.
    crossing: Option<(CrossingSpec, bool)>,
    /// Set for the sure and the impossible event, whose indicators are
    /// constants and so evaluate without rounding.
    fixed: Option<bool>,
}

impl std::fmt::Debug for EventPredicate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EventPredicate").field("horizon", &self.horizon).field("crossing", &self.crossing).finish()
    }
}

impl EventPredicate {
    pub fn new(horizon: usize, pred: impl Fn(&[f64]) -> bool + Send + Sync + 'static) -> Self {
        Self { horizon, pred: Arc::new(pred), crossing: None, fixed: None }
    }

    pub fn always(horizon: usize) -> Self {
        Self { fixed: Some(true), ..Self::new(horizon, |_| true) }
    }

    pub fn never(horizon: usize) -> Self {
        Self { fixed: Some(false), ..Self::new(horizon, |_| false) }
    }

    /// `{max_{k <= n} dev(S_k - c_k) >= threshold}`.
    pub fn crossing(spec: CrossingSpec) -> Self {
        let s = spec.clone();
        Self { horizon: spec.horizon(), pred: Arc::new(move |x| s.crossed(x)), crossing: Some((spec, false)), fixed: None }
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn contains(&self, observables: &[f64]) -> bool {
        (self.pred)(observables)
    }

    pub fn complement(&self) -> Self {
        let p = self.pred.clone();
        Self {
            horizon: self.horizon,
            pred: Arc::new(move |x| !p(x)),
            crossing: self.crossing.clone().map(|(spec, negated)| (spec, !negated)),
            fixed: self.fixed.map(|f| !f),
        }
    }

    /// The 0/1 payoff of the event.
    pub fn indicator(&self) -> Functional {
        if let Some(sure) = self.fixed {
            return Functional::constant(self.horizon, if sure { 1.0 } else { 0.0 });
        }
        match &self.crossing {
            Some((spec, false)) => Functional::crossing_payoff(spec.clone(), 1.0, 0.0),
            Some((spec, true)) => Functional::crossing_payoff(spec.clone(), 0.0, 1.0),
            None => {
                let p = self.pred.clone();
                Functional::new(self.horizon, move |x| if p(x) { 1.0 } else { 0.0 })
            }
        }
    }
}

/// `V(A) = E[I_A]`.
pub fn upper_capacity(model: &SequenceModel, event: &EventPredicate) -> Result<f64> {
    upper_expectation(model, &event.indicator())
}

/// `v(A) = 1 - V(A^c)`.
pub fn lower_capacity(model: &SequenceModel, event: &EventPredicate) -> Result<f64> {
    Ok(1.0 - upper_capacity(model, &event.complement())?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McCapacity {
    /// Largest empirical frequency over the strategies.
    pub value: f64,
    /// Binomial standard error of that frequency.
    pub se: f64,
    /// Index of the strategy attaining it, lowest on ties.
    pub strategy: usize,
    pub frequencies: Vec<f64>,
}

/// Empirical lower bound on `sup_P P(A)` from simulated strategies.
pub fn mc_capacity_lower_bound(
    model: &SequenceModel,
    event: &EventPredicate,
    strategies: &[AdversaryStrategy],
    n_paths: usize,
    seed: u64,
) -> Result<McCapacity> {
    if strategies.is_empty() || n_paths == 0 {
        return Err(Error::InvalidParameter("need at least one strategy and one path".into()));
    }
    let n = event.horizon();
    let mut frequencies = Vec::with_capacity(strategies.len());
    for strategy in strategies {
        strategy.validate(model.driver().len())?;
        let hits = (0..n_paths as u64)
            .into_par_iter()
            .map(|path| {
                let mut sim = PathSimulator::new(model, strategy, seed, path);
                let mut obs = Vec::with_capacity(n);
                for _ in 0..n {
                    obs.push(sim.next_observable()?);
                }
                Ok(u64::from(event.contains(&obs)))
            })
            .collect::<Result<Vec<u64>>>()?
            .iter()
            .sum::<u64>();
        frequencies.push(hits as f64 / n_paths as f64);
    }
    let mut best = 0;
    for (i, f) in frequencies.iter().enumerate() {
        if *f > frequencies[best] {
            best = i;
        }
    }
    let p = frequencies[best];
    Ok(McCapacity { value: p, se: (p * (1.0 - p) / n_paths as f64).sqrt(), strategy: best, frequencies })
}

/// `t -> V(X >= t)` at sorted thresholds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CapacityCurve {
    thresholds: Vec<f64>,
    values: Vec<f64>,
}

impl CapacityCurve {
    pub fn new(thresholds: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if thresholds.len() != values.len() {
            return Err(Error::LengthMismatch { values: values.len(), probs: thresholds.len() });
        }
        if thresholds.is_empty() {
            return Err(Error::EmptySupport);
        }
        if thresholds.windows(2).any(|w| !(w[0] < w[1])) || thresholds.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidParameter("thresholds must be finite and strictly increasing".into()));
        }
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) || values.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::InvalidParameter("capacity values must lie in [0, 1] and be nonincreasing".into()));
        }
        Ok(Self { thresholds, values })
    }

    /// `V(X_1 >= t) = max_j P_j(X_1 >= t)` at every support point of an
    /// exact ambiguity set.
    pub fn of_first_coordinate(set: &AmbiguitySet) -> Result<Self> {
        let support = set.common_support().ok_or_else(|| unbounded_or_inexact(set))?.to_vec();
        let probs = set.prob_matrix().ok_or(Error::NotExactCapable)?;
        let values = (0..support.len())
            .map(|i| probs.iter().map(|row| row[i..].iter().sum::<f64>()).fold(0.0, f64::max).min(1.0))
            .collect();
        Self::new(support, values)
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `V(X >= t)`, assuming the thresholds contain every support point.
    pub fn at(&self, t: f64) -> f64 {
        let i = self.thresholds.partition_point(|&x| x < t);
        self.values.get(i).copied().unwrap_or(0.0)
    }
}

fn unbounded_or_inexact(set: &AmbiguitySet) -> Error {
    if set.laws().iter().any(|l| matches!(l, SamplableDistribution::Pareto { .. })) {
        Error::UnboundedSupport
    } else {
        Error::NotExactCapable
    }
}

/// Layer-cake sum of a step tail whose jumps sit at `points` (sorted,
/// distinct, containing every support value). `tail(i)` is `V(X >= points[i])`.
fn layer_cake(points: &[f64], tail: impl Fn(usize) -> f64) -> f64 {
    let mut total = 0.0;
    for i in 1..points.len() {
        let width = points[i] - points[i - 1];
        if points[i] > 0.0 {
            total += width * tail(i);
        } else {
            total += width * (tail(i) - 1.0);
        }
    }
    total
}

fn with_zero(points: &[f64]) -> Vec<f64> {
    let mut pts = points.to_vec();
    if let Err(pos) = pts.binary_search_by(|x| x.total_cmp(&0.0)) {
        pts.insert(pos, 0.0);
    }
    pts
}

/// Choquet integral of a finite-support variable from its capacity curve.
pub fn choquet_integral_curve(curve: &CapacityCurve) -> f64 {
    let pts = with_zero(&curve.thresholds);
    // Below the smallest support point the tail is V(Omega) = 1.
    layer_cake(&pts, |i| curve.at(pts[i]))
}

/// Choquet integral `C_V[X]` of the payoff `x` by exact layer-cake summation
/// over its distinct values, with `V(X >= t)` from the upper capacity.
pub fn choquet_integral_finite(model: &SequenceModel, x: &Functional) -> Result<f64> {
    let space = model.require_exact().map_err(|_| unbounded_or_inexact(model.driver()))?;
    let drivers = model.drivers_for(x.horizon());
    let s = space.support_size();
    let leaf_total = (s as f64).powi(drivers as i32);
    if leaf_total > crate::engine::DEFAULT_LEAF_CAP {
        return Err(Error::HorizonCap { leaves: leaf_total, cap: crate::engine::DEFAULT_LEAF_CAP });
    }
    let mut values = Vec::new();
    let mut d = vec![0.0; drivers];
    for code in 0..s.pow(drivers as u32) {
        let mut c = code;
        for slot in d.iter_mut().rev() {
            *slot = space.values[c % s];
            c /= s;
        }
        values.push(x.eval(&model.observables(&d)));
    }
    values.sort_by(f64::total_cmp);
    values.dedup();
    let pts = with_zero(&values);
    let mut tails = Vec::with_capacity(pts.len());
    for &t in &pts {
        let x = x.clone();
        let event = EventPredicate::new(x.horizon(), move |o| x.eval(o) >= t);
        tails.push(upper_capacity(model, &event)?);
    }
    Ok(layer_cake(&pts, |i| tails[i]))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum QuadratureRule {
    Trapezoid,
    /// Exact for step tails whose jumps are grid points.
    Midpoint,
}

/// Integration grid: `[0, 1]` and every octave `[2^k, 2^(k+1)]` are split into
/// `per_octave` equal cells, and `breakpoints` are added as extra nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureGrid {
    pub per_octave: usize,
    pub rule: QuadratureRule,
    pub breakpoints: Vec<f64>,
}

impl Default for QuadratureGrid {
    fn default() -> Self {
        Self { per_octave: 256, rule: QuadratureRule::Trapezoid, breakpoints: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuadratureResult {
    /// `int_0^{T_max} tail(t) dt`.
    pub value: f64,
    /// Increment over each complete octave `[2^k, 2^(k+1)]`, `k = 0, 1, ...`.
    pub octave_increments: Vec<f64>,
    pub diverging: bool,
}

/// Octave-increment ratio at or above which an integral is flagged diverging.
pub const DIVERGENCE_RATIO: f64 = 0.9;

/// Numerical `int_0^{T_max} V(X >= t) dt` for a nonincreasing tail.
pub fn choquet_integral_quadrature(
    tail: &(dyn Fn(f64) -> f64 + Sync),
    t_max: f64,
    grid: &QuadratureGrid,
) -> Result<QuadratureResult> {
    if !(t_max > 0.0 && t_max.is_finite()) || grid.per_octave == 0 {
        return Err(Error::InvalidParameter(format!("t_max = {t_max}, per_octave = {}", grid.per_octave)));
    }
    // Segments [0, 1], [1, 2], [2, 4], ... clipped to t_max.
    let mut edges = vec![0.0];
    let mut hi = 1.0f64;
    while edges.last().copied().unwrap() < t_max {
        edges.push(hi.min(t_max));
        hi *= 2.0;
    }
    let mut nodes = Vec::new();
    for w in edges.windows(2) {
        let (a, b) = (w[0], w[1]);
        for j in 0..grid.per_octave {
            nodes.push(a + (b - a) * j as f64 / grid.per_octave as f64);
        }
    }
    nodes.push(t_max);
    nodes.extend(grid.breakpoints.iter().copied().filter(|&b| b > 0.0 && b < t_max));
    nodes.sort_by(f64::total_cmp);
    nodes.dedup();

    let at_nodes: Vec<f64> = nodes.par_iter().map(|&t| tail(t)).collect();
    for i in 1..nodes.len() {
        if at_nodes[i] > at_nodes[i - 1] + 1e-12 {
            return Err(Error::GridTooCoarse { at: nodes[i], before: at_nodes[i - 1], after: at_nodes[i] });
        }
    }
    let cells: Vec<f64> = match grid.rule {
        QuadratureRule::Trapezoid => {
            (1..nodes.len()).map(|i| 0.5 * (nodes[i] - nodes[i - 1]) * (at_nodes[i] + at_nodes[i - 1])).collect()
        }
        QuadratureRule::Midpoint => {
            let mids: Vec<f64> = (1..nodes.len()).map(|i| 0.5 * (nodes[i] + nodes[i - 1])).collect();
            let vals: Vec<f64> = mids.par_iter().map(|&t| tail(t)).collect();
            (1..nodes.len()).map(|i| (nodes[i] - nodes[i - 1]) * vals[i - 1]).collect()
        }
    };
    // Fixed left-to-right summation.
    let value = cells.iter().sum();
    let mut octave_increments = Vec::new();
    let mut lo = 1.0f64;
    while 2.0 * lo <= t_max {
        let inc: f64 = (1..nodes.len()).filter(|&i| nodes[i - 1] >= lo && nodes[i] <= 2.0 * lo).map(|i| cells[i - 1]).sum();
        octave_increments.push(inc);
        lo *= 2.0;
    }
    let diverging = ratio_flags_divergence(&octave_increments);
    Ok(QuadratureResult { value, octave_increments, diverging })
}

/// Last increment positive and at least [`DIVERGENCE_RATIO`] of the one before.
fn ratio_flags_divergence(increments: &[f64]) -> bool {
    match increments {
        [.., prev, last] => *last > 0.0 && (!last.is_finite() || *last >= DIVERGENCE_RATIO * prev),
        _ => false,
    }
}

/// `X^(c) = (-c) v X ^ c`.
pub fn truncate(x: f64, c: f64) -> f64 {
    debug_assert!(c > 0.0, "truncation level must be positive");
    x.clamp(-c, c)
}

/// Doubling truncation levels `c0, 2 c0, ...`, at most `max_levels` of them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TruncationSchedule {
    pub c0: f64,
    pub max_levels: usize,
}

impl Default for TruncationSchedule {
    fn default() -> Self {
        Self { c0: 1.0, max_levels: 40 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtendedExpectationResult {
    pub value: f64,
    pub converged: bool,
    pub c_grid: Vec<f64>,
    /// `|E[X^(c_{i+1})] - E[X^(c_i)]|`.
    pub deltas: Vec<f64>,
    pub trajectory: Vec<f64>,
}

impl ExtendedExpectationResult {
    pub fn require_converged(&self) -> Result<f64> {
        if self.converged {
            Ok(self.value)
        } else {
            Err(Error::NotConverged { trajectory: self.trajectory.clone() })
        }
    }
}

/// `lim_c f(c)` along the doubling schedule; converged once two successive
/// deltas fall below `tol`.
pub fn extended_limit(
    truncated: &dyn Fn(f64) -> Result<f64>,
    schedule: TruncationSchedule,
    tol: f64,
) -> Result<ExtendedExpectationResult> {
    if !(schedule.c0 > 0.0) || schedule.max_levels < 2 {
        return Err(Error::InvalidParameter("truncation schedule needs c0 > 0 and at least two levels".into()));
    }
    let mut c_grid = Vec::new();
    let mut trajectory = Vec::new();
    let mut deltas: Vec<f64> = Vec::new();
    let mut c = schedule.c0;
    let mut converged = false;
    for _ in 0..schedule.max_levels {
        let v = truncated(c)?;
        if let Some(prev) = trajectory.last() {
            deltas.push((v - prev).abs());
        }
        c_grid.push(c);
        trajectory.push(v);
        if let [.., a, b] = deltas[..] {
            if a < tol && b < tol {
                converged = true;
                break;
            }
        }
        c *= 2.0;
    }
    Ok(ExtendedExpectationResult { value: *trajectory.last().unwrap(), converged, c_grid, deltas, trajectory })
}

/// `bE[phi] = lim_c E[phi^(c)]` on an exact model.
pub fn extended_expectation(
    model: &SequenceModel,
    phi: &Functional,
    schedule: TruncationSchedule,
    tol: f64,
) -> Result<ExtendedExpectationResult> {
    model.require_exact()?;
    extended_limit(&|c| upper_expectation(model, &phi.map(move |v| truncate(v, c))), schedule, tol)
}

/// `bE[X_1]` from the analytic truncated means of the laws.
pub fn extended_expectation_of_first(
    set: &AmbiguitySet,
    schedule: TruncationSchedule,
    tol: f64,
) -> Result<ExtendedExpectationResult> {
    extended_limit(&|c| Ok(set.upper_truncated_mean(c)), schedule, tol)
}

/// `|bE[S_n] - n bE[X_1]| <= n tol` on an exact i.i.d. model.
pub fn extended_additivity_check(
    model: &SequenceModel,
    n: usize,
    schedule: TruncationSchedule,
    tol: f64,
) -> Result<CheckReport> {
    if !model.is_iid() {
        return Err(Error::InvalidParameter("extended additivity is checked on i.i.d. models".into()));
    }
    let sum = extended_expectation(model, &Functional::sum(n), schedule, tol)?.require_converged()?;
    let first = extended_expectation(model, &Functional::coordinate(1, 0), schedule, tol)?.require_converged()?;
    let dev = (sum - n as f64 * first).abs();
    let mut report = CheckReport {
        name: "extended_additivity".into(),
        checked: 1,
        max_deviation: dev,
        violations: Vec::new(),
    };
    if dev > n as f64 * tol {
        report.violations.push(crate::engine::Violation {
            property: "additivity".into(),
            detail: format!("n = {n}"),
            lhs: sum,
            rhs: n as f64 * first,
        });
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FinitenessReport {
    pub m: f64,
    /// `sum_{i <= I} V(|X| >= M i)` for `I = 1..=I_max`.
    pub partial_sums: Vec<f64>,
    /// `(c, E[(|X| - c)^+])` on doubling `c` up to `c_max`.
    pub excess: Vec<(f64, f64)>,
    pub tail_summable: bool,
    pub excess_vanishing: bool,
    /// Either diagnostic points to `C_V(|X|) = infinity`.
    pub diverging: bool,
}

impl FinitenessReport {
    pub fn rows(&self) -> Vec<ReportRow> {
        let mut rows: Vec<ReportRow> = self
            .partial_sums
            .iter()
            .enumerate()
            .map(|(i, v)| ReportRow::new("tail_partial_sum", (i + 1) as f64, *v, ""))
            .collect();
        rows.extend(self.excess.iter().map(|(c, v)| ReportRow::new("excess_mean", *c, *v, "")));
        let flag = if self.diverging { "diverging" } else { "summable" };
        rows.push(ReportRow::new("choquet_finiteness", self.m, f64::from(u8::from(!self.diverging)), flag));
        rows
    }
}

/// Diagnostics for `C_V(|X|) < infinity`: summability of `V(|X| >= M i)` and
/// decay of `E[(|X| - c)^+]`.
pub fn choquet_finiteness_diagnostics(
    tail_abs: &dyn Fn(f64) -> f64,
    excess_abs: &dyn Fn(f64) -> f64,
    m: f64,
    i_max: usize,
    c_max: f64,
) -> Result<FinitenessReport> {
    if !(m > 0.0) || i_max < 4 || !(c_max >= 4.0) {
        return Err(Error::InvalidParameter(format!("M = {m}, I_max = {i_max}, c_max = {c_max}")));
    }
    let mut partial_sums = Vec::with_capacity(i_max);
    let mut acc = 0.0;
    for i in 1..=i_max {
        acc += tail_abs(m * i as f64);
        partial_sums.push(acc);
    }
    // Increments over index octaves (2^k, 2^(k+1)].
    let mut increments = Vec::new();
    let mut lo = 1usize;
    while 2 * lo <= i_max {
        increments.push(partial_sums[2 * lo - 1] - partial_sums[lo - 1]);
        lo *= 2;
    }
    let tail_summable = !ratio_flags_divergence(&increments);

    let mut excess = Vec::new();
    let mut c = 1.0;
    while c <= c_max {
        excess.push((c, excess_abs(c)));
        c *= 2.0;
    }
    let excess_vanishing = match excess[..] {
        [.., (_, prev), (_, last)] => last.is_finite() && (last == 0.0 || last < DIVERGENCE_RATIO * prev),
        _ => false,
    };
    Ok(FinitenessReport {
        m,
        partial_sums,
        excess,
        tail_summable,
        excess_vanishing,
        diverging: !(tail_summable && excess_vanishing),
    })
}

/// [`choquet_finiteness_diagnostics`] for `X_1` under an ambiguity set, with
/// analytic tails for Pareto laws.
pub fn choquet_finiteness_for_set(set: &AmbiguitySet, m: f64, i_max: usize, c_max: f64) -> Result<FinitenessReport> {
    choquet_finiteness_diagnostics(&|t| set.upper_tail_abs(t), &|c| set.upper_excess_abs(c), m, i_max, c_max)
}
