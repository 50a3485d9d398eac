//! Sequence constructors, the weight condition, the large/small block
//! partition and the geometric subsequence.

use std::io::Write;

use serde::Serialize;

use crate::capacity::truncate;
use crate::engine::{upper_expectation, Functional, SequenceModel, WindowFn};
use crate::error::{Error, Result};
use crate::measures::AmbiguitySet;
use crate::report::format_float;

pub fn make_iid_model(driver: AmbiguitySet) -> SequenceModel {
    SequenceModel::iid(driver)
}

/// `X_i = g(e_i, ..., e_{i+m})` over i.i.d. drivers.
pub fn make_moving_window_model(m: usize, driver: AmbiguitySet, window: WindowFn) -> SequenceModel {
    SequenceModel::moving_window(m, driver, window)
}

/// Ratio of successive octave increments at or below which a series is
/// flagged summable.
pub const SUMMABLE_RATIO: f64 = 0.5;

/// Octave `k` of `sum i^-2` decays by `0.5 (1 + O(2^-k))`, so the factor is
/// met only in the limit; this much excess is tolerated.
pub const RATIO_SLACK: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightReport {
    /// `sum_{i <= N} E[X_i^2] / a_i^2`.
    pub partial_sums: Vec<f64>,
    /// Increments over index octaves `(2^k, 2^(k+1)]`.
    pub octave_increments: Vec<f64>,
    /// The last two complete octave increments decay by at least
    /// [`SUMMABLE_RATIO`], or the last one vanishes.
    pub cauchy_flag: bool,
}

/// Increments of `partial` over `(2^k, 2^(k+1)]`, one-based.
fn octave_increments(partial: &[f64]) -> Vec<f64> {
    let mut out = Vec::new();
    let mut lo = 1usize;
    while 2 * lo <= partial.len() {
        out.push(partial[2 * lo - 1] - partial[lo - 1]);
        lo *= 2;
    }
    out
}

fn decays(increments: &[f64]) -> bool {
    match increments {
        [.., prev, last] => *last == 0.0 || *last <= (SUMMABLE_RATIO + RATIO_SLACK) * prev,
        [last] => *last == 0.0,
        [] => false,
    }
}

pub fn weight_sequence_check(second_moments: &[f64], a: &[f64]) -> Result<WeightReport> {
    if second_moments.len() != a.len() {
        return Err(Error::InvalidParameter(format!(
            "{} second moments for {} weights",
            second_moments.len(),
            a.len()
        )));
    }
    if let Some(&s) = second_moments.iter().find(|s| !(**s >= 0.0) || !s.is_finite()) {
        return Err(Error::InvalidParameter(format!("second moment {s} is not a finite nonnegative number")));
    }
    if a.first().is_some_and(|&a1| !(a1 >= 1.0)) {
        return Err(Error::NotMonotone { index: 1 });
    }
    if let Some(i) = a.windows(2).position(|w| !(w[1] >= w[0])) {
        return Err(Error::NotMonotone { index: i + 2 });
    }
    let mut acc = 0.0;
    let partial_sums: Vec<f64> = second_moments
        .iter()
        .zip(a)
        .map(|(s, ai)| {
            acc += s / (ai * ai);
            acc
        })
        .collect();
    let octave_increments = octave_increments(&partial_sums);
    let cauchy_flag = decays(&octave_increments);
    Ok(WeightReport { partial_sums, octave_increments, cauchy_flag })
}

/// `M_i = max(1, r_i^(-1/2))` with `r_i = sum_{j >= i} s_j`, carried forward
/// once the tail vanishes. Nondecreasing by construction, and
/// `sum M_i s_i <= 2 (sum s_j)^(1/2)` whenever `sum s_j <= 1`.
#[allow(non_snake_case)]
pub fn build_weights_M(s: &[f64]) -> Result<Vec<f64>> {
    if let Some(&v) = s.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
        return Err(Error::TailNotSummable(format!("term {v} is not a finite nonnegative number")));
    }
    let mut tails = vec![0.0; s.len()];
    let mut acc = 0.0;
    for i in (0..s.len()).rev() {
        acc += s[i];
        tails[i] = acc;
    }
    if !acc.is_finite() {
        return Err(Error::TailNotSummable("series overflows".into()));
    }
    let mut out = Vec::with_capacity(s.len());
    let mut prev = 1.0f64;
    for r in tails {
        let m = if r > 0.0 { r.powf(-0.5).max(1.0) } else { prev };
        prev = prev.max(m);
        out.push(prev);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockingScheme {
    pub m: usize,
    /// Block endpoints with `a[0] = 0`.
    pub a: Vec<usize>,
    /// `l[n - 1]` is the length of block `n`.
    pub l: Vec<usize>,
    /// `weights[i - 1] = M_i`.
    pub weights: Vec<f64>,
}

/// Side of a block: the main part or its `m`-tail.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BlockKind {
    Z,
    W,
}

impl BlockingScheme {
    pub fn blocks(&self) -> usize {
        self.l.len()
    }

    /// `floor(min(M_{a_{n-1}+1}^(1/4), n^(1/4)))`, the upper constraint on `l_n`.
    pub fn cap(&self, n: usize) -> usize {
        block_cap(&self.weights, self.a[n - 1], n)
    }

    /// One-based index window of the `kind` part of block `n`, empty when
    /// `start > end`.
    pub fn window(&self, kind: BlockKind, n: usize) -> Result<(usize, usize)> {
        if n == 0 || n > self.blocks() {
            return Err(Error::IndexOutOfScheme { index: n, blocks: self.blocks() });
        }
        let (lo, hi) = (self.a[n - 1], self.a[n]);
        Ok(match kind {
            BlockKind::Z => (lo + 1, hi - self.m),
            BlockKind::W => (hi - self.m + 1, hi),
        })
    }

    /// Every violated invariant, as a message. Empty means all hold.
    pub fn invariant_violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.a.first() != Some(&0) {
            out.push("a_0 must be 0".into());
        }
        for n in 1..=self.blocks() {
            let ln = self.l[n - 1];
            if ln < self.m + 1 {
                out.push(format!("l_{n} = {ln} < m + 1"));
            }
            if n > 1 && ln < self.l[n - 2] {
                out.push(format!("l_{n} = {ln} decreases"));
            }
            if self.a[n] != self.a[n - 1] + ln {
                out.push(format!("a_{n} - a_{} != l_{n}", n - 1));
            }
            let cap = self.cap(n);
            if cap >= self.m + 1 && ln > cap {
                out.push(format!("l_{n} = {ln} exceeds the cap {cap} past the forced prefix"));
            }
        }
        out
    }

    /// Blocks where the forced minimum `m + 1` binds over the cap.
    pub fn forced_prefix(&self) -> usize {
        (1..=self.blocks()).take_while(|&n| self.cap(n) < self.m + 1).count()
    }

    /// `n m b / a_n` for every block, with `b = bE|X_1|`.
    pub fn w_negligibility_bound(&self, abs_mean: f64) -> Vec<f64> {
        (1..=self.blocks()).map(|n| n as f64 * self.m as f64 * abs_mean / self.a[n] as f64).collect()
    }

    /// The bound is nonincreasing since `a_n / n` is a running mean of the
    /// nondecreasing `l`; it ends strictly lower once `l` has grown.
    pub fn w_trend_decreasing(&self, abs_mean: f64) -> bool {
        let bound = self.w_negligibility_bound(abs_mean);
        let nonincreasing = bound.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12));
        let grew = self.l.first() != self.l.last();
        nonincreasing && (!grew || self.m == 0 || abs_mean == 0.0 || bound.last() < bound.first())
    }

    /// Rows `(n, a_n, l_n, M_{a_{n-1}+1})`.
    pub fn rows(&self) -> Vec<(usize, usize, usize, f64)> {
        (1..=self.blocks()).map(|n| (n, self.a[n], self.l[n - 1], self.weights[self.a[n - 1]])).collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["n", "a_n", "l_n", "M_a_prev_plus_1"])?;
        for (n, a, l, m) in self.rows() {
            w.write_record([n.to_string(), a.to_string(), l.to_string(), format_float(m)])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn block_cap(weights: &[f64], a_prev: usize, n: usize) -> usize {
    weights[a_prev].powf(0.25).min((n as f64).powf(0.25)).floor() as usize
}

/// Greedy blocks `l_n = max(m + 1, l_{n-1}, cap_n)`, until `a_n >= N`.
#[allow(non_snake_case)]
pub fn blocking_scheme(m: usize, M: &[f64], N: usize) -> Result<BlockingScheme> {
    if N < m + 1 {
        return Err(Error::HorizonTooSmall(format!("N = {N} is below m + 1 = {}", m + 1)));
    }
    if M.len() < N {
        return Err(Error::HorizonTooSmall(format!("{} weights for horizon {N}", M.len())));
    }
    if let Some(i) = M.iter().position(|w| !(*w >= 1.0)) {
        return Err(Error::InvalidParameter(format!("M_{} = {} is below 1", i + 1, M[i])));
    }
    if let Some(i) = M.windows(2).position(|w| !(w[1] >= w[0])) {
        return Err(Error::NotMonotone { index: i + 2 });
    }
    let mut a = vec![0usize];
    let mut l: Vec<usize> = Vec::new();
    while *a.last().unwrap() < N {
        let n = l.len() + 1;
        let prev = l.last().copied().unwrap_or(0);
        let ln = (m + 1).max(prev).max(block_cap(M, *a.last().unwrap(), n));
        l.push(ln);
        a.push(a.last().unwrap() + ln);
    }
    Ok(BlockingScheme { m, a, l, weights: M[..N].to_vec() })
}

/// Local payoff `sum_{i = start}^{end} Y_i` with `Y_i = X_i^(i)`, over the
/// window's own coordinates.
fn local_block(start: usize, end: usize) -> Functional {
    let len = end + 1 - start;
    Functional::new(len, move |x| x.iter().enumerate().map(|(j, v)| truncate(*v, (start + j) as f64)).sum())
}

/// `Z_n` or `W_n` as a payoff of `X_1..X_{a_n}`.
pub fn block_sum_functionals(scheme: &BlockingScheme, kind: BlockKind, n: usize) -> Result<Functional> {
    let (start, end) = scheme.window(kind, n)?;
    let horizon = scheme.a[n];
    if start > end {
        return Ok(Functional::constant(horizon, 0.0));
    }
    let local = local_block(start, end);
    Ok(Functional::new(horizon, move |x| local.eval(&x[start - 1..end])))
}

/// `E[f(X_start..X_end)]` computed on the window alone. Exact for the
/// sequence models here: no earlier driver enters the payoff, and later
/// drivers are independent of earlier ones, so the prefix integrates out.
fn windowed_upper(model: &SequenceModel, start: usize, end: usize, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Result<f64> {
    if start > end {
        return Ok(f(0.0));
    }
    upper_expectation(model, &local_block(start, end).map(f))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockingReport {
    pub scheme: BlockingScheme,
    /// `E[Y_i^2]` for `i = 1..=a_K`.
    pub y_second_moments: Vec<f64>,
    /// Partial sums of `E[Z_n^2] / a_n^2` and of the bound
    /// `sum_{i <= a_n} M_i E[Y_i^2] / i^2`, per block.
    pub z_partial: Vec<f64>,
    pub z_bound: Vec<f64>,
    /// Partial sums of `E[W_n^2] / a_n^2` and of `m sum_{i <= a_n} E[Y_i^2] / i^2`.
    pub w_partial: Vec<f64>,
    pub w_bound: Vec<f64>,
    /// `sum_{i <= n} E|W_i|` (an upper bound for `E[sum |W_i|]`) over `a_n`.
    pub w_mean: Vec<f64>,
    /// `n m bE[|X_1|] / a_n` over every block of the scheme.
    pub w_negligibility: Vec<f64>,
    pub invariant_violations: Vec<String>,
    pub z_dominated: bool,
    pub w_dominated: bool,
    /// `w_negligibility` is nonincreasing and ends below where it starts
    /// whenever the block lengths grow.
    pub w_trend_decreasing: bool,
}

impl BlockingReport {
    pub fn passed(&self) -> bool {
        self.invariant_violations.is_empty() && self.z_dominated && self.w_dominated && self.w_trend_decreasing
    }
}

/// Builds `M` from `s_i = E[Y_i^2] / i^2` of an exact model, constructs the
/// scheme over `N` indices, and checks the Z and W chains on the first
/// `max_blocks` blocks.
#[allow(non_snake_case)]
pub fn blocking_report(model: &SequenceModel, N: usize, max_blocks: usize) -> Result<BlockingReport> {
    let m = model.m();
    // Covers the last block, which may run past N.
    let y_len = N + 2 * (m + 1) + (N as f64).powf(0.25) as usize + 2;
    let mut y_second_moments = Vec::with_capacity(y_len);
    for i in 1..=y_len {
        let c = i as f64;
        y_second_moments.push(upper_expectation(model, &Functional::coordinate(1, 0).map(move |v| truncate(v, c).powi(2)))?);
    }
    let s: Vec<f64> = y_second_moments.iter().enumerate().map(|(i, e)| e / ((i + 1) as f64).powi(2)).collect();
    let weights = build_weights_M(&s)?;
    let scheme = blocking_scheme(m, &weights, N)?;
    // Exact models are bounded, so bE|X_1| = E|X_1|.
    let abs_first = upper_expectation(model, &Functional::coordinate(1, 0).map(f64::abs))?;

    let blocks = scheme.blocks().min(max_blocks);
    let (mut z_acc, mut w_acc, mut w_abs) = (0.0, 0.0, 0.0);
    let (mut z_partial, mut z_bound, mut w_partial, mut w_bound, mut w_mean) = (vec![], vec![], vec![], vec![], vec![]);
    for n in 1..=blocks {
        let an = scheme.a[n] as f64;
        let (zs, ze) = scheme.window(BlockKind::Z, n)?;
        let (ws, we) = scheme.window(BlockKind::W, n)?;
        z_acc += windowed_upper(model, zs, ze, |v| v * v)? / (an * an);
        w_acc += windowed_upper(model, ws, we, |v| v * v)? / (an * an);
        w_abs += windowed_upper(model, ws, we, f64::abs)?;
        z_partial.push(z_acc);
        w_partial.push(w_acc);
        let upto = scheme.a[n];
        let zb: f64 = (1..=upto).map(|i| weights[i - 1] * s[i - 1]).sum();
        let wb: f64 = m as f64 * s[..upto].iter().sum::<f64>();
        z_bound.push(zb);
        w_bound.push(wb);
        w_mean.push(w_abs / an);
    }
    let w_negligibility = scheme.w_negligibility_bound(abs_first);
    let slack = 1e-12;
    let z_dominated = z_partial.iter().zip(&z_bound).all(|(z, b)| *z <= b + slack);
    let w_dominated = w_partial.iter().zip(&w_bound).all(|(w, b)| *w <= b + slack)
        && w_mean.iter().zip(&w_negligibility).all(|(w, b)| *w <= b + slack);
    let w_trend_decreasing = scheme.w_trend_decreasing(abs_first);
    Ok(BlockingReport {
        invariant_violations: scheme.invariant_violations(),
        scheme,
        y_second_moments,
        z_partial,
        z_bound,
        w_partial,
        w_bound,
        w_mean,
        w_negligibility,
        z_dominated,
        w_dominated,
        w_trend_decreasing,
    })
}

/// Greedy `n_1 = 1`, `n_{k+1} = min{n : a_n >= lambda a_{n_k}}` (one-based),
/// certifying `a_{n_{k+1}} <= lambda^3 a_{n_k + 1}` for every step.
pub fn geometric_subsequence(a: &[f64], lambda: f64) -> Result<Vec<usize>> {
    if !(lambda > 1.0) {
        return Err(Error::InvalidParameter(format!("lambda = {lambda} must exceed 1")));
    }
    if a.first().is_some_and(|&a1| !(a1 > 0.0)) {
        return Err(Error::InvalidParameter("a_1 must be positive".into()));
    }
    if let Some(i) = a.windows(2).position(|w| !(w[1] >= w[0])) {
        return Err(Error::NotMonotone { index: i + 2 });
    }
    let mut out = vec![1usize];
    if a.is_empty() {
        return Err(Error::HorizonExhausted { found: 0 });
    }
    loop {
        let nk = *out.last().unwrap();
        let target = lambda * a[nk - 1];
        let Some(offset) = a[nk..].iter().position(|&v| v >= target) else { break };
        let next = nk + offset + 1;
        let bound = lambda.powi(3) * a[nk];
        if a[next - 1] > bound {
            return Err(Error::BoundViolated { n_k: nk, next: a[next - 1], bound });
        }
        out.push(next);
    }
    if out.len() < 2 {
        return Err(Error::HorizonExhausted { found: out.len() });
    }
    Ok(out)
}
