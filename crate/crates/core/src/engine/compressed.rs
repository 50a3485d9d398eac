//! Compressed recursions for partial-sum payoffs.
//!
//! The DP state is the last `m` driver values plus an accumulated statistic.
//! Linear payoffs need no statistic at all (the reward decomposes step by step),
//! giving `O(T * s^(m+1) * k)` work. Nonlinear payoffs of the partial sums keep
//! the sum in the state, which is only done when observables live on a lattice
//! `z / q` so the state stays exact and finite.

use std::collections::HashMap;
use std::hash::Hash;

use super::functional::{CrossingSpec, ScalarMap};
use super::model::DriverSpace;
use crate::error::{Error, Result};

/// Default cap on the total number of compressed states over all layers.
pub const DEFAULT_STATE_CAP: usize = 8_000_000;

const MAX_DENOMINATOR: i64 = 1000;
const LATTICE_TOL: f64 = 1e-9;

/// Observable values expressed in lattice units `1 / denominator`.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Lattice {
    pub denominator: i64,
    /// Units for each window code.
    pub units: Vec<i64>,
}

impl Lattice {
    pub fn detect(values: &[f64]) -> Option<Self> {
        (1..=MAX_DENOMINATOR).find_map(|q| {
            let qf = q as f64;
            let units: Option<Vec<i64>> = values
                .iter()
                .map(|&v| {
                    let scaled = v * qf;
                    let r = scaled.round();
                    ((scaled - r).abs() <= LATTICE_TOL * r.abs().max(1.0) && r.abs() < 1e12).then_some(r as i64)
                })
                .collect();
            units.map(|units| Lattice { denominator: q, units })
        })
    }

    pub fn value(&self, units: i64) -> f64 {
        units as f64 / self.denominator as f64
    }
}

/// `E[scale * S_n]` for every `n` in `1..=n_max`, by the additive recursion.
///
/// `table[code]` is the observable for the full window `code` (`m + 1` digits,
/// most significant first).
pub(crate) fn linear_all(space: &DriverSpace, table: &[f64], m: usize, n_max: usize, scale: f64) -> Vec<f64> {
    let s = space.support_size();
    let full_codes = s.pow(m as u32);
    let mut u = vec![0.0; full_codes];
    let mut next = vec![0.0; full_codes];
    let mut child = vec![0.0; s];
    let mut out = Vec::with_capacity(n_max);
    for _ in 1..=n_max {
        for code in 0..full_codes {
            for d in 0..s {
                let full = code * s + d;
                child[d] = scale * table[full] + u[full % full_codes];
            }
            next[code] = space.best_law(&child).1;
        }
        std::mem::swap(&mut u, &mut next);
        out.push(fill_window(space, m, &u));
    }
    out
}

/// Optimal value over the first `m` drivers, which fill the window without
/// completing an observable, given values `u` on full windows.
fn fill_window(space: &DriverSpace, m: usize, u: &[f64]) -> f64 {
    let s = space.support_size();
    let mut layer = u.to_vec();
    let mut child = vec![0.0; s];
    for depth in (0..m).rev() {
        let codes = s.pow(depth as u32);
        let mut prev = vec![0.0; codes];
        for (code, slot) in prev.iter_mut().enumerate() {
            for d in 0..s {
                child[d] = layer[code * s + d];
            }
            *slot = space.best_law(&child).1;
        }
        layer = prev;
    }
    layer[0]
}

/// Running statistic carried through the compressed state.
pub(crate) trait RunningStat: Sync {
    type State: Clone + Eq + Hash;
    fn initial(&self) -> Self::State;
    /// Absorbs observable number `k` (zero-based) worth `units`.
    fn advance(&self, state: &Self::State, k: usize, units: i64, lattice: &Lattice) -> Self::State;
    fn terminal(&self, state: &Self::State, lattice: &Lattice) -> f64;
}

pub(crate) struct SumStat(pub ScalarMap);

impl RunningStat for SumStat {
    type State = i64;
    fn initial(&self) -> i64 {
        0
    }
    fn advance(&self, state: &i64, _k: usize, units: i64, _l: &Lattice) -> i64 {
        state + units
    }
    fn terminal(&self, state: &i64, lattice: &Lattice) -> f64 {
        (self.0)(lattice.value(*state))
    }
}

pub(crate) struct CrossingStat {
    pub spec: CrossingSpec,
    pub hit: f64,
    pub miss: f64,
}

#[derive(Clone, PartialEq, Eq, Hash)]
pub(crate) enum CrossingState {
    Open(i64),
    Hit,
}

impl RunningStat for CrossingStat {
    type State = CrossingState;
    fn initial(&self) -> CrossingState {
        CrossingState::Open(0)
    }
    fn advance(&self, state: &CrossingState, k: usize, units: i64, lattice: &Lattice) -> CrossingState {
        match state {
            CrossingState::Hit => CrossingState::Hit,
            CrossingState::Open(sum) => {
                let sum = sum + units;
                if self.spec.hits(lattice.value(sum), k) {
                    CrossingState::Hit
                } else {
                    CrossingState::Open(sum)
                }
            }
        }
    }
    fn terminal(&self, state: &CrossingState, _l: &Lattice) -> f64 {
        match state {
            CrossingState::Hit => self.hit,
            CrossingState::Open(_) => self.miss,
        }
    }
}

pub(crate) struct MaxDeviationStat {
    pub centers: Vec<f64>,
    pub then: ScalarMap,
}

impl RunningStat for MaxDeviationStat {
    /// Partial sum in units, running maximum as raw bits.
    type State = (i64, u64);
    fn initial(&self) -> (i64, u64) {
        (0, 0f64.to_bits())
    }
    fn advance(&self, state: &(i64, u64), k: usize, units: i64, lattice: &Lattice) -> (i64, u64) {
        let sum = state.0 + units;
        let dev = (lattice.value(sum) - self.centers[k]).abs();
        (sum, f64::from_bits(state.1).max(dev).to_bits())
    }
    fn terminal(&self, state: &(i64, u64), _l: &Lattice) -> f64 {
        (self.then)(f64::from_bits(state.1))
    }
}

/// Backward induction over `(window code, statistic)` states.
pub(crate) fn state_dp<S: RunningStat>(
    space: &DriverSpace,
    lattice: &Lattice,
    m: usize,
    n_obs: usize,
    stat: &S,
    cap: usize,
) -> Result<f64> {
    let s = space.support_size();
    let window_codes = s.pow(m as u32);
    let drivers = n_obs + m;

    // Forward pass: enumerate reachable states per layer and their successors.
    let mut layers: Vec<Vec<(usize, S::State)>> = vec![vec![(0, stat.initial())]];
    let mut successors: Vec<Vec<usize>> = Vec::with_capacity(drivers);
    let mut total = 1usize;
    for t in 0..drivers {
        let mut index: HashMap<(usize, S::State), usize> = HashMap::new();
        let mut next_states: Vec<(usize, S::State)> = Vec::new();
        let current = &layers[t];
        let mut succ = Vec::with_capacity(current.len() * s);
        for (code, st) in current {
            for d in 0..s {
                let full = code * s + d;
                let key = if t >= m {
                    let k = t - m;
                    (full % window_codes, stat.advance(st, k, lattice.units[full], lattice))
                } else {
                    (full, st.clone())
                };
                let id = *index.entry(key.clone()).or_insert_with(|| {
                    next_states.push(key);
                    next_states.len() - 1
                });
                succ.push(id);
            }
        }
        total += next_states.len();
        if total > cap {
            return Err(Error::StateSpaceCap { states: total, cap });
        }
        successors.push(succ);
        layers.push(next_states);
    }

    // Backward pass.
    let mut values: Vec<f64> = layers[drivers].iter().map(|(_, st)| stat.terminal(st, lattice)).collect();
    let mut child = vec![0.0; s];
    for t in (0..drivers).rev() {
        let succ = &successors[t];
        let mut prev = vec![0.0; layers[t].len()];
        for (i, slot) in prev.iter_mut().enumerate() {
            for d in 0..s {
                child[d] = values[succ[i * s + d]];
            }
            *slot = space.best_law(&child).1;
        }
        values = prev;
    }
    Ok(values[0])
}
