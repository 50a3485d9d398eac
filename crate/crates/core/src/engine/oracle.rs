//! Strategy-enumeration oracles, independent of the backward induction.
//!
//! An adaptive strategy assigns a law index to every driver history of length
//! `0..T`. Each strategy induces one classical measure, and its expectation is
//! computed by forward enumeration of the driver tree. The exhaustive oracle
//! takes the maximum over all `k^(#histories)` strategies. When that count is
//! too large, the sequence-form linear program over behavioural strategies is
//! solved instead; an optimal vertex is a deterministic strategy, which is
//! extracted and evaluated by the same forward enumeration.

use rayon::prelude::*;

use super::lp;
use super::model::DriverSpace;
use crate::error::{Error, Result};

/// Default cap on the number of enumerated strategies.
pub const DEFAULT_STRATEGY_CAP: f64 = 1e7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleMethod {
    Exhaustive,
    SequenceFormLp,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub value: f64,
    pub method: OracleMethod,
    /// Number of deterministic strategies the value is a maximum over.
    pub strategies: f64,
    /// Law index for each history, in breadth-first order.
    pub best_strategy: Vec<usize>,
}

/// Driver tree with precomputed leaf payoffs.
pub(crate) struct StrategyTree<'a> {
    space: &'a DriverSpace,
    depth: usize,
    offsets: Vec<usize>,
    nodes: usize,
    leaves: Vec<f64>,
}

impl<'a> StrategyTree<'a> {
    /// `leaf` maps driver values to the payoff.
    pub fn new(space: &'a DriverSpace, depth: usize, leaf: &dyn Fn(&[f64]) -> f64) -> Self {
        let s = space.support_size();
        let mut offsets = Vec::with_capacity(depth + 1);
        let mut nodes = 0usize;
        for t in 0..=depth {
            offsets.push(nodes);
            if t < depth {
                nodes += s.pow(t as u32);
            }
        }
        let leaf_total = s.pow(depth as u32);
        let mut drivers = vec![0.0; depth];
        let leaves = (0..leaf_total)
            .map(|code| {
                let mut c = code;
                for slot in (0..depth).rev() {
                    drivers[slot] = space.values[c % s];
                    c /= s;
                }
                leaf(&drivers)
            })
            .collect();
        Self { space, depth, offsets, nodes, leaves }
    }

    #[cfg(test)]
    pub fn node_count(&self) -> usize {
        self.nodes
    }

    pub fn strategy_count(&self) -> f64 {
        (self.space.laws() as f64).powf(self.nodes as f64)
    }

    /// Classical expectation under the measure induced by `choice`.
    pub fn strategy_value(&self, choice: &[usize], reach: &mut Vec<f64>, next: &mut Vec<f64>) -> f64 {
        if self.depth == 0 {
            return self.leaves[0];
        }
        let s = self.space.support_size();
        reach.clear();
        reach.push(1.0);
        let mut total = 0.0;
        for t in 0..self.depth {
            let last = t + 1 == self.depth;
            next.clear();
            for (p, &w) in reach.iter().enumerate() {
                let row = &self.space.probs[choice[self.offsets[t] + p]];
                for d in 0..s {
                    let q = w * row[d];
                    if last {
                        if q != 0.0 {
                            total += q * self.leaves[p * s + d];
                        }
                    } else {
                        next.push(q);
                    }
                }
            }
            std::mem::swap(reach, next);
        }
        total
    }

    pub fn exhaustive(&self, cap: f64) -> Result<OracleResult> {
        let count = self.strategy_count();
        if count > cap {
            return Err(Error::StrategySpaceTooLarge { count, cap });
        }
        let k = self.space.laws();
        let total = count as u64;
        let chunk = 4096u64;
        let chunks = total.div_ceil(chunk);
        let (value, index) = (0..chunks)
            .into_par_iter()
            .map(|c| {
                let start = c * chunk;
                let end = (start + chunk).min(total);
                let mut digits = decode(start, k, self.nodes);
                let mut reach = Vec::new();
                let mut next = Vec::new();
                let mut best = (f64::NEG_INFINITY, start);
                for idx in start..end {
                    let v = self.strategy_value(&digits, &mut reach, &mut next);
                    if v > best.0 {
                        best = (v, idx);
                    }
                    increment(&mut digits, k);
                }
                best
            })
            .reduce(
                || (f64::NEG_INFINITY, u64::MAX),
                |a, b| if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a },
            );
        Ok(OracleResult {
            value,
            method: OracleMethod::Exhaustive,
            strategies: count,
            best_strategy: decode(index, k, self.nodes),
        })
    }

    pub fn sequence_form(&self) -> Result<OracleResult> {
        let count = self.strategy_count();
        if self.depth == 0 {
            return Ok(OracleResult {
                value: self.leaves[0],
                method: OracleMethod::SequenceFormLp,
                strategies: count,
                best_strategy: vec![],
            });
        }
        let s = self.space.support_size();
        let k = self.space.laws();
        let cols = self.nodes * k;
        let mut a = vec![vec![0.0; cols]; self.nodes];
        let mut b = vec![0.0; self.nodes];
        let mut c = vec![0.0; cols];
        b[0] = 1.0;
        for t in 0..self.depth {
            for p in 0..s.pow(t as u32) {
                let h = self.offsets[t] + p;
                for j in 0..k {
                    a[h][h * k + j] = 1.0;
                }
                if t + 1 < self.depth {
                    for d in 0..s {
                        let child = self.offsets[t + 1] + p * s + d;
                        for j in 0..k {
                            a[child][h * k + j] -= self.space.probs[j][d];
                        }
                    }
                } else {
                    for j in 0..k {
                        c[h * k + j] = (0..s)
                            .map(|d| {
                                let q = self.space.probs[j][d];
                                if q == 0.0 { 0.0 } else { q * self.leaves[p * s + d] }
                            })
                            .sum();
                    }
                }
            }
        }
        let basis = (0..self.nodes).map(|h| h * k).collect();
        let sol = lp::maximize(a, b, &c, basis)?;
        let choice: Vec<usize> = (0..self.nodes)
            .map(|h| {
                let row = &sol.x[h * k..(h + 1) * k];
                let mut best = 0;
                for j in 1..k {
                    if row[j] > row[best] {
                        best = j;
                    }
                }
                best
            })
            .collect();
        let value = self.strategy_value(&choice, &mut Vec::new(), &mut Vec::new());
        if (value - sol.objective).abs() > 1e-8 * (1.0 + value.abs()) {
            return Err(Error::LinearProgram(format!(
                "extracted strategy value {value} disagrees with LP objective {}",
                sol.objective
            )));
        }
        Ok(OracleResult { value, method: OracleMethod::SequenceFormLp, strategies: count, best_strategy: choice })
    }
}

fn decode(mut index: u64, k: usize, len: usize) -> Vec<usize> {
    let mut digits = vec![0; len];
    for slot in digits.iter_mut().rev() {
        *slot = (index % k as u64) as usize;
        index /= k as u64;
    }
    digits
}

fn increment(digits: &mut [usize], k: usize) {
    for slot in digits.iter_mut().rev() {
        *slot += 1;
        if *slot < k {
            return;
        }
        *slot = 0;
    }
}
