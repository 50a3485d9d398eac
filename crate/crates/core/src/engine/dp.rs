//! Full-history backward induction.
//!
//! `v_T(e_1..e_T) = payoff`, `v_t(prefix) = max_j E_{Q_j}[v_{t+1}(prefix, .)]`.
//! The last driver is innermost, so each coordinate is independent of the ones
//! before it. Cost is `s^T` leaf evaluations.

use rayon::prelude::*;

use super::model::DriverSpace;
use crate::error::{Error, Result};

/// Default cap on `s^T` for full-history recursion.
pub const DEFAULT_LEAF_CAP: f64 = (1u64 << 26) as f64;

/// Below this many leaves the recursion stays on the calling thread.
const PARALLEL_LEAVES: f64 = 65536.0;

/// Leaf payoff over driver values; the second argument is scratch space.
pub(crate) type LeafFn<'a> = dyn Fn(&[f64], &mut Vec<f64>) -> f64 + Sync + 'a;

pub(crate) fn leaf_count(space: &DriverSpace, drivers: usize) -> f64 {
    (space.support_size() as f64).powi(drivers as i32)
}

pub(crate) fn full_history(space: &DriverSpace, drivers: usize, leaf: &LeafFn<'_>, cap: f64) -> Result<f64> {
    let leaves = leaf_count(space, drivers);
    if leaves > cap {
        return Err(Error::HorizonCap { leaves, cap });
    }
    if drivers == 0 {
        return Ok(leaf(&[], &mut Vec::new()));
    }
    let s = space.support_size();
    let children: Vec<f64> = if leaves >= PARALLEL_LEAVES {
        // Children are reduced by law index in a fixed order, so the result
        // does not depend on how rayon schedules the subtrees.
        space
            .values
            .par_iter()
            .map(|&v| {
                let mut buf = Vec::with_capacity(drivers);
                buf.push(v);
                let mut scratch = Vec::new();
                recurse(space, drivers, &mut buf, &mut scratch, leaf)
            })
            .collect()
    } else {
        let mut buf = Vec::with_capacity(drivers);
        let mut scratch = Vec::new();
        (0..s)
            .map(|d| {
                buf.push(space.values[d]);
                let v = recurse(space, drivers, &mut buf, &mut scratch, leaf);
                buf.pop();
                v
            })
            .collect()
    };
    Ok(space.best_law(&children).1)
}

fn recurse(space: &DriverSpace, total: usize, buf: &mut Vec<f64>, scratch: &mut Vec<f64>, leaf: &LeafFn<'_>) -> f64 {
    if buf.len() == total {
        return leaf(buf, scratch);
    }
    let s = space.support_size();
    let mut children = [0.0f64; 16];
    let mut heap;
    let child: &mut [f64] = if s <= 16 {
        &mut children[..s]
    } else {
        heap = vec![0.0; s];
        &mut heap
    };
    for (d, slot) in child.iter_mut().enumerate() {
        buf.push(space.values[d]);
        *slot = recurse(space, total, buf, scratch, leaf);
        buf.pop();
    }
    space.best_law(child).1
}
