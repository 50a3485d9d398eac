//! Dense tableau simplex for `max c.y  s.t.  A y = b, y >= 0`, started from a
//! caller-supplied feasible basis. Bland's rule keeps degenerate problems from
//! cycling; the sizes used here are a few hundred rows at most.

use crate::error::{Error, Result};

const REDUCED_COST_TOL: f64 = 1e-12;
const PIVOT_TOL: f64 = 1e-12;
const MAX_PIVOTS: usize = 200_000;

pub(crate) struct LpSolution {
    pub objective: f64,
    pub x: Vec<f64>,
}

/// `a` is row-major `rows x cols`; `basis[i]` is the basic column of row `i`.
pub(crate) fn maximize(
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    c: &[f64],
    mut basis: Vec<usize>,
) -> Result<LpSolution> {
    let rows = a.len();
    let cols = c.len();
    let mut t: Vec<Vec<f64>> = a
        .into_iter()
        .zip(b)
        .map(|(mut row, rhs)| {
            row.push(rhs);
            row
        })
        .collect();

    for i in 0..rows {
        let col = basis[i];
        if t[i][col].abs() < PIVOT_TOL {
            return Err(Error::LinearProgram(format!("initial basis is singular at row {i}")));
        }
        pivot(&mut t, i, col);
    }
    if t.iter().any(|row| row[cols] < -1e-9) {
        return Err(Error::LinearProgram("initial basis is infeasible".into()));
    }

    for _ in 0..MAX_PIVOTS {
        let entering = (0..cols).find(|&j| {
            let z: f64 = (0..rows).map(|i| c[basis[i]] * t[i][j]).sum();
            c[j] - z > REDUCED_COST_TOL
        });
        let Some(e) = entering else {
            let mut x = vec![0.0; cols];
            for (i, &col) in basis.iter().enumerate() {
                x[col] = t[i][cols].max(0.0);
            }
            let objective = c.iter().zip(&x).map(|(ci, xi)| ci * xi).sum();
            return Ok(LpSolution { objective, x });
        };
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..rows {
            if t[i][e] > PIVOT_TOL {
                let ratio = t[i][cols].max(0.0) / t[i][e];
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((r, best)) => {
                        if ratio < best - 1e-15 || (ratio <= best + 1e-15 && basis[i] < basis[r]) {
                            Some((i, ratio))
                        } else {
                            Some((r, best))
                        }
                    }
                };
            }
        }
        let Some((r, _)) = leave else {
            return Err(Error::LinearProgram("objective is unbounded".into()));
        };
        pivot(&mut t, r, e);
        basis[r] = e;
    }
    Err(Error::LinearProgram("pivot limit reached".into()))
}

fn pivot(t: &mut [Vec<f64>], row: usize, col: usize) {
    let p = t[row][col];
    for v in t[row].iter_mut() {
        *v /= p;
    }
    let pivot_row = t[row].clone();
    for (i, r) in t.iter_mut().enumerate() {
        if i == row {
            continue;
        }
        let f = r[col];
        if f != 0.0 {
            for (v, pv) in r.iter_mut().zip(&pivot_row) {
                *v -= f * pv;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_problem() {
        // max 3x + 2y  s.t.  x + y + s1 = 4,  x + 3y + s2 = 6.
        let a = vec![vec![1.0, 1.0, 1.0, 0.0], vec![1.0, 3.0, 0.0, 1.0]];
        let sol = maximize(a, vec![4.0, 6.0], &[3.0, 2.0, 0.0, 0.0], vec![2, 3]).unwrap();
        assert!((sol.objective - 12.0).abs() < 1e-12);
        assert!((sol.x[0] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_start() {
        // max x  s.t.  x - y + s1 = 0,  y + s2 = 1.
        let a = vec![vec![1.0, -1.0, 1.0, 0.0], vec![0.0, 1.0, 0.0, 1.0]];
        let sol = maximize(a, vec![0.0, 1.0], &[1.0, 0.0, 0.0, 0.0], vec![2, 3]).unwrap();
        assert!((sol.objective - 1.0).abs() < 1e-12);
    }
}
