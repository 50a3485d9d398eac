//! Payoff expressions as plain data, for configuration files.

use serde::{Deserialize, Serialize};

use super::functional::Functional;
use crate::error::{Error, Result};

/// A payoff over `X_1..X_n`. `Power`, `Affine` and `Compose` act on the value
/// of an inner expression (the partial sum when `of` is omitted).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
pub enum Expr {
    Sum,
    Mean,
    Constant { value: f64 },
    /// `X_index`, one-based.
    Coord { index: usize },
    /// `max_{k <= n} |S_k - k * center|`.
    MaxPartialSumDeviation {
        #[serde(default)]
        center: f64,
    },
    Power {
        k: i32,
        #[serde(default = "sum_box")]
        of: Box<Expr>,
    },
    Affine {
        a: f64,
        b: f64,
        #[serde(default = "sum_box")]
        of: Box<Expr>,
    },
    /// `outer` evaluated on the one-tuple `(inner)`.
    Compose { outer: Box<Expr>, inner: Box<Expr> },
}

fn sum_box() -> Box<Expr> {
    Box::new(Expr::Sum)
}

impl Expr {
    pub fn build(&self, n: usize) -> Result<Functional> {
        if n == 0 {
            return Err(Error::InvalidParameter("payoff horizon must be positive".into()));
        }
        Ok(match self {
            Expr::Sum => Functional::sum(n),
            Expr::Mean => Functional::mean(n),
            Expr::Constant { value } => Functional::constant(n, *value),
            Expr::Coord { index } => {
                if *index == 0 || *index > n {
                    return Err(Error::InvalidParameter(format!("coordinate {index} outside 1..={n}")));
                }
                Functional::coordinate(n, index - 1)
            }
            Expr::MaxPartialSumDeviation { center } => Functional::max_partial_sum_deviation(n, *center),
            Expr::Power { k, of } => {
                let k = *k;
                of.build(n)?.map(move |v| v.powi(k))
            }
            Expr::Affine { a, b, of } => of.build(n)?.affine(*a, *b),
            Expr::Compose { outer, inner } => {
                let outer = outer.build(1)?;
                inner.build(n)?.map(move |v| outer.eval(&[v]))
            }
        })
    }
}
