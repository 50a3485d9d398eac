//! Checkers for the defining identities of the sub-linear expectation.

use std::collections::HashMap;
use std::ops::RangeInclusive;
use std::sync::Arc;

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::Serialize;

use super::functional::Functional;
use super::model::SequenceModel;
use super::{lower_expectation, oracle_upper_expectation_auto, upper_expectation};
use crate::error::{Error, Result};
use crate::measures::path_stream;

const AXIOM_TOL: f64 = 1e-12;
const IDENTITY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub property: String,
    pub detail: String,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub name: String,
    /// Number of individual comparisons made.
    pub checked: usize,
    pub max_deviation: f64,
    pub violations: Vec<Violation>,
}

impl CheckReport {
    fn new(name: &str) -> Self {
        Self { name: name.into(), checked: 0, max_deviation: 0.0, violations: Vec::new() }
    }

    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    /// Records `lhs <= rhs + tol`.
    fn at_most(&mut self, property: &str, detail: impl FnOnce() -> String, lhs: f64, rhs: f64, tol: f64) {
        self.checked += 1;
        let excess = lhs - rhs;
        self.max_deviation = self.max_deviation.max(excess.max(0.0));
        if excess > tol {
            self.violations.push(Violation { property: property.into(), detail: detail(), lhs, rhs });
        }
    }

    /// Records `|lhs - rhs| <= tol`.
    fn equal(&mut self, property: &str, detail: impl FnOnce() -> String, lhs: f64, rhs: f64, tol: f64) {
        self.checked += 1;
        let dev = (lhs - rhs).abs();
        self.max_deviation = self.max_deviation.max(dev);
        if dev > tol {
            self.violations.push(Violation { property: property.into(), detail: detail(), lhs, rhs });
        }
    }
}

/// A bounded payoff with values in `[-1, 1]` drawn from a hash of the
/// observable tuple, so distinct support tuples get unrelated values.
pub fn random_bounded_functional(horizon: usize, seed: u64) -> Functional {
    Functional::new(horizon, move |x| {
        let mut h = seed ^ 0x9E37_79B9_7F4A_7C15;
        for v in x {
            h = splitmix(h ^ v.to_bits());
        }
        (h >> 11) as f64 / (1u64 << 52) as f64 - 1.0
    })
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Monotonicity, constant preservation, sub-additivity, positive
/// homogeneity, translation and the difference inequality, on `pairs` random
/// pairs drawn from `test_phis`.
pub fn check_sublinear_axioms(
    model: &SequenceModel,
    test_phis: &[Functional],
    pairs: usize,
    seed: u64,
) -> Result<CheckReport> {
    let mut report = CheckReport::new("sublinear_axioms");
    if test_phis.is_empty() {
        return Ok(report);
    }
    let mut rng = path_stream(seed, 0);
    let mut cache: HashMap<usize, f64> = HashMap::new();
    let mut upper_of = |i: usize| -> Result<f64> {
        if let Some(v) = cache.get(&i) {
            return Ok(*v);
        }
        let v = upper_expectation(model, &test_phis[i])?;
        cache.insert(i, v);
        Ok(v)
    };
    for _ in 0..pairs {
        let i = rng.random_range(0..test_phis.len());
        let j = rng.random_range(0..test_phis.len());
        let (phi, psi) = (&test_phis[i], &test_phis[j]);
        if phi.horizon() != psi.horizon() {
            return Err(Error::HorizonMismatch { functional: psi.horizon(), model: phi.horizon() });
        }
        let n = phi.horizon();
        let (ep, eq) = (upper_of(i)?, upper_of(j)?);
        let c: f64 = rng.random_range(-3.0..3.0);
        let lambda: f64 = *[0.5, 2.0, 3.0].choose(&mut rng).unwrap() * rng.random_range(0.5..1.5);
        let tag = || format!("phi #{i}, psi #{j}");

        let dominating = psi.zip_with(phi, |a, b| b + a.abs());
        report.at_most("monotonicity", tag, ep, upper_expectation(model, &dominating)?, AXIOM_TOL);

        report.equal("constant_preserving", || format!("c = {c}"), upper_expectation(model, &Functional::constant(n, c))?, c, AXIOM_TOL);

        let sum = phi.zip_with(psi, |a, b| a + b);
        report.at_most("sub_additivity", tag, upper_expectation(model, &sum)?, ep + eq, AXIOM_TOL);

        let scaled = phi.opaque().scale(lambda);
        report.equal("positive_homogeneity", || format!("phi #{i}, lambda = {lambda}"), upper_expectation(model, &scaled)?, lambda * ep, AXIOM_TOL);

        let shifted = phi.opaque().shift(c);
        report.equal("translation", || format!("phi #{i}, c = {c}"), upper_expectation(model, &shifted)?, ep + c, AXIOM_TOL);

        let diff = phi.zip_with(psi, |a, b| a - b);
        report.at_most("difference", tag, ep - eq, upper_expectation(model, &diff)?, AXIOM_TOL);
    }
    Ok(report)
}

/// `E[S_n] = n E[X_1]` and `e[S_n] = n e[X_1]` for bounded i.i.d. models. The
/// sum is evaluated by full-history recursion, not the additive recursion,
/// so the identity is actually tested.
pub fn check_independent_bounded_additivity(model: &SequenceModel, n: usize) -> Result<CheckReport> {
    if !model.is_iid() {
        return Err(Error::InvalidParameter("bounded additivity is checked on i.i.d. models".into()));
    }
    let mut report = CheckReport::new("independent_bounded_additivity");
    let sum = Functional::sum(n).opaque();
    let first = Functional::coordinate(1, 0);
    let nf = n as f64;
    report.equal("upper", || format!("n = {n}"), upper_expectation(model, &sum)?, nf * upper_expectation(model, &first)?, IDENTITY_TOL);
    report.equal("lower", || format!("n = {n}"), lower_expectation(model, &sum)?, nf * lower_expectation(model, &first)?, IDENTITY_TOL);
    Ok(report)
}

/// `E_A[phi(X_1..X_n)] = E_B[phi(X_{1+p}..X_{n+p})]` for every test payoff.
pub fn check_identity_in_distribution(
    model_a: &SequenceModel,
    model_b: &SequenceModel,
    p: usize,
    n: usize,
    test_phis: &[Functional],
) -> Result<CheckReport> {
    let mut report = CheckReport::new("identity_in_distribution");
    for (i, phi) in test_phis.iter().enumerate() {
        if phi.horizon() != n {
            return Err(Error::HorizonMismatch { functional: phi.horizon(), model: n });
        }
        let lhs = upper_expectation(model_a, &phi.opaque())?;
        let inner = phi.clone();
        let shifted = Functional::new(n + p, move |x| inner.eval(&x[p..]));
        let rhs = upper_expectation(model_b, &shifted)?;
        report.equal("shift", || format!("phi #{i}, p = {p}"), lhs, rhs, IDENTITY_TOL);
    }
    Ok(report)
}

/// Payoff `phi(x-block, y-block)`.
pub type BlockPayoff = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;

/// Checks `E[phi(X_x, X_y)] = E[psi(X_x)]` with `psi(x) = E[phi(x, X_y)]`, for
/// one-based index blocks `x` before `y`. Both sides are computed by the
/// strategy oracle, never by the backward induction that implements the
/// nesting.
pub fn check_block_independence(
    model: &SequenceModel,
    x: RangeInclusive<usize>,
    y: RangeInclusive<usize>,
    test_phis: &[BlockPayoff],
) -> Result<CheckReport> {
    let (x0, x1, y0, y1) = (*x.start(), *x.end(), *y.start(), *y.end());
    if x0 == 0 || x0 > x1 || y0 > y1 || x1 >= y0 {
        return Err(Error::InvalidParameter(format!("blocks {x0}..={x1} and {y0}..={y1} must be ordered and disjoint")));
    }
    let space = model.require_exact()?;
    let horizon = y1;

    // Every value the x-block can take.
    let x_drivers = model.drivers_for(x1);
    let s = space.support_size();
    let mut x_values: Vec<Vec<f64>> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    let mut drivers = vec![0.0; x_drivers];
    for code in 0..s.pow(x_drivers as u32) {
        let mut c = code;
        for slot in drivers.iter_mut().rev() {
            *slot = space.values[c % s];
            c /= s;
        }
        let obs = model.observables(&drivers);
        let block = obs[x0 - 1..x1].to_vec();
        if seen.insert(bits(&block)) {
            x_values.push(block);
        }
    }

    let mut report = CheckReport::new("block_independence");
    for (i, phi) in test_phis.iter().enumerate() {
        let f = phi.clone();
        let joint = Functional::new(horizon, move |o| f(&o[x0 - 1..x1], &o[y0 - 1..y1]));
        let lhs = oracle_upper_expectation_auto(model, &joint)?.value;

        let mut psi: HashMap<Vec<u64>, f64> = HashMap::new();
        for xv in &x_values {
            let f = phi.clone();
            let fixed = xv.clone();
            let inner = Functional::new(horizon, move |o| f(&fixed, &o[y0 - 1..y1]));
            psi.insert(bits(xv), oracle_upper_expectation_auto(model, &inner)?.value);
        }
        let nested = Functional::new(x1, move |o| psi[&bits(&o[x0 - 1..x1])]);
        let rhs = oracle_upper_expectation_auto(model, &nested)?.value;
        report.equal("nested_identity", || format!("phi #{i}, x = {x0}..={x1}, y = {y0}..={y1}"), lhs, rhs, IDENTITY_TOL);
    }
    Ok(report)
}

fn bits(v: &[f64]) -> Vec<u64> {
    v.iter().map(|x| x.to_bits()).collect()
}

/// `(X_{n+m+1}..X_{n+j})` independent of `(X_1..X_n)`.
pub fn check_m_dependence(model: &SequenceModel, n: usize, j: usize, test_phis: &[BlockPayoff]) -> Result<CheckReport> {
    let m = model.m();
    if j < m + 1 {
        return Err(Error::InvalidParameter(format!("j = {j} must be at least m + 1 = {}", m + 1)));
    }
    let mut report = check_block_independence(model, 1..=n, n + m + 1..=n + j, test_phis)?;
    report.name = "m_dependence".into();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::WindowFn;
    use crate::measures::AmbiguitySet;

    fn mixed_payoffs() -> Vec<BlockPayoff> {
        vec![
            Arc::new(|x: &[f64], y: &[f64]| -(y[0] - x[0]).powi(2)),
            Arc::new(|x: &[f64], y: &[f64]| x[0] * y.iter().sum::<f64>() - y[0]),
            Arc::new(|x: &[f64], y: &[f64]| if x[0] > 0.2 { y[0] } else { -y[0] }),
        ]
    }

    #[test]
    fn axioms_hold_on_random_payoffs() {
        let model = SequenceModel::iid(AmbiguitySet::bernoullis(&[0.3, 0.7]).unwrap());
        let phis: Vec<Functional> = (0..8).map(|s| random_bounded_functional(3, s)).collect();
        let report = check_sublinear_axioms(&model, &phis, 40, 1).unwrap();
        assert!(report.passed(), "{:?}", report.violations);
    }

    #[test]
    fn moving_average_gap_and_no_gap() {
        let model = SequenceModel::moving_window(1, AmbiguitySet::bernoullis(&[0.3, 0.7]).unwrap(), WindowFn::Mean);
        let with_gap = check_m_dependence(&model, 1, 2, &mixed_payoffs()).unwrap();
        assert!(with_gap.passed(), "{:?}", with_gap.violations);
        let adjacent = check_block_independence(&model, 1..=1, 2..=2, &mixed_payoffs()).unwrap();
        assert!(!adjacent.passed());
    }

    #[test]
    fn identity_in_distribution_reports_designed_failure() {
        let a = SequenceModel::iid(AmbiguitySet::bernoullis(&[0.3]).unwrap());
        let b = SequenceModel::iid(AmbiguitySet::bernoullis(&[0.5]).unwrap());
        let r = check_identity_in_distribution(&a, &b, 0, 1, &[Functional::coordinate(1, 0)]).unwrap();
        assert!(!r.passed());
        assert!((r.max_deviation - 0.2).abs() < 1e-12);
    }

    #[test]
    fn bounded_additivity_on_two_bernoullis() {
        let model = SequenceModel::iid(AmbiguitySet::bernoullis(&[0.3, 0.7]).unwrap());
        assert!(check_independent_bounded_additivity(&model, 3).unwrap().passed());
    }
}
