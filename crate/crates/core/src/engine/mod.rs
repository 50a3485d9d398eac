//! Exact upper and lower expectations of functionals of Peng-independent
//! driver sequences.
//!
//! [`upper_expectation`] picks the cheapest exact recursion for the payoff:
//! the additive recursion for linear sums, a lattice-state recursion for
//! payoffs of partial sums, and full-history backward induction otherwise.
//! All three agree with the strategy-enumeration oracle in [`oracle`].

mod checks;
mod compressed;
mod dp;
mod expr;
mod functional;
mod lp;
mod model;
mod oracle;
mod strategy;

use serde::Serialize;

pub use checks::{
    check_block_independence, check_identity_in_distribution, check_independent_bounded_additivity,
    check_m_dependence, check_sublinear_axioms, random_bounded_functional, BlockPayoff, CheckReport, Violation,
};
pub use compressed::DEFAULT_STATE_CAP;
pub use dp::DEFAULT_LEAF_CAP;
pub use expr::Expr;
pub use functional::{CrossingSpec, Deviation, Functional, LipschitzMeta, Payoff, ScalarMap, BOUNDARY_TOL};
pub use model::{DriverSpace, ModelKind, SequenceModel, WindowFn};
pub use oracle::{OracleMethod, OracleResult, DEFAULT_STRATEGY_CAP};
pub use strategy::{
    strategy_measure_estimate, strategy_measure_expectation, AdversaryStrategy, LawChoice, McEstimate, PolicyFn,
};

pub(crate) use compressed::Lattice;
pub(crate) use functional::Structure;
pub(crate) use strategy::PathSimulator;

use crate::error::{Error, Result};
use compressed::{CrossingStat, MaxDeviationStat, SumStat};

/// `(upper, lower)` expectation of one payoff.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExpectationPair {
    pub upper: f64,
    pub lower: f64,
}

/// Resource caps for the exact recursions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EngineLimits {
    /// Cap on `s^T` leaves for full-history recursion.
    pub leaf_cap: f64,
    /// Cap on the total number of compressed states.
    pub state_cap: usize,
}

impl Default for EngineLimits {
    fn default() -> Self {
        Self { leaf_cap: DEFAULT_LEAF_CAP, state_cap: DEFAULT_STATE_CAP }
    }
}

/// Observable values of every window code, on a lattice when one exists.
fn lattice_of(model: &SequenceModel, space: &DriverSpace) -> (Vec<f64>, Option<Lattice>) {
    let table = model.window_table(space);
    let lattice = Lattice::detect(&table);
    (table, lattice)
}

pub fn upper_expectation(model: &SequenceModel, phi: &Functional) -> Result<f64> {
    upper_expectation_with(model, phi, EngineLimits::default())
}

pub fn upper_expectation_with(model: &SequenceModel, phi: &Functional, limits: EngineLimits) -> Result<f64> {
    let space = model.require_exact()?;
    let n = phi.horizon();
    if n == 0 {
        return Err(Error::HorizonMismatch { functional: 0, model: model.drivers_for(0) });
    }
    let m = model.m();
    let full = |cap: f64| -> Result<f64> {
        dp::full_history(
            &space,
            model.drivers_for(n),
            &|drivers: &[f64], scratch: &mut Vec<f64>| {
                model.observables_into(drivers, scratch);
                phi.eval(scratch)
            },
            cap,
        )
    };
    let compressed = |lattice: &Lattice, stat: &dyn Fn(&Lattice) -> Result<f64>| -> Result<f64> {
        match stat(lattice) {
            Err(Error::StateSpaceCap { states, cap }) => {
                if dp::leaf_count(&space, model.drivers_for(n)) <= limits.leaf_cap {
                    full(limits.leaf_cap)
                } else {
                    Err(Error::StateSpaceCap { states, cap })
                }
            }
            other => other,
        }
    };
    match &phi.structure {
        Structure::Linear { scale, offset } => {
            if *scale == 0.0 {
                return Ok(*offset);
            }
            let table = model.window_table(&space);
            let all = compressed::linear_all(&space, &table, m, n, *scale);
            Ok(all[n - 1] + offset)
        }
        Structure::OfSum(f) => {
            let (_, lattice) = lattice_of(model, &space);
            match lattice {
                Some(l) => compressed(&l, &|l| {
                    compressed::state_dp(&space, l, m, n, &SumStat(f.clone()), limits.state_cap)
                }),
                None => full(limits.leaf_cap),
            }
        }
        Structure::Crossing { spec, hit, miss } => {
            let (_, lattice) = lattice_of(model, &space);
            match lattice {
                Some(l) => compressed(&l, &|l| {
                    let stat = CrossingStat { spec: spec.clone(), hit: *hit, miss: *miss };
                    compressed::state_dp(&space, l, m, n, &stat, limits.state_cap)
                }),
                None => full(limits.leaf_cap),
            }
        }
        Structure::MaxDeviation { centers, then } => {
            let (_, lattice) = lattice_of(model, &space);
            match lattice {
                Some(l) => compressed(&l, &|l| {
                    let stat = MaxDeviationStat { centers: centers.clone(), then: then.clone() };
                    compressed::state_dp(&space, l, m, n, &stat, limits.state_cap)
                }),
                None => full(limits.leaf_cap),
            }
        }
        Structure::Opaque => full(limits.leaf_cap),
    }
}

/// `-E[-phi]`.
pub fn lower_expectation(model: &SequenceModel, phi: &Functional) -> Result<f64> {
    lower_expectation_with(model, phi, EngineLimits::default())
}

pub fn lower_expectation_with(model: &SequenceModel, phi: &Functional, limits: EngineLimits) -> Result<f64> {
    Ok(-upper_expectation_with(model, &phi.neg(), limits)?)
}

pub fn expectation_pair(model: &SequenceModel, phi: &Functional) -> Result<ExpectationPair> {
    let upper = upper_expectation(model, phi)?;
    let lower = lower_expectation(model, phi)?;
    if lower > upper + 1e-12 {
        return Err(Error::InvariantViolation(format!("lower expectation {lower} exceeds upper {upper}")));
    }
    Ok(ExpectationPair { upper, lower })
}

/// `E[scale * S_n]` for every `n` in `1..=n_max`, by the additive recursion.
pub fn upper_linear_sequence(model: &SequenceModel, n_max: usize, scale: f64) -> Result<Vec<f64>> {
    let space = model.require_exact()?;
    let table = model.window_table(&space);
    Ok(compressed::linear_all(&space, &table, model.m(), n_max, scale))
}

fn strategy_tree<'a>(model: &SequenceModel, space: &'a DriverSpace, phi: &Functional) -> oracle::StrategyTree<'a> {
    let drivers = model.drivers_for(phi.horizon());
    oracle::StrategyTree::new(space, drivers, &|d: &[f64]| phi.eval(&model.observables(d)))
}

/// Maximum of `E_P[phi]` over every deterministic adaptive strategy, by
/// exhaustive enumeration with the default cap.
pub fn oracle_upper_expectation(model: &SequenceModel, phi: &Functional) -> Result<f64> {
    oracle_upper_expectation_with_cap(model, phi, DEFAULT_STRATEGY_CAP).map(|r| r.value)
}

pub fn oracle_upper_expectation_with_cap(model: &SequenceModel, phi: &Functional, cap: f64) -> Result<OracleResult> {
    let space = model.require_exact()?;
    strategy_tree(model, &space, phi).exhaustive(cap)
}

/// Same maximum over strategies, solved as the sequence-form linear program.
pub fn oracle_upper_expectation_lp(model: &SequenceModel, phi: &Functional) -> Result<OracleResult> {
    let space = model.require_exact()?;
    strategy_tree(model, &space, phi).sequence_form()
}

/// Exhaustive enumeration when at most `10^6` strategies exist, the linear
/// program otherwise.
pub fn oracle_upper_expectation_auto(model: &SequenceModel, phi: &Functional) -> Result<OracleResult> {
    let space = model.require_exact()?;
    let tree = strategy_tree(model, &space, phi);
    if tree.strategy_count() <= 1e6 {
        tree.exhaustive(1e6)
    } else {
        tree.sequence_form()
    }
}
