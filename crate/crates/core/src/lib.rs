//! Exact sub-linear expectations over finite ambiguity sets, and the
//! law-of-large-numbers experiments built on them.
//!
//! The layers, bottom up: [`measures`] (classical laws and ambiguity sets),
//! [`engine`] (upper and lower expectations by backward induction, with an
//! independent strategy-enumeration oracle), [`capacity`] (capacities,
//! Choquet integrals, extended expectations), [`sequences`] (sequence
//! constructors, weight conditions, blocking), and [`lln`] (mean bounds,
//! maximal inequalities and seeded simulation experiments).

pub mod capacity;
pub mod engine;
pub mod error;
pub mod fixtures;
pub mod lln;
pub mod measures;
pub mod report;
pub mod sequences;

pub use error::{Error, Result};
pub use measures::{AmbiguitySet, FiniteDistribution, SamplableDistribution};
pub use engine::{
    expectation_pair, lower_expectation, upper_expectation, AdversaryStrategy, ExpectationPair, Functional,
    SequenceModel, WindowFn,
};
