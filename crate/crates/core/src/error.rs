use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("distribution has empty support")]
    EmptySupport,
    #[error("values and probabilities differ in length ({values} vs {probs})")]
    LengthMismatch { values: usize, probs: usize },
    #[error("negative or non-finite probability {0}")]
    NegativeProb(f64),
    #[error("probabilities sum to {0}, which is not within 1e-9 of 1")]
    NotNormalizable(f64),
    #[error("invalid distribution parameter: {0}")]
    InvalidParameter(String),
    #[error("ambiguity set must contain at least one law")]
    EmptyAmbiguitySet,

    #[error("model is not exact-capable (laws must be finite with a common support)")]
    NotExactCapable,
    #[error("functional horizon {functional} does not match requested horizon {model}")]
    HorizonMismatch { functional: usize, model: usize },
    #[error("full-history recursion needs {leaves} leaves, above the cap of {cap}")]
    HorizonCap { leaves: f64, cap: f64 },
    #[error("strategy space has {count:e} strategies, above the cap of {cap:e}")]
    StrategySpaceTooLarge { count: f64, cap: f64 },
    #[error("compressed state space reached {states} states, above the cap of {cap}")]
    StateSpaceCap { states: usize, cap: usize },
    #[error("law index {index} out of range for an ambiguity set of {laws} laws")]
    LawIndexOutOfRange { index: usize, laws: usize },
    #[error("invariant violated: {0}")]
    InvariantViolation(String),
    #[error("linear program failed: {0}")]
    LinearProgram(String),

    #[error("support is unbounded")]
    UnboundedSupport,
    #[error("quadrature grid too coarse: tail increases from {before} to {after} at t = {at}")]
    GridTooCoarse { at: f64, before: f64, after: f64 },
    #[error("extended expectation did not converge; last iterates {trajectory:?}")]
    NotConverged { trajectory: Vec<f64> },

    #[error("sequence is not nondecreasing at index {index}")]
    NotMonotone { index: usize },
    #[error("weight tail is not summable: {0}")]
    TailNotSummable(String),
    #[error("horizon too small: {0}")]
    HorizonTooSmall(String),
    #[error("block index {index} outside scheme with {blocks} blocks")]
    IndexOutOfScheme { index: usize, blocks: usize },
    #[error("horizon exhausted after {found} subsequence terms")]
    HorizonExhausted { found: usize },
    #[error("subsequence bound violated at n_k = {n_k}: a[n_(k+1)] = {next} > lambda^3 a[n_k + 1] = {bound}")]
    BoundViolated { n_k: usize, next: f64, bound: f64 },

    #[error("mu_{index} = {mu} outside [{lower}, {upper}]")]
    MuOutOfBand { index: usize, mu: f64, lower: f64, upper: f64 },
    #[error("target a = {a}, b = {b} outside the bracket [{lower}, {upper}]")]
    TargetOutOfBracket { a: f64, b: f64, lower: f64, upper: f64 },
    #[error("target a = {a} exceeds b = {b}")]
    TargetOrder { a: f64, b: f64 },
    #[error("no law in the ambiguity set lacks a finite mean")]
    NoHeavyTailLaw,
    #[error("weight condition fails: {0}")]
    WeightConditionFails(String),

    #[error("io: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        Error::Io(err.to_string())
    }
}
