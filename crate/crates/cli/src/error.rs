use thiserror::Error;

/// Every exit code the binary uses.
pub mod exit {
    pub const OK: i32 = 0;
    /// A hard assertion of the experiment failed.
    pub const ASSERTION_FAILED: i32 = 1;
    /// Bad command line or config.
    pub const CONFIG: i32 = 2;
    /// The model or experiment rejected its inputs or broke an invariant.
    pub const MODEL: i32 = 3;
    /// An exact recursion or oracle hit its resource cap.
    pub const CAP_EXCEEDED: i32 = 4;
    pub const IO: i32 = 5;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("parse error at line {line}, column {column}{}: {message}", field.as_deref().map(|f| format!(" (field {f})")).unwrap_or_default())]
    Parse { line: usize, column: usize, field: Option<String>, message: String },
    #[error("invalid {field}: {message}")]
    Field { field: String, message: String },
    #[error("unknown window function {0:?}; expected identity, mean_window, max_window or affine_window(a,b)")]
    UnknownWindowFn(String),
    #[error("experiment {0} is stochastic and needs a seed")]
    MissingSeed(String),
    #[error("law index {index} out of range for an ambiguity set of {laws} laws")]
    LawIndex { index: usize, laws: usize },
    #[error("target a = {a} exceeds b = {b}")]
    TargetOrder { a: f64, b: f64 },
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Model(#[from] slln_core::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use slln_core::Error as E;
        match self {
            Self::Io(_) | Self::Model(E::Io(_)) => exit::IO,
            Self::Model(E::HorizonCap { .. } | E::StrategySpaceTooLarge { .. } | E::StateSpaceCap { .. }) => {
                exit::CAP_EXCEEDED
            }
            Self::Model(
                E::TargetOrder { .. } | E::TargetOutOfBracket { .. } | E::MuOutOfBand { .. } | E::LawIndexOutOfRange { .. },
            ) => exit::CONFIG,
            Self::Model(_) => exit::MODEL,
            _ => exit::CONFIG,
        }
    }
}
