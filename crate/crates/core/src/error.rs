use thiserror::Error;

/// Failure of a single black-box evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("evaluation failure: non-finite output")]
    NonFinite,
    #[error("evaluation budget exhausted")]
    BudgetExhausted,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("nothing to degenerate: problem has no constraints")]
    NothingToDegenerate,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("singular LM system")]
    SingularLmSystem,
    #[error("non-finite input to linear solve")]
    NonFiniteInput,
    #[error("unknown problem `{0}`")]
    UnknownProblem(String),
    #[error("unknown {kind} `{value}`")]
    UnknownMode { kind: &'static str, value: String },
    #[error("empty record set")]
    EmptyRecords,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("malformed data: {0}")]
    Malformed(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
