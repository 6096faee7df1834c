use thiserror::Error;

/// Failure while evaluating a constraint formula.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("attribute `{0}` has no value")]
    MissingAttribute(String),
    #[error("unknown symbol `{0}`")]
    UnknownSymbol(String),
}

/// Failure of a configuration analysis (validity, enumeration, propagation).
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalysisError {
    #[error("model has {features} features; exhaustive analysis is limited to {limit}")]
    TooLarge { features: usize, limit: usize },
    #[error(transparent)]
    Eval(#[from] EvalError),
}
