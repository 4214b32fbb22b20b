use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("time index out of range: {0}")]
    Index(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("operation not supported for this disturbance model: {0}")]
    UnsupportedModel(String),
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("run too short: need at least {required} samples, have {actual}")]
    RunTooShort { required: usize, actual: usize },
    #[error("unknown or too short signal '{0}'")]
    Signal(String),
    #[error("formula horizon {horizon} at step {t} exceeds N = {n}")]
    Horizon { horizon: usize, t: usize, n: usize },
    #[error("canonical form too large: {atoms} atom entries exceed the cap of {cap}")]
    FormTooLarge { atoms: usize, cap: usize },
    #[error("infeasible decomposition at {node}: {reason}")]
    InfeasibleDecomposition { node: String, reason: String },
    #[error("cannot certify big-M for {0}: unbounded range")]
    BigM(String),
}
