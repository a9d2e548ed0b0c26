use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("password space must contain at least one password")]
    EmptySpace,
    #[error("duplicate password {0:?}")]
    DuplicatePassword(String),
    #[error("password {0:?} is not in the password space")]
    UnknownPassword(String),
    #[error("no password in the preference list is allowed by the policy")]
    NoAllowedPassword,
    #[error("the policy allows no probability mass")]
    ZeroMassPolicy,
    #[error("operation requires {expected} rules, got {actual}")]
    InvalidMode {
        expected: &'static str,
        actual: &'static str,
    },
    #[error("{m} rules exceed the exhaustive-search limit of {limit}")]
    TooManyRules { m: usize, limit: usize },
    #[error("k = {k} exceeds the configured limit of {limit}")]
    KTooLarge { k: usize, limit: usize },
    #[error("distribution has no mass")]
    EmptyDistribution,
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("no feasible policy exists for this instance")]
    NoFeasiblePolicy,
    #[error("draw budget of {budget} samples exhausted")]
    OracleExhausted { budget: u64 },
    #[error("rule set requires a dictionary but none was supplied")]
    MissingDictionary,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invariant violated: {0}")]
    InvariantViolation(String),
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("dataset {0} contains no passwords")]
    EmptyDataset(PathBuf),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
