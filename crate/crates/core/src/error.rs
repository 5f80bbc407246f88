use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("matrix ({a},{b},{c}) is not positive semidefinite")]
    NotSemidefinite { a: i64, b: i64, c: i64 },
    #[error("weight mismatch: {0} vs {1}")]
    WeightMismatch(i64, i64),
    #[error("characteristic mismatch: {0} vs {1}")]
    CharMismatch(u64, u64),
    #[error("expected characteristic {expected}, found {found}")]
    WrongChar { expected: u64, found: u64 },
    #[error("truncation bound {have} is below the required {need}")]
    BoundTooSmall { have: usize, need: usize },
    #[error("coefficient is not {p}-integral")]
    NotIntegral { p: u64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("monomial system of weight {weight} mod {p} has rank {rank} < {cols}")]
    RankDeficient { weight: i64, p: u64, rank: usize, cols: usize },
    #[error("expansion is not a modular form of weight {weight} mod {p}")]
    Inconsistent { weight: i64, p: u64 },
    #[error("degenerate construction: {0}")]
    Degenerate(String),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
