use crate::precision::Format;
use std::path::PathBuf;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown precision format `{0}` (expected half, single, double or quad)")]
    UnknownFormat(String),

    #[error("precisions must satisfy uf >= u >= ur, got ({uf}, {u}, {ur})")]
    PrecisionOrder { uf: Format, u: Format, ur: Format },

    #[error("{what}: dimension mismatch (expected {expected}, found {found})")]
    DimensionMismatch { what: &'static str, expected: usize, found: usize },

    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("exact zero pivot in column {column} during LU factorization")]
    ExactZeroPivot { column: usize },

    #[error("division by zero diagonal entry at index {index} in triangular solve")]
    ZeroDiagonal { index: usize },

    #[error("matrix is rank deficient (column {column} of the QR factor is negligible)")]
    RankDeficient { column: usize },

    #[error("QR iteration failed to converge after {sweeps} sweeps")]
    NoConvergence { sweeps: usize },

    #[error("generalized eigenproblem has a numerically singular right-hand matrix")]
    SingularB,

    #[error("matrix is singular to working precision")]
    Singular,

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("unsupported Matrix Market field `{0}`")]
    UnsupportedField(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("empty problem set")]
    EmptyProblemSet,

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Serialize(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
