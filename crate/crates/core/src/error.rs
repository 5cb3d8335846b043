//! Error type shared by all modules.

use std::fmt;
use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug)]
pub enum Error {
    /// Input dimensions do not satisfy an operation's contract.
    ShapeMismatch { context: String, expected: String, got: String },
    /// A computation produced NaN or Inf.
    NonFinite { context: String },
    /// Invalid configuration value.
    InvalidConfig(String),
    /// A file does not start with the expected magic bytes.
    BadMagic { path: PathBuf, expected: &'static str },
    /// File payload shorter than its header declares.
    TruncatedPayload { path: PathBuf, expected: usize, got: usize },
    /// Malformed file header or metadata.
    BadHeader { path: PathBuf, detail: String },
    /// Required input file absent.
    MissingInput(PathBuf),
    /// Iterative solver aborted.
    SolverAbort { iteration: usize, reason: String },
    Io(std::io::Error),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::ShapeMismatch { context, expected, got } => {
                write!(f, "{context}: expected {expected}, got {got}")
            }
            Error::NonFinite { context } => write!(f, "non-finite value in {context}"),
            Error::InvalidConfig(msg) => write!(f, "invalid config: {msg}"),
            Error::BadMagic { path, expected } => {
                write!(f, "{}: bad magic (expected \"{expected}\")", path.display())
            }
            Error::TruncatedPayload { path, expected, got } => write!(
                f,
                "{}: truncated payload ({got} bytes, header declares {expected})",
                path.display()
            ),
            Error::BadHeader { path, detail } => {
                write!(f, "{}: bad header: {detail}", path.display())
            }
            Error::MissingInput(path) => write!(f, "missing input file: {}", path.display()),
            Error::SolverAbort { iteration, reason } => {
                write!(f, "solver aborted at iteration {iteration}: {reason}")
            }
            Error::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for Error {}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e)
    }
}

pub(crate) fn shape_err(context: &str, expected: impl fmt::Display, got: impl fmt::Display) -> Error {
    Error::ShapeMismatch {
        context: context.to_string(),
        expected: expected.to_string(),
        got: got.to_string(),
    }
}
