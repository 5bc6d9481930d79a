//! Error type shared by all modules.

use std::fmt;
use std::path::PathBuf;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, PodError>;

/// Failure modes of the reduction pipeline.
#[derive(Debug)]
pub enum PodError {
    /// Malformed input: bad dimensions, non-monotone grids, nonfinite data,
    /// out-of-range parameters.
    InvalidArgument(String),
    /// An iterative solver (Newton, eigen/SVD sweep, line search) did not
    /// reach its tolerance within the iteration budget.
    ConvergenceFailure {
        context: String,
        residual: f64,
        iterations: usize,
    },
    /// More modes were requested than the data supports.
    RankDeficient { requested: usize, rank: usize },
    /// The operation is defined but not for this combination of inputs
    /// (e.g. mixed grids where a single grid is required).
    Unsupported(String),
    /// A reduced operator became singular or the reduced system lost
    /// solvability.
    IllPosed(String),
    /// File I/O failure; carries the offending path.
    Io { path: PathBuf, source: std::io::Error },
    /// Structured-text parse failure (snapshot/basis files).
    Parse(String),
}

impl fmt::Display for PodError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PodError::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            PodError::ConvergenceFailure {
                context,
                residual,
                iterations,
            } => write!(
                f,
                "{context}: no convergence after {iterations} iterations (residual {residual:.3e})"
            ),
            PodError::RankDeficient { requested, rank } => write!(
                f,
                "requested {requested} modes but the data has numerical rank {rank}"
            ),
            PodError::Unsupported(msg) => write!(f, "unsupported: {msg}"),
            PodError::IllPosed(msg) => write!(f, "ill-posed reduced system: {msg}"),
            PodError::Io { path, source } => {
                write!(f, "i/o error on {}: {source}", path.display())
            }
            PodError::Parse(msg) => write!(f, "parse error: {msg}"),
        }
    }
}

impl std::error::Error for PodError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            PodError::Io { source, .. } => Some(source),
            _ => None,
        }
    }
}

impl PodError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        PodError::InvalidArgument(msg.into())
    }

    /// Prefix the failure note where the variant carries free text; variants
    /// with structured payloads pass through unchanged.
    pub(crate) fn with_context(self, note: &str) -> Self {
        match self {
            PodError::InvalidArgument(m) => PodError::InvalidArgument(format!("{note}: {m}")),
            PodError::ConvergenceFailure {
                context,
                residual,
                iterations,
            } => PodError::ConvergenceFailure {
                context: format!("{note}: {context}"),
                residual,
                iterations,
            },
            PodError::Unsupported(m) => PodError::Unsupported(format!("{note}: {m}")),
            PodError::IllPosed(m) => PodError::IllPosed(format!("{note}: {m}")),
            other => other,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        PodError::Io {
            path: path.into(),
            source,
        }
    }
}
