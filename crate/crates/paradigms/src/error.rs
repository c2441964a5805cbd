//! Crate-wide error type and the process exit codes the CLI maps it to.

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A caller-supplied value violated a documented precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A trajectory state left the trust region: non-finite, or Euclidean
    /// norm above `1e6 * sqrt(dim)`.
    #[error("numerical divergence at iteration {iteration}, trajectory index {index}")]
    NumericalDivergence { iteration: usize, index: usize },

    /// The window engine hit its iteration cap before covering the horizon.
    /// Carries the strides taken so far for post-mortem inspection.
    #[error("iteration cap {cap} reached after covering {covered} of {total} steps")]
    IterationCap {
        cap: usize,
        covered: usize,
        total: usize,
        stride_trace: Vec<usize>,
    },

    /// An experiment config failed to parse or validate. The message keeps
    /// the parser's line/field diagnostic.
    #[error("config error in {}: {message}", path.display())]
    Config { path: PathBuf, message: String },

    /// Two result files cannot be joined row-for-row.
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Exit code for the CLI: 2 for unusable inputs, 3 for numerical
    /// failures, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidArgument(_) | Error::Config { .. } | Error::SchemaMismatch(_) => 2,
            Error::NumericalDivergence { .. } | Error::IterationCap { .. } => 3,
            Error::Io(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_partition_by_failure_kind() {
        assert_eq!(Error::InvalidArgument("x".into()).exit_code(), 2);
        assert_eq!(
            Error::Config { path: "a.toml".into(), message: "bad".into() }.exit_code(),
            2
        );
        assert_eq!(Error::SchemaMismatch("T".into()).exit_code(), 2);
        assert_eq!(
            Error::NumericalDivergence { iteration: 1, index: 2 }.exit_code(),
            3
        );
        assert_eq!(
            Error::IterationCap { cap: 5, covered: 3, total: 10, stride_trace: vec![1, 1, 1] }
                .exit_code(),
            3
        );
        assert_eq!(
            Error::Io(std::io::Error::new(std::io::ErrorKind::NotFound, "gone")).exit_code(),
            1
        );
    }
}
