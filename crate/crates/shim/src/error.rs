use thiserror::Error;

/// Errors surfaced by the library.
///
/// The CLI maps these onto process exit codes: input/parse problems exit
/// with 2, numerical degeneracies with 3, and refusals to exceed a
/// combinatorial cap with 4.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid data or configuration supplied by the caller.
    #[error("input error: {0}")]
    Input(String),

    /// A cell of an input file could not be interpreted.  Coordinates are
    /// 1-based: `row` counts data rows (excluding the header).
    #[error("parse error at row {row}, column {col}: {msg}")]
    Parse { row: usize, col: usize, msg: String },

    /// The active Gram matrix lost positive definiteness.
    #[error("degenerate active set: gram matrix is singular at pattern {pattern}")]
    Degeneracy { pattern: String },

    /// A numerical procedure failed to converge or reached an inconsistent
    /// state (stalled path, empty truncation region, failed bisection, ...).
    #[error("numerical degeneracy: {0}")]
    Numerical(String),

    /// An operation would exceed a configured size cap and was refused.
    #[error("cap exceeded: {0}")]
    CapExceeded(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code the CLI should use for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Input(_) | Error::Parse { .. } | Error::Io(_) | Error::Csv(_) | Error::Json(_) => 2,
            Error::Degeneracy { .. } | Error::Numerical(_) => 3,
            Error::CapExceeded(_) => 4,
        }
    }
}
