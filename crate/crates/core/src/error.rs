//! Error type shared across the crate.

use crate::qp::SimplexQpSolution;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong while loading data, solving, or emitting reports.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A vector or matrix had the wrong length for the operation.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    /// The input file is missing a required column.
    #[error("schema error: {0}")]
    Schema(String),

    /// A cell failed to parse as a finite number. Rows are 1-based and count
    /// data rows only (the header is row 0).
    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },

    /// The dataset has no samples.
    #[error("empty dataset")]
    EmptyData,

    /// A group has no samples.
    #[error("group {index} is empty")]
    EmptyGroup { index: usize },

    /// Invalid configuration value.
    #[error("config error: {0}")]
    Config(String),

    /// A label was not 0 or 1.
    #[error("label error at sample {index}: {value} is not a binary label")]
    Label { index: usize, value: f64 },

    /// A computation produced a non-finite value.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// The QP active-set loop hit its iteration cap; the best iterate found
    /// so far is attached.
    #[error("simplex QP did not converge within the iteration cap")]
    QpConvergence { best: Box<SimplexQpSolution> },

    /// A candidate multiplier vector violates the simplex constraints.
    #[error("infeasible point: {0}")]
    Infeasible(String),

    /// No backtracking step achieved strict decrease.
    #[error("line search stagnated: no step achieved strict decrease")]
    LineSearchStagnation,

    /// Gradient descent produced a non-finite loss; the losses recorded up to
    /// the failing step are attached.
    #[error("non-finite loss at gradient-descent step {step}")]
    DivergedDescent { step: usize, losses: Vec<f64> },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            other => Error::Schema(format!("csv error: {other:?}")),
        }
    }
}

impl Error {
    /// True for errors caused by bad input (files, schemas, configuration)
    /// rather than by the numerics.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Dimension { .. }
                | Error::Schema(_)
                | Error::Parse { .. }
                | Error::EmptyData
                | Error::EmptyGroup { .. }
                | Error::Config(_)
                | Error::Label { .. }
                | Error::Io(_)
        )
    }
}
