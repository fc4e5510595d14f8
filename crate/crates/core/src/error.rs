use thiserror::Error;

use crate::nonlinear_solver::IterationRecord;

/// Errors raised by the solvers and verifiers.
#[derive(Debug, Error)]
pub enum Error {
    /// Shapes, grids or component counts that do not fit together.
    #[error("structural mismatch: {0}")]
    Structural(String),

    /// A parameter outside the window where the underlying estimate holds.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The periodic box no longer approximates the whole-space problem.
    #[error("domain approximation violated: {0}")]
    DomainApproximation(String),

    /// The fixed-point iteration stopped contracting. Carries the full trace.
    #[error("fixed-point iteration did not converge after {iterations} iterations: {reason}")]
    NonConvergence {
        iterations: usize,
        reason: String,
        trace: Vec<IterationRecord>,
    },

    /// NaN, overflow or a numerically singular system.
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
