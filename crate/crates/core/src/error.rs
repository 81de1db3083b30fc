use alloc::boxed::Box;
use alloc::string::String;

use thiserror::Error;

use crate::l1solver::FitResult;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("insufficient normal ROI: {found} voxels labeled normal_roi, at least {required} required")]
    InsufficientRoi { found: usize, required: usize },

    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("degenerate labels: {0}")]
    DegenerateLabels(String),

    /// Carries the last iterate so callers can inspect or fall back on it.
    #[error("solver did not converge after {iterations} iterations (last max change {max_change:e})")]
    Convergence { iterations: usize, max_change: f64, last: Box<FitResult> },
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn schema(msg: impl Into<String>) -> Self {
        Error::Schema(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }
}
