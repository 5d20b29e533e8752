use thiserror::Error;

use crate::solvers::TrainTrace;

pub type Result<T> = std::result::Result<T, QmeeError>;

#[derive(Debug, Error)]
pub enum QmeeError {
    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("non-finite value at index {index} of {what}")]
    NonFinite { what: &'static str, index: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("codebook counts sum to {counts} but {samples} error samples were given")]
    CodebookMismatch { counts: usize, samples: usize },

    #[error("singular system in {context}{}", fmt_iteration(*.iteration))]
    Singular { context: String, iteration: Option<usize> },

    #[error("training diverged at epoch {epoch}")]
    Diverged { epoch: usize, trace: Box<TrainTrace> },

    #[error("feature {feature} has zero range on the training split")]
    ZeroRange { feature: usize },

    #[error("target has zero variance")]
    ZeroVariance,

    #[error("series too short: need {needed} samples, have {available}")]
    InsufficientLength { needed: usize, available: usize },

    #[error("reservoir sampling produced a degenerate matrix after {attempts} attempts")]
    DegenerateReservoir { attempts: usize },

    #[error("csv row {row}, column {column}: {message}")]
    Csv { row: usize, column: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn fmt_iteration(iteration: Option<usize>) -> String {
    match iteration {
        Some(k) => format!(" at iteration {k}"),
        None => String::new(),
    }
}

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> QmeeError {
    QmeeError::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

pub(crate) fn check_dim(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(QmeeError::DimensionMismatch {
            context,
            expected,
            found,
        })
    }
}
