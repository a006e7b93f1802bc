use thiserror::Error;

use crate::model::Step;

/// Errors raised by the estimators, the simulator and the sweep harness.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Matrices supplied to a model disagree with its dimensions or violate
    /// the noise covariance invariants.
    #[error("model inconsistency: {0}")]
    Model(String),

    /// A matrix that has to be inverted or factored is numerically singular.
    #[error("singular matrix at step {step}: {what}")]
    Singular { step: Step, what: &'static str },

    /// The information gathered so far does not determine the full state.
    #[error("not observable at step {step}: {detail}")]
    NotObservable { step: Step, detail: String },

    /// The requested strategy cannot handle this model configuration.
    #[error("unsupported configuration at step {step}: {detail}")]
    Unsupported { step: Step, detail: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unknown filter `{0}`")]
    UnknownFilter(String),
}

impl Error {
    /// Short stable identifier, suitable for grepping tool output.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Model(_) => "model-inconsistent",
            Error::Singular { .. } => "singular",
            Error::NotObservable { .. } => "not-observable",
            Error::Unsupported { .. } => "unsupported-configuration",
            Error::InvalidArgument(_) => "invalid-argument",
            Error::UnknownFilter(_) => "unknown-filter",
        }
    }

    /// The time step the error refers to, if any.
    pub fn step(&self) -> Option<Step> {
        match self {
            Error::Singular { step, .. }
            | Error::NotObservable { step, .. }
            | Error::Unsupported { step, .. } => Some(*step),
            _ => None,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
