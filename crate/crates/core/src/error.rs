use thiserror::Error;

use crate::dispatch::DispatchError;
use crate::grid::GridError;
use crate::policy::PolicyError;
use crate::powerflow::PowerFlowError;
use crate::report::ReportError;
use crate::scenario::ScenarioError;
use crate::seismic::SeismicError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Seismic(#[from] SeismicError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    PowerFlow(#[from] PowerFlowError),
    #[error(transparent)]
    Dispatch(#[from] DispatchError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("pipeline stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    pub fn json(context: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Json {
            context: context.into(),
            source,
        }
    }

    /// Process exit code: 2 for configuration/input problems, 3 for
    /// infeasible or over-limit problems, 4 for internal invariant failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Stage { source, .. } => source.exit_code(),
            Error::Config(_) | Error::Io { .. } | Error::Json { .. } => 2,
            Error::Grid(_) | Error::Seismic(_) | Error::Scenario(_) => 2,
            Error::Dispatch(e) => {
                if e.is_limit() {
                    3
                } else {
                    2
                }
            }
            Error::PowerFlow(PowerFlowError::Infeasible { .. }) => 4,
            Error::PowerFlow(_) => 3,
            Error::Policy(PolicyError::Diverged { .. } | PolicyError::NonFinite { .. } | PolicyError::InvalidAction { .. }) => 4,
            Error::Policy(PolicyError::Dispatch(e)) if e.is_limit() => 3,
            Error::Policy(_) => 2,
            Error::Report(ReportError::Mismatch { source, .. }) if source.is_limit() => 3,
            Error::Report(_) => 2,
        }
    }
}
