use thiserror::Error;

use crate::milp::SolveStatus;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("domain error: {0}")]
    Domain(String),

    /// Start or goal lies inside a collision volume; detected before solving.
    #[error("infeasible setup: {0}")]
    InfeasibleSetup(String),

    #[error("no plan available (solver status: {0})")]
    NoPlan(SolveStatus),

    #[error("plan verification failed: {0}")]
    PlanVerification(String),

    #[error("best response infeasible for agent {agent} in round {round}")]
    BestResponseInfeasible { agent: usize, round: usize },

    #[error("solver internal error: {0}")]
    Solver(String),

    #[error("scenario line {line}: {message}")]
    Scenario { line: usize, message: String },

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
