use thiserror::Error;

use crate::sim::TrajectoryRecord;
use crate::trigger::ParamViolation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    /// A weight whose spectrum has both signs. `|M|` and `sgn(M)` only exist
    /// for sign-definite (or zero) matrices.
    #[error("unsupported weight: {0}")]
    UnsupportedWeight(String),

    #[error("matrix is not positive semi-definite (min eigenvalue {min_eigenvalue:e})")]
    NotPsd { min_eigenvalue: f64 },

    #[error("agents {i} and {j} are not neighbors")]
    NotNeighbors { i: usize, j: usize },

    #[error("agent {agent} has no neighbors")]
    NoNeighbors { agent: usize },

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("assumption violated: {0}")]
    AssumptionViolated(String),

    #[error("invalid trigger parameters: {}", format_violations(.0))]
    InvalidParams(Vec<ParamViolation>),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    /// The state blew up. The record holds everything up to the last finite
    /// grid point.
    #[error("simulation diverged at t = {time}: {reason}")]
    Diverged {
        time: f64,
        reason: String,
        record: Box<TrajectoryRecord>,
    },

    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn format_violations(v: &[ParamViolation]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}
