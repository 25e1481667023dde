use cfisac_conic::{ConicError, SolverStatus};

#[derive(Debug, thiserror::Error)]
pub enum CoreError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("target steering at AP {ap} lies in the span of the UE channels")]
    DegenerateNullspace { ap: usize },
    #[error("upper bisection bracket {0} is already feasible")]
    BracketTooSmall(f64),
    #[error("SINR targets cannot be met")]
    Infeasible,
    #[error("user {0} receives no signal from its relaxed beam matrix")]
    DegenerateUser(usize),
    #[error("beam of stream {stream} at AP {ap} does not have unit norm")]
    NonUnitBeam { stream: usize, ap: usize },
    #[error("solver stopped with status {}", .0.as_str())]
    Solver(SolverStatus),
    #[error(transparent)]
    Conic(#[from] ConicError),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl CoreError {
    /// True for failures of the numerics rather than of the problem instance.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            CoreError::Solver(SolverStatus::NumericalFailure | SolverStatus::MaxIterations | SolverStatus::Unbounded)
                | CoreError::Conic(_)
        )
    }
}
