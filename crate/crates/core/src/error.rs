use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("{routine} did not terminate within {cap} iterations ({detail})")]
    NonTermination {
        routine: &'static str,
        cap: usize,
        detail: String,
    },

    #[error("conjugate gradient stalled after {iterations} iterations, relative residual {residual:e}")]
    SolverDiverged { iterations: usize, residual: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    /// Whether the failure comes from the numerics rather than from bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonTermination { .. } | Error::SolverDiverged { .. } | Error::Numerical(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
