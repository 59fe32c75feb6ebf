use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot access {path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error: {0}")]
    Parse(String),

    /// A validated type's invariant does not hold. `location` names the
    /// asset and field (or matrix row) at fault.
    #[error("invalid {location}: {message}")]
    Invariant { location: String, message: String },

    #[error("condition state {state} out of range 1..={k}")]
    StateOutOfRange { state: usize, k: usize },

    #[error("unknown asset {0}")]
    UnknownAsset(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("episode already finished at year {year} of {horizon}")]
    EpisodeFinished { year: usize, horizon: usize },

    #[error("infeasible state in year {year}: remaining cap {cap} below annual minimum {lower}")]
    InfeasibleBudget { year: usize, cap: f64, lower: f64 },

    #[error("scale contract violated: {what} is {got}, limit {limit}")]
    Scale {
        what: &'static str,
        got: u128,
        limit: u128,
    },

    #[error("backward called without a recorded forward pass")]
    BackwardWithoutForward,

    #[error("no feasible action: {0}")]
    NoFeasibleAction(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

impl Error {
    pub(crate) fn invariant(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Invariant {
            location: location.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
