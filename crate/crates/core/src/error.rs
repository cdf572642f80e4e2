use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid range: {0}")]
    InvalidRange(String),

    #[error("unsupported construction: {0}")]
    UnsupportedConstruction(String),

    /// |theta| exceeded the divergence guard at the given round.
    #[error("trajectory diverged at round {round} (|theta| = {magnitude:e})")]
    Divergence { round: u64, magnitude: f64 },

    #[error("no limit cycle: {0}")]
    NoLimitCycle(String),

    #[error("divergent series: zeta requires alpha > 1, got {0}")]
    DivergentSeries(f64),

    #[error("lemma hypothesis violated: {0}")]
    HypothesisViolated(String),

    #[error("insufficient data: {got} usable points, need at least {need}")]
    InsufficientData { got: usize, need: usize },

    #[error("unstable parameters: {0}")]
    Unstable(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
