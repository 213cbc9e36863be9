use thiserror::Error;

/// Errors raised by mechanism construction, evaluation and verification.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid prediction: {0}")]
    InvalidPrediction(String),

    #[error("invalid game: {0}")]
    InvalidGame(String),

    #[error("outcome index {index} out of range for {outcomes} outcomes")]
    InvalidOutcome { index: usize, outcomes: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("error rates ({e0}, {e1}) sum to one; surrogate carries no information")]
    DegenerateNoise { e0: f64, e1: f64 },

    #[error("invalid error rates: {0}")]
    InvalidRates(String),

    #[error("confusion matrix rejected: {0}")]
    SingularConfusion(String),

    #[error("base mechanism gives agent {agent} a negative payoff {payoff}")]
    InvalidBaseMechanism { agent: usize, payoff: f64 },

    #[error("agent {agent} would lose {loss} with wager {wager}")]
    WagerViolation { agent: usize, loss: f64, wager: f64 },

    #[error("enumeration cap exceeded: {0}; use the sampled form")]
    EnumerationCap(String),

    #[error("error-rate selection inconsistent: r = {0}")]
    AlgorithmInconsistency(f64),

    #[error("infeasible agent flip rates ({a0}, {a1})")]
    InfeasibleFlip { a0: f64, a1: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;
