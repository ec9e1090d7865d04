use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error(
        "input matrix is rank deficient at state {state:?} (smallest singular value {sigma_min:e})"
    )]
    RankDeficiency { state: Vec<f64>, sigma_min: f64 },

    #[error("feedforward incompatible with input matrix: range residual {residual:e}")]
    IncompatibleFeedforward { residual: f64 },

    #[error("desired-trajectory generator is not bounded: {0}")]
    UnboundedTrajectory(String),

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("invalid basis: {0}")]
    InvalidBasis(String),

    #[error("invalid gains: {0}")]
    InvalidGains(String),

    #[error("gain matrix degenerate: {0}")]
    GainMatrixDegenerate(String),

    #[error("numerical blow-up in {component} at t = {time}")]
    NumericalBlowup { component: String, time: f64 },

    #[error("LQ oracle unavailable: {0}")]
    OracleUnavailable(String),

    #[error("basis mismatch: {0}")]
    BasisMismatch(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(
        "excitation window too large: 1 - 6N(eta_c phi_hi T)^2/(nu phi_lo)^2 = {denominator} <= 0"
    )]
    TWindowTooLarge { denominator: f64 },

    #[error("stability conditions not met: {0}")]
    ConditionsNotMet(String),

    #[error("gain selection failed: {0}")]
    SelectionFailed(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
