use thiserror::Error;

/// Errors surfaced by the solver, pricing, and experiment layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is singular (pivot below {threshold:.3e} at step {step})")]
    SingularMatrix { step: usize, threshold: f64 },
    #[error("matrix is not symmetric (max asymmetry {asymmetry:.3e})")]
    NotSymmetric { asymmetry: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("matrix entries must be finite")]
    NonFiniteEntry,
    #[error("invalid network size {n} for topology {kind}")]
    InvalidSize { kind: &'static str, n: usize },
    #[error("invalid network: {0}")]
    InvalidNetwork(String),
    #[error("invalid population: {0}")]
    InvalidPopulation(String),
    #[error("katz damping {alpha} is not below 1/rho(G) = {limit}")]
    AlphaOutOfRange { alpha: f64, limit: f64 },
    #[error("assumption a_i > p_i, b_i > gamma_i violated for user {user}")]
    AssumptionViolated { user: usize },
    #[error("fixed-point iteration did not converge within {max_iter} sweeps")]
    NoConvergence { max_iter: usize },
    #[error("computed price is negative for user {user}: {price}")]
    NegativePrice { user: usize, price: f64 },
    #[error("price lower bound {price_lb} exceeds the mean intercept {mean_a}")]
    NegativeBound { price_lb: f64, mean_a: f64 },
    #[error("one-high-many-equal premise not met: {0}")]
    PremiseNotMet(String),
    #[error("users {i} and {j} are not connected")]
    NotConnected { i: usize, j: usize },
    #[error("peer sensitivities are not a common scalar")]
    GammaNotScalar,
    #[error("enumeration of {candidates} assignments exceeds the cap of {cap}")]
    TooLarge { candidates: u128, cap: u128 },
    #[error("performance metric undefined: exact and baseline profits coincide")]
    UndefinedMetric,
    #[error("invalid config key `{key}`: {reason}")]
    ConfigInvalid { key: String, reason: String },
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
