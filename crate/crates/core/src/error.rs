use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("payoffs must satisfy r_c > r_h > r_s (got r_c={r_c}, r_h={r_h}, r_s={r_s})")]
    PayoffOrdering { r_c: String, r_h: String, r_s: String },

    #[error("ratio metrics undefined: maximin welfare {0} is not strictly positive")]
    RatioUndefined(String),

    #[error("risk parameter {beta} violates 1 + beta * sigma2 > 0 (sigma2 = {sigma2})")]
    TrustNotPositive { beta: String, sigma2: String },

    #[error("no root in (0, 1): {0}")]
    NoRoot(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("search did not converge after {0} iterations")]
    NoConvergence(usize),

    #[error("trajectory too short: need {needed} points, have {have}")]
    InsufficientData { needed: usize, have: usize },

    #[error("criterion not reached within the run budget: {0}")]
    CriterionUnreachable(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
