use thiserror::Error;

/// Failure modes surfaced by estimators and solvers.
#[derive(Debug, Error)]
pub enum Error {
    /// Input outside the documented domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A one-dimensional model failed construction-time validation.
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    /// A numerical routine could not reach its accuracy target.
    /// `partial` carries the best value obtained, which is still a
    /// valid lower bound for monotone targets such as truncated integrals.
    #[error("precision failure: {what} (partial value {partial})")]
    Precision { what: String, partial: f64 },

    /// A Monte Carlo estimator became unusable, e.g. the effective
    /// sample size of an importance-sampling pass collapsed.
    #[error("estimator degenerate: {0}")]
    EstimatorDegenerate(String),

    /// An internal optimization or feasibility solver failed outright.
    #[error("solver failure: {0}")]
    Solver(String),

    /// A sweep did not bracket the requested level.
    #[error("no straddle of the target level: {hint}")]
    NoStraddle { hint: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn invalid_measure(msg: impl Into<String>) -> Self {
        Error::InvalidMeasure(msg.into())
    }

    pub fn precision(what: impl Into<String>, partial: f64) -> Self {
        Error::Precision {
            what: what.into(),
            partial,
        }
    }
}
