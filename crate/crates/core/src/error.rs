use thiserror::Error;

/// Errors raised by the filtering toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("observation times must be strictly increasing and later than t0")]
    NonMonotoneTimes,
    #[error("number of intermediate steps must be at least 1")]
    ZeroSteps,
    #[error("parameter `{name}` = {value} is outside the domain of its transform")]
    DomainError { name: String, value: f64 },
    #[error("invalid parameter vector: {0}")]
    InvalidParams(String),
    #[error("all particle weights are degenerate at grid index {grid_index}")]
    AllWeightsDegenerate { grid_index: usize },
    #[error("guide values must be positive and finite (got log value {0})")]
    NonPositiveGuide(f64),
    #[error("guide produced a non-finite value at grid index {grid_index}")]
    NonFiniteGuide { grid_index: usize },
    #[error("guide boundary condition violated: {0}")]
    BoundaryViolation(String),
    #[error("matrix is not positive definite: {0}")]
    CholeskyFailure(String),
    #[error("state dimension {0} is too small (need at least 4)")]
    DimensionTooSmall(usize),
    #[error("non-finite or exploding latent state")]
    NonFiniteState,
    #[error("zero distance between cities {0} and {1}")]
    ZeroDistance(usize, usize),
    #[error("no birth data for city {city} in year {year}")]
    MissingBirthData { city: String, year: i32 },
    #[error("innovation covariance is singular")]
    SingularInnovation,
    #[error("ensemble covariance is singular")]
    SingularCovariance,
    #[error("degenerate regression fit: {0}")]
    DegenerateFit(String),
    #[error("profile is not locally concave (curvature {0})")]
    NegativeCurvature(f64),
    #[error("data mismatch: {0}")]
    DataMismatch(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("model error: {0}")]
    Model(String),
    #[error("iteration {iteration} failed: {source}")]
    Iteration { iteration: usize, source: Box<Error> },
    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// True for failures of the particle filter itself, as opposed to bad
    /// inputs or model callbacks.
    pub fn is_filter_failure(&self) -> bool {
        if let Error::Iteration { source, .. } = self {
            return source.is_filter_failure();
        }
        matches!(
            self,
            Error::AllWeightsDegenerate { .. }
                | Error::NonFiniteGuide { .. }
                | Error::NonPositiveGuide(_)
                | Error::BoundaryViolation(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
