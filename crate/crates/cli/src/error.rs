use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("model error: {0}")]
    Model(girf::Error),
    #[error("filter failure: {0}")]
    Filter(girf::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Model(_) => 2,
            CliError::Filter(_) => 3,
        }
    }
}

impl From<girf::Error> for CliError {
    fn from(e: girf::Error) -> Self {
        use girf::Error as E;
        match e {
            E::Config(m) | E::Io(m) | E::DataMismatch(m) | E::InvalidParams(m) => CliError::Config(m),
            E::NonMonotoneTimes | E::ZeroSteps | E::DomainError { .. } => CliError::Config(e.to_string()),
            E::SingularInnovation
            | E::SingularCovariance
            | E::DegenerateFit(_)
            | E::NegativeCurvature(_)
            | E::NonFiniteState => CliError::Filter(e),
            e if e.is_filter_failure() => CliError::Filter(e),
            e => CliError::Model(e),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Config(e.to_string())
    }
}
