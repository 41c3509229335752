use fh_core::dec::DecError;
use fh_core::field::FieldError;
use fh_core::hopf::HopfError;
use fh_core::ode::OdeError;
use thiserror::Error;

/// Exit status when every assertion passed.
pub const EXIT_OK: i32 = 0;
/// Exit status when an assertion failed or a computation could not finish.
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RESOURCE: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("resource cap exceeded: {0}")]
    ResourceCap(String),
    #[error("computation failed: {0}")]
    Compute(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::ResourceCap(_) => EXIT_RESOURCE,
            _ => EXIT_FAILED,
        }
    }
}

impl From<DecError> for CliError {
    fn from(e: DecError) -> Self {
        match e {
            DecError::TooLarge { .. } => CliError::ResourceCap(e.to_string()),
            DecError::GridTooSmall { .. }
            | DecError::PoleOnGrid { .. }
            | DecError::BadPeriod { .. }
            | DecError::BadDimension(_) => CliError::Config(e.to_string()),
            _ => CliError::Compute(e.to_string()),
        }
    }
}

impl From<FieldError> for CliError {
    fn from(e: FieldError) -> Self {
        match e {
            FieldError::Dec(inner) => inner.into(),
            FieldError::Unresolved { .. } | FieldError::BadEpsilon(_) | FieldError::BadFlowParameters { .. } => {
                CliError::Config(e.to_string())
            }
            _ => CliError::Compute(e.to_string()),
        }
    }
}

impl From<HopfError> for CliError {
    fn from(e: HopfError) -> Self {
        match e {
            HopfError::NegativeCoupling(_) | HopfError::BracketInvalid { .. } | HopfError::BadTolerance(_) => {
                CliError::Config(e.to_string())
            }
            HopfError::Rep(fh_core::su2::Su2Error::WeightTooLarge { .. }) => CliError::Config(e.to_string()),
            _ => CliError::Compute(e.to_string()),
        }
    }
}

impl From<OdeError> for CliError {
    fn from(e: OdeError) -> Self {
        match e {
            OdeError::BadStep(_)
            | OdeError::BadInterval { .. }
            | OdeError::TooFewPoints { .. }
            | OdeError::Domain { .. } => CliError::Config(e.to_string()),
            _ => CliError::Compute(e.to_string()),
        }
    }
}
