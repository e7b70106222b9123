use thiserror::Error;

/// Process-level failure classes: usage/config errors exit 2, failures exit 1.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Failure(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Failure(_) => 1,
        }
    }
}

impl From<bgeo_core::Error> for CliError {
    fn from(e: bgeo_core::Error) -> Self {
        use bgeo_core::Error as E;
        match e {
            E::InvalidParameter(_) | E::OutsideDomain(_) | E::DimensionMismatch { .. } | E::Unsupported(_) => {
                CliError::Usage(e.to_string())
            }
            _ => CliError::Failure(e.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
