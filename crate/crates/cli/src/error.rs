use rkmix::mixture::MixtureError;
use rkmix::selection::SelectionError;
use rkmix::tiles::TileError;
use rkmix::EmError;
use thiserror::Error;

/// Command failure, classified by the exit code it maps to.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        CliError::Data(message.into())
    }
}

impl From<TileError> for CliError {
    fn from(e: TileError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<MixtureError> for CliError {
    fn from(e: MixtureError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<EmError> for CliError {
    fn from(e: EmError) -> Self {
        match e {
            EmError::NonFiniteLikelihood { .. } => CliError::Numerical(e.to_string()),
            EmError::InvalidConfig(_) | EmError::NoComponents => CliError::Usage(e.to_string()),
            EmError::InsufficientData { .. } | EmError::NonPositiveSample { .. } => CliError::Data(e.to_string()),
        }
    }
}

impl From<SelectionError> for CliError {
    fn from(e: SelectionError) -> Self {
        match e {
            SelectionError::NonFiniteLikelihood { .. } => CliError::Numerical(e.to_string()),
            SelectionError::EmptyRange(_) | SelectionError::UnsortedThresholds => CliError::Usage(e.to_string()),
            SelectionError::Empty | SelectionError::Pool(_) => CliError::Data(e.to_string()),
        }
    }
}
