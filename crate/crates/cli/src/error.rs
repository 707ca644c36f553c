use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error(transparent)]
    Core(#[from] depbias_core::Error),
}

impl CliError {
    /// 2 for configuration, 3 for data, 4 for anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Core(e) if e.is_config_error() => 2,
            CliError::Core(e) if e.is_data_error() => 3,
            CliError::Core(_) => 4,
        }
    }
}
