use thiserror::Error;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum CliError {
    /// A configuration value failed validation; `path` is the dotted field.
    #[error("{path}: {msg}")]
    Validation { path: String, msg: String },
    #[error("resource limit: {0}")]
    ResourceLimit(String),
    #[error("{failed} property check(s) failed")]
    PropertyFailure { failed: usize },
    #[error(transparent)]
    Core(wiplab_core::Error),
    #[error("config: {0}")]
    Toml(#[from] toml::de::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn invalid(path: impl Into<String>, msg: impl ToString) -> Self {
        CliError::Validation { path: path.into(), msg: msg.to_string() }
    }

    /// 0 success, 1 validation, 2 property failure, 3 resource limit.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::PropertyFailure { .. } => 2,
            CliError::ResourceLimit(_) => 3,
            _ => 1,
        }
    }
}

impl From<wiplab_core::Error> for CliError {
    fn from(e: wiplab_core::Error) -> Self {
        match e {
            wiplab_core::Error::ResourceLimit(msg) => CliError::ResourceLimit(msg),
            other => CliError::Core(other),
        }
    }
}
