use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid config at `{path}`: {message}")]
    ConfigInvalid { path: String, message: String },
    #[error("{experiment}: {source}")]
    Experiment {
        experiment: String,
        #[source]
        source: blendlab::Error,
    },
    #[error("cannot write {path}: {message}")]
    Output { path: String, message: String },
}

impl CliError {
    pub fn config(path: &str, message: impl Into<String>) -> Self {
        CliError::ConfigInvalid { path: path.to_string(), message: message.into() }
    }

    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::ConfigInvalid { .. } => 2,
            CliError::Experiment { source, .. } if is_budget(source) => 3,
            _ => 1,
        }
    }
}

pub fn is_budget(e: &blendlab::Error) -> bool {
    matches!(
        e,
        blendlab::Error::BudgetExhausted { .. } | blendlab::Error::StepLimit { .. } | blendlab::Error::DepthExhausted { .. }
    )
}

/// Attaches the experiment name to library errors.
pub trait Context<T> {
    fn ctx(self, experiment: &str) -> Result<T, CliError>;
}

impl<T> Context<T> for blendlab::Result<T> {
    fn ctx(self, experiment: &str) -> Result<T, CliError> {
        self.map_err(|source| CliError::Experiment { experiment: experiment.to_string(), source })
    }
}
