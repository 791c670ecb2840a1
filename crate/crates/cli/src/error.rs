use apsi::pipeline::{Stage, StageError};
use apsi::ApsiError;

/// Failure of a subcommand, carrying its exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad input, configuration or files: exit code 2.
    #[error("{0}")]
    Input(String),
    /// The algorithm ran but could not produce a result: exit code 3.
    #[error("{stage} stage failed: {message}")]
    Algorithm { stage: Stage, message: String },
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        CliError::Input(message.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Algorithm { .. } => 3,
        }
    }

    /// Classifies a library error raised during `stage`.
    pub fn at(stage: Stage, e: ApsiError) -> Self {
        if is_algorithmic(&e) {
            CliError::Algorithm {
                stage,
                message: e.to_string(),
            }
        } else {
            CliError::Input(format!("{stage}: {e}"))
        }
    }
}

fn is_algorithmic(e: &ApsiError) -> bool {
    matches!(
        e,
        ApsiError::EstimationFailed(_)
            | ApsiError::FitFailed { .. }
            | ApsiError::DecorrelationFailed { .. }
            | ApsiError::RefinementFailed { .. }
    )
}

impl From<StageError> for CliError {
    fn from(e: StageError) -> Self {
        CliError::at(e.stage, e.source)
    }
}

impl From<ApsiError> for CliError {
    fn from(e: ApsiError) -> Self {
        CliError::Input(e.to_string())
    }
}
