use thiserror::Error;

pub type Result<T> = std::result::Result<T, ApsiError>;

#[derive(Debug, Error)]
pub enum ApsiError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("frequency {omega} rad/s is at or above the Nyquist limit {nyquist} rad/s")]
    OutOfBand { omega: f64, nyquist: f64 },

    #[error("peak refinement failed near seed {seed} rad/s: bracket is not unimodal")]
    RefinementFailed { seed: f64 },

    #[error("decorrelation failed: conditional sets still share {residual:?}")]
    DecorrelationFailed { residual: Vec<f64> },

    #[error("scenario generation failed: {0}")]
    GenerationFailed(String),

    #[error("frequency response estimation failed: {0}")]
    EstimationFailed(String),

    #[error("ODE fit failed: condition estimate {condition:.3e}")]
    FitFailed { condition: f64 },

    #[error("line {line}: {message}")]
    Malformed { line: u64, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl ApsiError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        ApsiError::InvalidArgument(msg.into())
    }
}

/// Non-fatal conditions reported alongside a result.
#[derive(Debug, Clone, PartialEq)]
pub enum Warning {
    /// Golden-section refinement could not run; the grid seed was kept.
    RefinementFailed { seed: f64 },
    /// The filtered exact-frequency set came out empty.
    NoCommonSupport,
    /// The input exponent at this frequency fell below the relative floor.
    WeakInputLine { omega: f64, magnitude: f64 },
}

impl std::fmt::Display for Warning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Warning::RefinementFailed { seed } => {
                write!(f, "refinement failed near {seed} rad/s, keeping grid value")
            }
            Warning::NoCommonSupport => write!(f, "input and output share no exact frequencies"),
            Warning::WeakInputLine { omega, magnitude } => {
                write!(f, "skipped {omega} rad/s: input exponent {magnitude:.3e} below floor")
            }
        }
    }
}
