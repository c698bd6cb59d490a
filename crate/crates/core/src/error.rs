use thiserror::Error;

/// Errors raised by construction, evaluation and verification routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parameter error: {0}")]
    Parameter(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("convexity violation at c={c}: left slope {left} exceeds right slope {right}")]
    ConvexityViolation { c: f64, left: f64, right: f64 },
    #[error("slope-order error: left slope {left} is not below right slope {right}")]
    SlopeOrder { left: f64, right: f64 },
    #[error("continuity error: pieces disagree at the junction ({left} vs {right})")]
    Continuity { left: f64, right: f64 },
    #[error("construction error ({stage}): {detail}")]
    Construction { stage: String, detail: String },
    #[error("invalid complex structure: {0}")]
    InvalidComplexStructure(String),
    #[error("zero vector cannot be normalized")]
    ZeroVector,
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),
    #[error("guard exceeded: {0}")]
    Guard(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn construction(stage: &str, detail: impl Into<String>) -> Self {
        Error::Construction {
            stage: stage.to_string(),
            detail: detail.into(),
        }
    }
}
