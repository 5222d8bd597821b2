use std::path::PathBuf;

use thiserror::Error;

use crate::sim::StepRecord;

pub type Result<T, E = RtaError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum RtaError {
    #[error("gradient of constraint {index} is singular at this state (norm below {epsilon:e})")]
    SingularGradient { index: usize, epsilon: f64 },

    #[error("degenerate NMT geometry: sin(theta1) is zero")]
    DegenerateGeometry,

    #[error("no grid point passed the NMT admissibility check")]
    EmptyLibrary,

    #[error("Riccati iteration did not converge after {iterations} iterations")]
    RiccatiDivergence { iterations: usize },

    #[error("numeric blowup at step {step}")]
    NumericBlowup { step: usize, last: Option<Box<StepRecord>> },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("I/O failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error on {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("JSON error on {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl RtaError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        RtaError::Io {
            path: path.into(),
            source,
        }
    }
}
