use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("structural error: {0}")]
    Structural(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("integration blew up at t = {t} (last finite state kept)")]
    BlowUp { t: f64 },

    #[error("integration blew up at grid node {node:?}")]
    GridBlowUp { node: Vec<usize> },

    #[error("degenerate frame: J-norm pivot {pivot:e} below threshold")]
    DegenerateFrame { pivot: f64 },

    #[error("tangent space is not a Cartan subspace at node {node:?}")]
    NonCartan { node: Vec<usize> },

    #[error("degenerate spectrum at node {node:?}: singular values {values:?}")]
    DegenerateSpectrum { node: Vec<usize>, values: Vec<f64> },

    #[error("gauge continuity broken: closedness residual {residual:e} exceeds {limit:e}")]
    GaugeContinuity { residual: f64, limit: f64 },

    #[error("reconstructed map is not immersive at any node")]
    NonImmersive,

    #[error("seeding failed after {attempts} attempts")]
    Seeding { attempts: usize },

    #[error("internal consistency: {0}")]
    Internal(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("missing artifact: {0}")]
    MissingArtifact(String),

    #[error("corrupt artifact {path}: {reason}")]
    CorruptArtifact { path: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Coarse error classes used for exit codes and machine-readable reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorCategory {
    Structural,
    Config,
    Artifact,
    Numerical,
    Degenerate,
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::DimensionMismatch { .. }
            | Error::Structural(_)
            | Error::Domain(_)
            | Error::Internal(_) => ErrorCategory::Structural,
            Error::Config(_) | Error::Seeding { .. } => ErrorCategory::Config,
            Error::MissingArtifact(_) | Error::CorruptArtifact { .. } | Error::Io(_) => {
                ErrorCategory::Artifact
            }
            Error::NonFinite(_)
            | Error::BlowUp { .. }
            | Error::GridBlowUp { .. }
            | Error::DegenerateFrame { .. }
            | Error::GaugeContinuity { .. } => ErrorCategory::Numerical,
            Error::NonCartan { .. } | Error::DegenerateSpectrum { .. } | Error::NonImmersive => {
                ErrorCategory::Degenerate
            }
        }
    }

    /// Process exit code: 2 for structural/config problems, 3 for numerical
    /// failures. Tolerance failures (code 1) are not errors.
    pub fn exit_code(&self) -> i32 {
        match self.category() {
            ErrorCategory::Structural | ErrorCategory::Config | ErrorCategory::Artifact => 2,
            ErrorCategory::Numerical | ErrorCategory::Degenerate => 3,
        }
    }
}
