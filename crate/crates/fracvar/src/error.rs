use std::path::PathBuf;

/// Errors produced by the sampling, variation, solver, and estimation layers.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("time must be nonnegative, got {0}")]
    NegativeTime(f64),

    #[error("Hurst index must lie in (0, 1), got {0}")]
    InvalidHurst(f64),

    #[error("invalid path: {0}")]
    InvalidPath(String),

    #[error("invalid sample request: {0}")]
    InvalidRequest(String),

    #[error("circulant embedding failed: eigenvalue {eigenvalue:.6e} below tolerance -{tolerance:.6e}")]
    EmbeddingFailure { eigenvalue: f64, tolerance: f64 },

    #[error("target level {target} exceeds path level {level}")]
    LevelTooFine { target: u32, level: u32 },

    #[error("expected a scalar path, got dimension {0}")]
    NotScalar(usize),

    #[error("paths are on different grids: {0}")]
    GridMismatch(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("degenerate path: total quadratic variation is {0}")]
    DegeneratePath(f64),

    #[error("mesh ratio must be positive, finite and different from 1, got {0}")]
    InvalidMeshRatio(f64),

    #[error("design matrix is rank deficient (condition number {kappa})")]
    SingularDesign { kappa: f64 },

    #[error("solution diverged at step {step}")]
    Divergence { step: usize },

    #[error("matrices do not commute (commutator norm {norm:.6e}, tolerance {tolerance:.6e})")]
    NonCommuting { norm: f64, tolerance: f64 },

    #[error("unknown example `{0}`")]
    UnknownExample(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("malformed path data: {0}")]
    Parse(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// True for errors caused by bad user input (configuration, arguments,
    /// malformed data) rather than by numerics or I/O.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::NegativeTime(_)
                | Error::InvalidHurst(_)
                | Error::InvalidPath(_)
                | Error::InvalidRequest(_)
                | Error::LevelTooFine { .. }
                | Error::InvalidMeshRatio(_)
                | Error::UnknownExample(_)
                | Error::Config(_)
                | Error::Parse(_)
        )
    }

    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
