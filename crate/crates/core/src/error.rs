//! Error types shared by every module of the toolkit.

use thiserror::Error;

/// Crate-wide error enum. The CLI maps [`ErrorClass`] onto process exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("config error: {0}")]
    Config(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("offset error: {0}")]
    Offset(String),

    #[error("solver error: {0}")]
    Solve(String),

    #[error("topology error: {0}")]
    Topology(String),

    #[error("tracing error: {0}")]
    Tracing(String),

    #[error("transversality error: {0}")]
    Transversality(String),

    #[error("undefined rotational transform: {0}")]
    UndefinedIota(String),

    #[error("proximity error: {0}")]
    Proximity(String),

    #[error("sampling error: {0}")]
    Sampling(String),

    #[error("degenerate period: {0}")]
    DegeneratePeriod(String),

    #[error("kernel resolution error: {0}")]
    KernelResolution(String),

    #[error("decomposition error: {0}")]
    Decomposition(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Coarse classification used for exit codes: 2 config, 3 geometry, 4 numerics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Geometry,
    Numerics,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config(_) | Error::Io(_) | Error::Json(_) => ErrorClass::Config,
            Error::Geometry(_) | Error::Offset(_) | Error::Proximity(_) => ErrorClass::Geometry,
            _ => ErrorClass::Numerics,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
