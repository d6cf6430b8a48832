use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("domain error: {0}")]
    Domain(String),
    /// The analytic thin-film approximation is outside its regime of validity.
    #[error("validity error: {0}")]
    Validity(String),
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("fit error: {0}")]
    Fit(String),
    #[error("parse error at row {row}: {msg}")]
    Parse { row: usize, msg: String },
    #[error("schema error: {0}")]
    Schema(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Coarse classification, used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Validation,
    Fit,
    Numerical,
    Io,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::InvalidGeometry(_)
            | Error::Config(_)
            | Error::Domain(_)
            | Error::Validity(_)
            | Error::Parse { .. }
            | Error::Schema(_) => ErrorClass::Validation,
            Error::Fit(_) => ErrorClass::Fit,
            Error::Numerical(_) => ErrorClass::Numerical,
            Error::Io(_) | Error::Csv(_) => ErrorClass::Io,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
