use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A state or input value was NaN or infinite.
    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("particle index {index} out of range for {m} particles")]
    IndexOutOfRange { index: usize, m: usize },

    /// Parameters that violate a documented invariant, or an unsupported
    /// combination of space, potential and integrator.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("matrix is not symmetric positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("cannot fit decay rate: {0}")]
    FitDomain(String),

    #[error("{aborted} of {total} replicas aborted (first failure: {first})")]
    TooManyAborts {
        aborted: usize,
        total: usize,
        first: String,
    },
}

impl Error {
    /// True for errors caused by bad parameters rather than by a run that
    /// went wrong.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::DimensionMismatch { .. } | Error::NotPositiveDefinite(_)
        )
    }
}

pub(crate) fn ensure_finite(values: &[f64], what: &str) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(k) => Err(Error::InvalidState(format!(
            "{what}[{k}] = {} is not finite",
            values[k]
        ))),
        None => Ok(()),
    }
}

pub(crate) fn ensure_len(values: &[f64], expected: usize) -> Result<()> {
    if values.len() == expected {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            expected,
            found: values.len(),
        })
    }
}
