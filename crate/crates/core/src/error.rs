use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or inconsistent input data. `row` is the 1-based CSV line
    /// number (header is line 1) when the problem is tied to a row.
    #[error("data error{}: {message}", row.map(|r| format!(" at line {r}")).unwrap_or_default())]
    Data { row: Option<usize>, message: String },

    /// An argument or option outside its documented domain.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Box-Cox forward transform of a non-positive value, or inverse
    /// transform outside `lambda * z + 1 > 0`.
    #[error("box-cox domain error: {0}")]
    Domain(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("pipeline failed at origin year {origin}: {source}")]
    Origin {
        origin: i32,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn data(row: Option<usize>, message: impl Into<String>) -> Self {
        Error::Data {
            row,
            message: message.into(),
        }
    }

    pub(crate) fn invalid(message: impl Into<String>) -> Self {
        Error::InvalidArgument(message.into())
    }

    pub(crate) fn numerical(message: impl Into<String>) -> Self {
        Error::Numerical(message.into())
    }

    /// The innermost error, skipping origin annotations.
    pub fn root(&self) -> &Error {
        match self {
            Error::Origin { source, .. } => source.root(),
            other => other,
        }
    }
}
