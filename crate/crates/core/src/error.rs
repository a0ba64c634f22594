use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid experiment or field parameters.
    #[error("configuration error: {0}")]
    Config(String),
    /// An operation was called outside its domain of definition.
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("{site}: {source}")]
    Site {
        site: String,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn at(self, site: impl Into<String>) -> Error {
        Error::Site {
            site: site.into(),
            source: Box::new(self),
        }
    }

    /// True for errors that stem from bad configuration, at any nesting depth.
    pub fn is_config(&self) -> bool {
        match self {
            Error::Config(_) | Error::Json(_) => true,
            Error::Site { source, .. } => source.is_config(),
            _ => false,
        }
    }
}
