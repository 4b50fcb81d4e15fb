use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// A single field-level problem found while validating an experiment config.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldError {
    /// JSON path of the offending field, e.g. `$.lambda[0]`.
    pub path: String,
    pub message: String,
}

impl std::fmt::Display for FieldError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid weight: {0}")]
    InvalidWeight(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("boundary case not covered by the limit theorems: {0}")]
    Boundary(String),

    #[error("scaling companions unavailable for weight family {0}")]
    UnsupportedFamily(String),

    #[error(
        "trajectory budget exceeded: {recorded} jump records > limit {limit}; use grid recording"
    )]
    Budget { recorded: usize, limit: usize },

    #[error("fit failure: {0}")]
    FitFailure(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("replication {index}: {source}")]
    Replication {
        index: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("malformed config: {0}")]
    MalformedConfig(String),

    #[error("invalid config: {}", join_fields(.0))]
    Config(Vec<FieldError>),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn join_fields(fields: &[FieldError]) -> String {
    fields
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

impl Error {
    /// Process exit status used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::MalformedConfig(_) | Error::Config(_) | Error::Json(_) => 1,
            Error::Replication { source, .. } => source.exit_code(),
            _ => 2,
        }
    }
}
