use thiserror::Error;

/// Errors produced by the toolkit.
///
/// Variants are grouped by how a caller should react: `Decode`/`Parse` point
/// at a location in the input, `Config`/`Argument`/`Usage` reject a request,
/// `Structural` flags malformed edit sets.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid UTF-8 at byte offset {offset}")]
    Decode { offset: usize },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("malformed edit set: {0}")]
    Structural(String),

    #[error("input too long for exhaustive search: {len} units (limit {limit})")]
    TooLong { len: usize, limit: usize },

    #[error("unsupported model container: {0}")]
    Version(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
