use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),

    #[error("parse error at row {row}: {msg}")]
    Parse { row: usize, msg: String },

    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("file not found: {}", .0.display())]
    NotFound(PathBuf),

    #[error("invalid action {action} (valid: 0..{n_actions})")]
    InvalidAction { action: usize, n_actions: usize },

    #[error("discretization error: {0}")]
    Discretization(String),

    #[error("empty data: {0}")]
    EmptyData(String),

    #[error("training error: {0}")]
    Training(String),

    #[error("unsupported schema: {0}")]
    UnsupportedSchema(String),

    #[error("resource limit: {0}")]
    Resource(String),

    #[error("query rejected: {0}")]
    Validation(String),

    #[error("unknown {kind} '{name}' (valid: {})", .valid.join(", "))]
    Resolution {
        kind: &'static str,
        name: String,
        valid: Vec<String>,
    },

    #[error("syntax error at position {pos}: {msg}")]
    QuerySyntax { pos: usize, msg: String },

    #[error("language model endpoint unavailable: {0}")]
    Unavailable(String),

    #[error("render error: {0}")]
    Render(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Sqlite(#[from] rusqlite::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("config error: {0}")]
    Config(#[from] toml::de::Error),
}

impl Error {
    /// Short machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Schema(_) => "schema",
            Error::Parse { .. } => "parse",
            Error::Integrity(_) => "integrity",
            Error::NotFound(_) => "not_found",
            Error::InvalidAction { .. } => "invalid_action",
            Error::Discretization(_) => "discretization",
            Error::EmptyData(_) => "empty_data",
            Error::Training(_) => "training",
            Error::UnsupportedSchema(_) => "unsupported_schema",
            Error::Resource(_) => "resource",
            Error::Validation(_) => "validation",
            Error::Resolution { .. } => "resolution",
            Error::QuerySyntax { .. } => "query_syntax",
            Error::Unavailable(_) => "unavailable",
            Error::Render(_) => "render",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Sqlite(_) => "sqlite",
            Error::Csv(_) => "csv",
            Error::Config(_) => "config",
        }
    }
}
