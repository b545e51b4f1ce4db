use thiserror::Error;

/// Errors shared across the lab. Parse failures keep a distinct variant per
/// cause so that dialect incompatibility is machine-detectable.
#[derive(Debug, Error)]
pub enum LabError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("input error: {0}")]
    Input(String),

    #[error("malformed JSON: {0}")]
    MalformedJson(String),

    #[error("unknown key {key:?} in record {index}")]
    UnknownKey { key: String, index: usize },

    #[error("unit {0:?} not in registry")]
    UnknownUnit(String),

    #[error("missing mandatory field {field:?} in record {index}")]
    MissingField { field: String, index: usize },

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("unknown symbol {0:?}")]
    UnknownSymbol(String),

    #[error("metadata error: {0}")]
    Metadata(String),

    #[error("dialect incompatibility: decoder for {expected:?} received {got:?} message")]
    Incompatibility { expected: String, got: String },

    #[error("missing data: {0}")]
    MissingData(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("training error: {0}")]
    Training(String),

    #[error("service error: {0}")]
    Service(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, LabError>;
