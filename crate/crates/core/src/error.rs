use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("ingestion error at row {row}, column `{column}`: {message}")]
    Ingestion {
        row: usize,
        column: String,
        message: String,
    },

    #[error("invalid target: {0}")]
    InvalidTarget(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("underdetermined confound design: {rows} training rows for {confounds} confounds")]
    Underdetermined { rows: usize, confounds: usize },

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("non-finite input: {0}")]
    NonFinite(String),

    #[error("simulated confound missed r={requested} after {retries} retries (last r={achieved:.4})")]
    ConfoundSimulation {
        requested: f64,
        achieved: f64,
        retries: usize,
    },

    #[error("wrong model kind: expected {expected}, found {found}")]
    WrongModelKind { expected: String, found: String },

    #[error("inconclusive: {0}")]
    Inconclusive(String),

    #[error("unsupported report schema version {0}")]
    SchemaVersion(u64),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
