use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite value: {0}")]
    Numeric(String),

    #[error("inconsistent state: {0}")]
    State(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("ingestion error at row {row}, column `{column}`: {message}")]
    Ingest {
        row: usize,
        column: String,
        message: String,
    },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("no features survived the completeness filter (threshold {threshold})")]
    EmptySchema { threshold: f64 },

    #[error("age outside configured groups for ids: {}", .ids.join(", "))]
    AgeAssignment { ids: Vec<String> },

    #[error("labeling error: {0}")]
    Labeling(String),

    #[error("split error: {0}")]
    Split(String),

    #[error("triplet sampling error: {0}")]
    Sampling(String),

    #[error("zero pooled variance with unequal means ({mean_a} vs {mean_b})")]
    DegenerateVariance { mean_a: f64, mean_b: f64 },

    #[error("fit error: {0}")]
    Fit(String),

    #[error("training diverged at epoch {epoch}, batch {batch}: hinge={hinge}, reg={reg}")]
    Diverged {
        epoch: usize,
        batch: usize,
        hinge: f64,
        reg: f64,
    },

    #[error("parse error on line {line}: {message}")]
    Format { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub(crate) fn format(line: usize, msg: impl Into<String>) -> Self {
        Error::Format {
            line,
            message: msg.into(),
        }
    }
}
