use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("no samples")]
    NoSamples,

    #[error("non-finite score for sample {sample_id}")]
    NonFinite { sample_id: String },

    #[error("score {score} for sample {sample_id} outside the {scale} scale")]
    ScaleViolation {
        sample_id: String,
        scale: String,
        score: f64,
    },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("statistic out of range: raw distance skewness {0}")]
    StatOutOfRange(f64),

    #[error("schema error at line {line}: {message}")]
    Schema { line: usize, message: String },

    #[error("scenario has no entry for key {key}")]
    ScenarioKey { key: String },

    #[error("replay transcript has no entry for key {key}")]
    ReplayKey { key: String },

    #[error("missing template slot {{{0}}}")]
    MissingSlot(String),

    #[error("no boxed answer")]
    NoAnswer,

    #[error("feedback not usable")]
    UnusableFeedback,

    #[error("transport failure after {attempts} attempts: {message}")]
    Transport { attempts: u32, message: String },

    #[error("http status {status}")]
    HttpStatus { status: u16 },

    #[error("missing score for sample {sample_id} at key {key}")]
    MissingScore { sample_id: String, key: u32 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}
