use thiserror::Error;

/// Errors raised by model construction, propagation and the study runner.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("dimension {dim} exceeds the limit {limit} for {context}")]
    DimensionLimit {
        dim: usize,
        limit: usize,
        context: &'static str,
    },

    #[error("shape error: {0}")]
    Shape(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error(
        "time {time} exceeds the usable bath window {window} (recurrence time {t_rec}){detail}"
    )]
    Window {
        time: f64,
        window: f64,
        t_rec: f64,
        detail: String,
    },

    #[error("degenerate recipe: {0}")]
    DegenerateRecipe(String),

    #[error("integration failed: {0}")]
    Integration(String),

    #[error("ill-conditioned resolvent at omega = {omega}: {detail}")]
    Conditioning { omega: f64, detail: String },

    #[error("fit refused: {0}")]
    Fit(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
