use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid power scale {value} for RU {ru}")]
    InvalidScale { ru: usize, value: f64 },

    #[error("degenerate channel: {0}")]
    DegenerateChannel(String),

    #[error("precoding error: {0}")]
    Precoding(String),

    #[error("pilot design error: {0}")]
    PilotDesign(String),

    #[error("channel estimation error: {0}")]
    Estimation(String),

    #[error("search space of {required} evaluations exceeds the cap of {cap}")]
    Complexity { required: u128, cap: u128 },

    #[error("metric error: {0}")]
    Metric(String),

    #[error("non-finite gradient at step {step}: {detail}")]
    NonFinite { step: usize, detail: String },

    #[error("training diverged at epoch {epoch}: loss {loss} vs initial {initial}")]
    Divergence { epoch: usize, loss: f64, initial: f64 },

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Configuration error with the given message.
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
