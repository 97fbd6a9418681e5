use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("unknown basis family `{0}`")]
    UnknownBasis(String),

    #[error("basis architecture has no payoff column")]
    MissingPayoffColumn,

    #[error("stage {stage}: non-finite {what} at iteration {iteration}")]
    NonFinite {
        stage: usize,
        iteration: usize,
        what: &'static str,
    },

    #[error("config: {0}")]
    Config(String),

    #[error("format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
