use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter or index lies outside the domain an operation accepts.
    #[error("domain error: {0}")]
    Domain(String),

    /// An object failed validation while being built.
    #[error("construction error: {0}")]
    Construction(String),

    /// The family does not declare the smoothness an operation needs.
    #[error("capability error: {0}")]
    Capability(String),

    /// An observation has zero probability under the model.
    #[error("inference error: {0}")]
    Inference(String),

    /// Singular Fisher information, non-convergent eigensolver and similar refusals.
    #[error("numerical refusal: {0}")]
    Numerical(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn construction(msg: impl Into<String>) -> Self {
        Error::Construction(msg.into())
    }
}
