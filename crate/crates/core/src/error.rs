use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("degenerate geometry: computed gap {0} is not positive")]
    DegenerateGeometry(f64),

    #[error("invalid tensor: {0}")]
    InvalidTensor(String),

    #[error("ellipticity lost: smallest eigenvalue {0} on symmetric matrices is not positive")]
    EllipticityLost(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("assembly failure: {0}")]
    Assembly(String),

    #[error("conjugate gradient did not converge after {iterations} iterations (relative residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("load is incompatible with the operator kernel (constant-mode component {0:e})")]
    IncompatibleLoad(f64),

    #[error("corrector solve ({j}, {beta}) failed: {source}")]
    Corrector {
        j: usize,
        beta: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("mollifier under-resolved: eps = {eps} but grid spacing is {h} (need eps >= 2h)")]
    UnderResolved { eps: f64, h: f64 },

    #[error("degenerate weight: weighted normal equations are singular on the ball")]
    DegenerateWeight,

    #[error("invalid fit data: {0}")]
    InvalidFit(String),

    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("{0}")]
    Report(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}
