use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("qubit count mismatch: expected {expected}, got {got}")]
    QubitMismatch { expected: usize, got: usize },

    #[error("generator does not square to the identity")]
    NotInvolutory,

    #[error("{n} qubits exceeds the dense limit of {max}")]
    TooManyQubits { n: usize, max: usize },

    #[error("parameter count mismatch: expected {expected}, got {got}")]
    ParamMismatch { expected: usize, got: usize },

    #[error("term {0} has no X or Y; use the diagonal estimator")]
    DiagonalTerm(String),

    #[error("no samples recorded for term {0}")]
    MissingSamples(String),

    #[error("vanishing denominator ({0:e}) in energy ratio")]
    ZeroDenominator(f64),

    #[error("division by zero: {0}")]
    DivisionByZero(&'static str),

    #[error("strength {0} outside [0, 1]")]
    InvalidStrength(f64),

    #[error("invalid bitstring {0:?}")]
    InvalidBitstring(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("training diverged at epoch {epoch}: energy {energy}")]
    Diverged { epoch: usize, energy: f64 },

    #[error("fit error: {0}")]
    Fit(String),

    #[error("sampled estimation does not support non-unitary transformations")]
    NonUnitarySampling,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}
