use thiserror::Error;

use crate::model::Wing;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown setting `{setting}` on wing {wing}")]
    UnknownSetting { wing: Wing, setting: String },

    #[error("{what} = {value} is outside {domain}")]
    Domain {
        what: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("lambda weights sum to {sum}, expected 1")]
    Normalization { sum: f64 },

    #[error("lambda row {row}: negative weight {weight}")]
    NegativeWeight { row: usize, weight: f64 },

    #[error("lambda row {row}: {field} = {value} is outside [0, 1]")]
    ProbabilityOutOfRange {
        row: usize,
        field: String,
        value: f64,
    },

    #[error(
        "lambda row {row}: joint({a}, {b}) = {joint} violates the Fréchet bounds [{lower}, {upper}]"
    )]
    FrechetViolation {
        row: usize,
        a: String,
        b: String,
        joint: f64,
        lower: f64,
        upper: f64,
    },

    #[error("malformed model document: {0}")]
    Malformed(String),

    #[error("a continuous lambda space needs a quadrature plan")]
    MissingQuadrature,

    #[error("unsupported input: {0}")]
    Unsupported(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
