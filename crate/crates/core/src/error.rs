use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("cannot parse {0:?} as a decimal number")]
    Parse(String),
    #[error("{name} = {value} is outside [0, 1]")]
    Range { name: &'static str, value: String },
    #[error("need at least 2 categories, got {0}")]
    Category(u32),
    #[error("invalid radii: {0}")]
    Radii(String),
    #[error("value {value} is not a valid category for K = {k}")]
    Value { value: u32, k: u32 },
    #[error("flip probabilities not supported by this construction: {0}")]
    Boundary(String),
    #[error("multinomial counts sum to {got}, expected {expected}")]
    Count { got: u64, expected: u64 },
    #[error("budget {0} exceeds total region mass")]
    Budget(String),
    #[error("multi-class bounds are invalid: p_lower + runner_upper = {0} > 1")]
    Validity(String),
    #[error("vote record {0:?} has no samples")]
    EmptyVotes(String),
    #[error("enumeration of {0} points exceeds the oracle size guard")]
    Size(u128),
    #[error("vectors have different shapes: {0}")]
    Shape(String),
    #[error("classifier failed on sample {index}: {message}")]
    Classifier { index: u64, message: String },
    #[error("invalid sampler configuration: {0}")]
    Config(String),
}
