use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("fractional order {0} outside (0, 1]")]
    InvalidOrder(f64),
    #[error("fractional order {0} outside (0, 1): the normalization constant has a pole at 1")]
    GammaPole(f64),
    #[error("only dimension n = 1 is supported, got {0}")]
    UnsupportedDimension(usize),
    #[error("grid needs at least one interior node")]
    EmptyGrid,
    #[error("vector length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("requested {requested} modes but only {available} are available")]
    ModesOutOfRange { requested: usize, available: usize },
    #[error("eigensolver did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },
    #[error("invalid observation region: {0}")]
    InvalidRegion(String),
    #[error("observation region contains no grid nodes")]
    EmptyRegion,
    #[error("time horizon must be positive, got {0}")]
    InvalidHorizon(f64),
    #[error("invalid source signal: {0}")]
    InvalidSource(String),
    #[error("state is identically zero")]
    ZeroState,
    #[error(
        "observability constant {constant:e} is below {threshold:e}: uncontrollable at this truncation"
    )]
    Uncontrollable { constant: f64, threshold: f64 },
    #[error("Gramian condition number {condition:e} exceeds the limit {limit:e}")]
    IllConditioned { condition: f64, limit: f64 },
    #[error("eigenpair {index} failed the residual check (relative residual {residual:e})")]
    InaccurateEigenpair { index: usize, residual: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
