use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("invalid mobility: {0}")]
    InvalidMobility(String),

    #[error("non-finite value at node {index}")]
    NonFinite { index: isize },

    #[error("index {index} outside the ghost window -1..={upper}")]
    IndexOutOfRange { index: isize, upper: isize },

    #[error("x = {x} outside the extended domain [{lo}, {hi}]")]
    OutOfDomain { x: f64, lo: f64, hi: f64 },

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("matrix row {row} is not strictly diagonally dominant")]
    NotDiagonallyDominant { row: usize },

    #[error("zero pivot at row {row}")]
    ZeroPivot { row: usize },

    #[error("theta solve did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("grids are not nested: {0}")]
    NotNested(String),

    #[error("convergence level {level} (K = {k}) failed: {source}")]
    LevelFailed {
        level: usize,
        k: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{0}")]
    Study(String),
}

pub type Result<T> = std::result::Result<T, Error>;
