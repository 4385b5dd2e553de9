use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("scalar index {index} outside 1..={max}")]
    IndexOutOfRange { index: u64, max: u64 },

    #[error("index component {value} on axis {axis} outside 1..={max}")]
    ComponentOutOfRange { axis: usize, value: u64, max: u64 },

    #[error("expected a {expected}-dimensional value, got {got} components")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("dimension {dim} unsupported, must be 1..={max}")]
    UnsupportedDimension { dim: usize, max: usize },

    #[error("integer overflow in index arithmetic")]
    Overflow,

    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("cutoff radius {0} must be finite and positive")]
    InvalidCutoff(f64),

    #[error("grid of {cells} cells exceeds the configured limit of {limit}")]
    GridTooLarge { cells: u64, limit: u64 },

    #[error("particle {id} at {x:?} lies outside the domain")]
    OutOfDomain { id: u64, x: Vec<f64> },

    #[error("particle {id} moved {moved} in one transition, beyond the cutoff {cutoff}")]
    MovementExceedsCutoff { id: u64, moved: f64, cutoff: f64 },

    #[error(
        "particle {id} on process {process} left the adjacent cell block \
         (axis {axis} offset {offset})"
    )]
    CompartmentEscape {
        process: u64,
        id: u64,
        axis: usize,
        offset: i64,
    },

    #[error("transition requested on a state whose stop condition already holds")]
    AlreadyStopped,

    #[error("no stop after {limit} transitions")]
    StepLimitExceeded { limit: u64 },

    #[error("unknown method '{0}'")]
    UnknownMethod(String),

    #[error("invalid method parameters: {0}")]
    InvalidParams(String),

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("{value} is not divisible by {divisor}")]
    NotDivisible { value: u64, divisor: u64 },

    #[error("invalid sweep '{0}', expected start:end:step with start >= 1, step >= 1")]
    InvalidSweep(String),
}

impl Error {
    /// True for errors caused by malformed input rather than by a
    /// constraint breach observed while running.
    pub fn is_invalid_input(&self) -> bool {
        matches!(
            self,
            Error::InvalidDomain(_)
                | Error::InvalidCutoff(_)
                | Error::UnsupportedDimension { .. }
                | Error::UnknownMethod(_)
                | Error::InvalidParams(_)
                | Error::InvalidInstance(_)
                | Error::NotDivisible { .. }
                | Error::InvalidSweep(_)
        )
    }
}
