use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("cell ({row}, {col}) is outside the grid")]
    OutOfBounds { row: i64, col: i64 },
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("demonstration {index} has {len} states, horizon needs {needed}")]
    DemoTooShort {
        index: usize,
        len: usize,
        needed: usize,
    },
    #[error("demonstration {index} does not start at the planning start cell")]
    DemoStart { index: usize },
    #[error("training diverged at iteration {iteration}")]
    Diverged { iteration: usize },
    #[error("enumeration guard exceeded: 9^{horizon} paths")]
    GuardExceeded { horizon: usize },
    #[error("scene: {0}")]
    Scene(String),
}
