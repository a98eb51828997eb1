use std::time::Duration;

use thiserror::Error;

/// Errors raised by grid construction, the solvers and the schedule tools.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("J must divide Nt (J = {blocks}, Nt = {steps})")]
    BlocksDoNotDivide { blocks: usize, steps: usize },

    #[error("interface {index} at x = {x} is not a grid node")]
    OffGrid { index: usize, x: f64 },

    #[error("degenerate subdomain: {0}")]
    Degenerate(String),

    #[error("series length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("transport: {0}")]
    Transport(String),

    #[error("deadlock: no message matching {expected} after {timeout:?}")]
    Deadlock { expected: String, timeout: Duration },

    #[error("schedule: {0}")]
    Schedule(String),

    #[error("worker failed: {0}")]
    Worker(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::LengthMismatch { expected, got })
    }
}
