use thiserror::Error;

/// Errors raised by the simulator.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("exponential overflow: argument of magnitude {0:.3e}")]
    ExpOverflow(f64),
    #[error("localized lift too large: max |W_>| = {0:.3e}")]
    LocalizationOverflow(f64),
    #[error("no convergence: {0}")]
    NoConvergence(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("dense oracle refused: {0} degrees of freedom exceeds the cap of {1}")]
    OracleTooLarge(usize, usize),
    #[error("Monte Carlo estimate too noisy: relative standard error {0:.3e}")]
    MonteCarlo(f64),
    #[error("malformed container: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
