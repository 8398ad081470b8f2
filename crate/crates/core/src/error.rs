//! Error type shared across the engine.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by the pricing engine.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input file (bad row, wrong column count, unparsable field).
    #[error("parse error: {0}")]
    Parse(String),

    /// Input parsed but violates a snapshot invariant.
    #[error("validation error: {0}")]
    Validation(String),

    /// Configuration values outside their admissible range.
    #[error("config error: {0}")]
    Config(String),

    /// A numerical routine produced an unusable value.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// Smile calibration failed to reach the required fit quality.
    #[error("calibration error: {0}")]
    Calibration(String),

    /// Extracted density lost too much mass to arbitrage clipping.
    #[error("arbitrage error: {0}")]
    Arbitrage(String),

    /// A marginal law is degenerate for the requested operation.
    #[error("law error: {0}")]
    Law(String),

    /// Basket subset was empty.
    #[error("empty basket subset")]
    EmptySubset,

    /// Problem too large for exhaustive enumeration.
    #[error("size error: {0}")]
    Size(String),

    /// Required engine state (uniforms, permutations) is missing.
    #[error("state error: {0}")]
    State(String),

    /// External-asset donor column is part of the priced basket.
    #[error("donor column {0} is part of the basket")]
    DonorInBasket(usize),

    /// Payoff not supported by the requested pricer.
    #[error("unsupported payoff: {0}")]
    UnsupportedPayoff(String),

    /// Sample set unusable for density estimation.
    #[error("degenerate samples: {0}")]
    DegenerateSamples(String),

    /// Underlying I/O failure.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stage-specific process exit code used by the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Parse(_) | Error::Validation(_) => 3,
            Error::Calibration(_) | Error::Arbitrage(_) | Error::Law(_) => 4,
            Error::Numerical(_) | Error::DegenerateSamples(_) => 5,
            Error::EmptySubset
            | Error::State(_)
            | Error::DonorInBasket(_)
            | Error::UnsupportedPayoff(_)
            | Error::Size(_) => 6,
            Error::Io(_) => 7,
        }
    }
}
