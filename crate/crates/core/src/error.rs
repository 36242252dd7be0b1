use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("population of size {population} is smaller than the set size {set_size}")]
    PopulationTooSmall { population: usize, set_size: usize },

    #[error("brute-force enumeration limited to n <= {limit}, got n = {n}")]
    TooLarge { n: usize, limit: usize },

    #[error("quadrature did not reach tolerance {tol:e} on [{lo}, {hi}]")]
    Quadrature { lo: f64, hi: f64, tol: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("column `{0}` not found in input")]
    MissingColumn(String),

    #[error("malformed input: {0}")]
    Malformed(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
