use thiserror::Error;

/// Errors shared across the simulator crate.
#[derive(Debug, Error)]
pub enum Error {
    /// An analysis step that needs at least one neighbor found none.
    #[error("no neighbors available for channel analysis")]
    NoNeighbors,

    /// A formula received a zero or negative quantity it must divide by.
    #[error("degenerate input: {0}")]
    DegenerateInput(&'static str),

    /// Bad configuration file contents or invalid parameter combination.
    #[error("config error: {0}")]
    Config(String),

    /// Malformed metrics CSV handed to `compare`.
    #[error("csv schema error: {0}")]
    Schema(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
