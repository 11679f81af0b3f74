use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by the simulator, the models, and the harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// The DC operating-point solve had no unique solution (e.g. a floating
    /// network with no path to ground).
    #[error("singular steady-state solve: {0}")]
    SingularSystem(String),

    /// A state variable left the finite range during integration.
    #[error("numerical divergence at t = {time:.6e} s ({what})")]
    Diverged { time: f64, what: String },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("model failure: {0}")]
    ModelFailure(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
