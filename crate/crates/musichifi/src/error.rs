//! Crate-wide error type.

use std::path::PathBuf;

/// Errors produced by any module in this crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Invalid audio/file format (bad WAV header, unsupported encoding, ...).
    #[error("format error: {0}")]
    Format(String),

    /// Invalid configuration (STFT/mel/generator settings that violate an invariant).
    #[error("config error: {0}")]
    Config(String),

    /// Tensor shape mismatch or an operation that would produce an empty result.
    #[error("shape error: {0}")]
    Shape(String),

    /// Invalid parameter value (negative taps, alpha <= 0, ...).
    #[error("parameter error: {0}")]
    Parameter(String),

    /// Mismatched dimensions between two buffers (length/rate/channel count).
    #[error("dimension error: {0}")]
    Dimension(String),

    /// Input data unusable for the requested operation (clip too short, silent input, ...).
    #[error("data error: {0}")]
    Data(String),

    /// Violation of an API contract (non-scalar loss, empty score list, ...).
    #[error("contract error: {0}")]
    Contract(String),

    /// Checkpoint file problems (bad magic, truncation, unknown parameter, ...).
    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    /// Evaluation preconditions violated (rate mismatch, silent reference, ...).
    #[error("eval error: {0}")]
    Eval(String),

    /// A cascade stage rejected its input; carries the stage name.
    #[error("stage error [{stage}]: {message}")]
    Stage {
        stage: &'static str,
        message: String,
    },

    /// Training diverged (non-finite loss).
    #[error("training diverged: {0}")]
    Diverged(String),

    /// I/O failure with the offending path.
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
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
