use std::path::PathBuf;

/// Errors produced by the restoration library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid signal: {0}")]
    InvalidSignal(String),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("unsupported WAV encoding: {0}")]
    UnsupportedEncoding(String),

    #[error("failed to read or write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("WAV error in {path}: {message}")]
    Wav { path: PathBuf, message: String },

    #[error("target {target_db} dB is not achievable: {reason}")]
    Unachievable { target_db: f64, reason: String },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("guidance blow-up at step {step} (residual norm {residual_norm}): {what}")]
    GuidanceBlowUp {
        step: usize,
        residual_norm: f64,
        what: String,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("malformed denoiser file: {0}")]
    DenoiserFormat(String),

    #[error("config error at line {line}: {message}")]
    Config { line: usize, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
