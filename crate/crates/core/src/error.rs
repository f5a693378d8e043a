use std::path::PathBuf;

/// Coarse error category, used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Protocol,
    Internal,
}

impl ErrorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorKind::Config => "config",
            ErrorKind::Data => "data",
            ErrorKind::Protocol => "protocol",
            ErrorKind::Internal => "internal",
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("format error in {path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("insufficient data in {path}: {message}")]
    InsufficientData { path: PathBuf, message: String },

    #[error("manifest {path}, line {line}: {message}")]
    Manifest {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("incompatible codebook: {0}")]
    Incompatible(String),

    #[error("cannot train: {0}")]
    Training(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("protocol violation: {0}")]
    Protocol(String),

    #[error("checksum mismatch: file is truncated or corrupted")]
    Checksum,

    #[error("unsupported container version {found} (expected {expected})")]
    UnsupportedVersion { found: u32, expected: u32 },

    #[error("not a {expected} file: {message}")]
    Container { expected: &'static str, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) | Error::Incompatible(_) => ErrorKind::Config,
            Error::Protocol(_) => ErrorKind::Protocol,
            Error::Contract(_) => ErrorKind::Internal,
            Error::Format { .. }
            | Error::InsufficientData { .. }
            | Error::Manifest { .. }
            | Error::Training(_)
            | Error::Shape(_)
            | Error::Checksum
            | Error::UnsupportedVersion { .. }
            | Error::Container { .. }
            | Error::Io { .. }
            | Error::Json(_) => ErrorKind::Data,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
