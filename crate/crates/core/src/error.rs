use std::fmt;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("config line {line}: {message}")]
    ConfigParse { line: usize, message: String },

    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: Vec<u8> },

    #[error("unsupported container version {0}")]
    UnsupportedVersion(u32),

    #[error("truncated input: {0}")]
    Truncated(String),

    #[error("duplicate tensor name {0:?}")]
    DuplicateName(String),

    #[error("missing tensor {0:?}")]
    MissingTensor(String),

    #[error("malformed data: {0}")]
    Malformed(String),

    #[error("unknown speaker id {id} (table holds {count})")]
    UnknownSpeaker { id: usize, count: usize },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable machine-readable slug for the error kind.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Shape(_) => "shape",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::NonFinite(_) => "non_finite",
            Error::Config(_) => "config",
            Error::ConfigParse { .. } => "config_parse",
            Error::BadMagic { .. } => "bad_magic",
            Error::UnsupportedVersion(_) => "unsupported_version",
            Error::Truncated(_) => "truncated",
            Error::DuplicateName(_) => "duplicate_name",
            Error::MissingTensor(_) => "missing_tensor",
            Error::Malformed(_) => "malformed",
            Error::UnknownSpeaker { .. } => "unknown_speaker",
            Error::Io(_) => "io",
        }
    }

    pub(crate) fn shape(args: fmt::Arguments<'_>) -> Self {
        Error::Shape(args.to_string())
    }

    pub(crate) fn invalid(args: fmt::Arguments<'_>) -> Self {
        Error::InvalidArgument(args.to_string())
    }
}

macro_rules! shape_err {
    ($($arg:tt)*) => { $crate::error::Error::shape(format_args!($($arg)*)) };
}

macro_rules! invalid_arg {
    ($($arg:tt)*) => { $crate::error::Error::invalid(format_args!($($arg)*)) };
}

pub(crate) use {invalid_arg, shape_err};
