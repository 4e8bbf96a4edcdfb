use thiserror::Error;

use crate::config::ConfigError;
use crate::cubefile::FormatError;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParam { name: &'static str, reason: String },

    #[error("inconsistent parameters: {0}")]
    InconsistentParams(String),

    #[error("time {t} s outside trajectory domain [{start}, {end}] s")]
    TimeOutOfRange { t: f64, start: f64, end: f64 },

    #[error("index {index} out of range ({len} available)")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("unknown scenario preset `{0}`")]
    UnknownPreset(String),

    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(String),

    #[error("channel ({p}, {q}) out of range for {num_tx}x{num_rx} array")]
    InvalidChannel {
        p: usize,
        q: usize,
        num_tx: usize,
        num_rx: usize,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("cube dimensions overflow the addressable size")]
    DimensionOverflow,

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error(transparent)]
    Config(#[from] ConfigError),

    #[error(transparent)]
    Format(#[from] FormatError),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    pub(crate) fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Process exit code for the command-line front end.
    ///
    /// 2 = configuration, 3 = I/O or file format, 4 = numeric or degenerate input.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Io { .. } | Error::Format(_) => 3,
            Error::Stage { source, .. } => source.exit_code(),
            _ => 4,
        }
    }
}
