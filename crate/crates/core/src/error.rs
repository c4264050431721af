use std::io;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(#[from] io::Error),

    #[error("stereo input required (got {0} channels)")]
    NotStereo(usize),

    #[error("invalid buffer: {0}")]
    InvalidBuffer(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("length mismatch: expected {expected} samples, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("dial index {0} out of range 0..=30")]
    DialOutOfRange(i64),

    #[error("too short to gate: {0} samples, need at least one 400 ms block")]
    TooShortToGate(usize),

    #[error("silent input: loudness is not finite")]
    Silent,
}

impl Error {
    /// True for errors caused by the caller's input rather than the environment.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::NotStereo(_)
                | Error::Config(_)
                | Error::DialOutOfRange(_)
                | Error::LengthMismatch { .. }
                | Error::InvalidBuffer(_)
        )
    }
}

impl From<hound::Error> for Error {
    fn from(err: hound::Error) -> Self {
        match err {
            // hound reports short sample data as a plain error with this text
            hound::Error::IoError(e)
                if e.kind() == io::ErrorKind::UnexpectedEof
                    || e.to_string().contains("Failed to read enough bytes") =>
            {
                Error::Parse(format!("truncated file: {e}"))
            }
            hound::Error::IoError(e) => Error::Io(e),
            hound::Error::Unsupported => Error::UnsupportedFormat("codec not supported".into()),
            hound::Error::FormatError(msg) => Error::Parse(msg.to_string()),
            hound::Error::TooWide => Error::UnsupportedFormat("sample width too large".into()),
            other => Error::Parse(other.to_string()),
        }
    }
}
