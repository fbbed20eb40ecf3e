use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid depth {0}: must be finite and > 0")]
    InvalidDepth(f64),

    #[error("point is behind the camera (z = {0})")]
    BehindCamera(f64),

    #[error("invalid intrinsics: {0}")]
    InvalidIntrinsics(String),

    #[error("shape mismatch: {left_width}x{left_height} vs {right_width}x{right_height}")]
    ShapeMismatch {
        left_width: usize,
        left_height: usize,
        right_width: usize,
        right_height: usize,
    },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("no jointly valid pixels")]
    EmptyMask,

    #[error("invalid scene: {0}")]
    InvalidScene(String),

    #[error("point is off the surface by {0} mm")]
    OffSurface(f64),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("empty report list")]
    EmptyReports,

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },
}

impl Error {
    pub(crate) fn parse(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            location: location.into(),
            message: message.into(),
        }
    }
}
