use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed input. `location` is a 1-based line number for text formats
    /// and a byte offset for binary payloads.
    #[error("format error at {location}: {message}")]
    Format { location: Location, message: String },

    #[error("point cloud is empty")]
    EmptyCloud,

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("pixel ({u}, {v}) is outside the {width}x{height} image")]
    OutOfBounds { u: i64, v: i64, width: usize, height: usize },

    #[error("image of {width}x{height} exceeds the dimension cap {cap}")]
    Resolution { width: u64, height: u64, cap: usize },

    #[error("no point projected inside the image")]
    EmptyImage,

    #[error("no symmetric observed pair within {search_limit} rows of ({u}, {v})")]
    Interpolation { u: usize, v: usize, search_limit: usize },

    #[error("no complete marker feature group")]
    NoFeatures,

    #[error("pose needs at least 3 point pairs, got {0}")]
    InsufficientPoints(usize),

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("none of the detected markers is in the marker map")]
    NoCorrespondence,

    #[error("no ray hit any scene surface")]
    EmptyScene,

    #[error("invalid codebook: {0}")]
    Codebook(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Location {
    Line(usize),
    Byte(usize),
    Unknown,
}

impl std::fmt::Display for Location {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Location::Line(l) => write!(f, "line {l}"),
            Location::Byte(b) => write!(f, "byte {b}"),
            Location::Unknown => f.write_str("unknown position"),
        }
    }
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn format_at_line(line: usize, message: impl Into<String>) -> Self {
        Error::Format { location: Location::Line(line), message: message.into() }
    }

    pub(crate) fn format_at_byte(offset: usize, message: impl Into<String>) -> Self {
        Error::Format { location: Location::Byte(offset), message: message.into() }
    }

    pub(crate) fn format(message: impl Into<String>) -> Self {
        Error::Format { location: Location::Unknown, message: message.into() }
    }
}
