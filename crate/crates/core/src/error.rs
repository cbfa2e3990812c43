use std::io;
use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),

    #[error("I/O error on {path}: {source}")]
    IoAt {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("invalid decode target: {0}")]
    InvalidTarget(String),

    #[error("bad stream format: {0}")]
    Format(String),

    #[error("stream truncated at byte offset {offset}: {what}")]
    Truncated { offset: u64, what: String },

    #[error("frame index {index} out of range (n_frames = {n_frames})")]
    FrameOutOfRange { index: u64, n_frames: u64 },

    #[error("invalid bin count: {0}")]
    InvalidBins(usize),

    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("frame {width}x{height} is smaller than one HOG block ({block_px}x{block_px} px)")]
    FrameTooSmall {
        width: u32,
        height: u32,
        block_px: u32,
    },

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("empty training data")]
    EmptyData,

    #[error("label {0} is not binary")]
    Label(u8),

    #[error("degenerate training data: {0}")]
    Degenerate(String),

    #[error("unsupported format version {0:?}")]
    Version(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("inconsistent input: {0}")]
    Consistency(String),

    #[error("index {index} out of range: {what}")]
    Range { index: u64, what: String },

    #[error("undefined mean: total ground-truth weight is zero")]
    UndefinedMean,

    #[error("not found: {0}")]
    NotFound(String),

    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io_at(path: impl Into<PathBuf>) -> impl FnOnce(io::Error) -> Error {
        let path = path.into();
        move |source| Error::IoAt { path, source }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
