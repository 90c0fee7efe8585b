use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad error category, used by the CLI to choose an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Io,
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("file not found: {0}")]
    FileNotFound(PathBuf),
    #[error("cannot decode {path}: {message}")]
    Decode { path: PathBuf, message: String },
    #[error("unsupported bit depth {depth} in {path}; only 8-bit images are accepted")]
    UnsupportedBitDepth { path: PathBuf, depth: u8 },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("negative blend weight {0}")]
    NegativeWeight(f64),
    #[error("gaussian sigma must be finite and > 0, got {0}")]
    InvalidSigma(f64),
    #[error("crop {crop_w}x{crop_h} does not fit in {width}x{height} image")]
    CropTooLarge {
        crop_w: usize,
        crop_h: usize,
        width: usize,
        height: usize,
    },
    #[error("invalid image: {0}")]
    InvalidImage(String),

    #[error("invalid layer parameters: {0}")]
    InvalidParams(String),
    #[error("layer has no strands")]
    EmptyLayer,

    #[error("layer count must be >= 1")]
    InvalidCount,
    #[error("{weights} weights given for {layers} layers")]
    WeightCountMismatch { weights: usize, layers: usize },
    #[error("invalid blend weights: {0}")]
    InvalidWeights(String),
    #[error("incompatible layers in stack: {}", offending.join(", "))]
    IncompatibleLayers { offending: Vec<String> },

    #[error("empty stack")]
    EmptyStack,
    #[error("non-positive input: {0}")]
    NonPositiveInput(String),

    #[error("image too small for feature extraction: {width}x{height} (need at least 8x8)")]
    ImageTooSmall { width: usize, height: usize },
    #[error("feature row for unknown id {0:?}")]
    UnknownId(String),
    #[error("ragged feature rows: line {line} has {found} values, expected {expected}")]
    RaggedRows {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("parse error: {0}")]
    Parse(String),

    #[error("dataset too small: {0}")]
    EmptyDataset(String),
    #[error("non-finite value in {0}")]
    NonFiniteInput(String),
    #[error("unsupported model format version {found} (expected {expected})")]
    VersionMismatch { found: i64, expected: u32 },
    #[error("malformed model file: {0}")]
    Schema(String),

    #[error("confusion matrix is empty")]
    EmptyMatrix,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("empty input")]
    Empty,

    #[error("class {class_id} has {count} samples; at least 3 are needed for a split")]
    ClassTooSmall { class_id: usize, count: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::FileNotFound(path)
        } else {
            Error::Io { path, source }
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::FileNotFound(_) | Error::Io { .. } => ErrorKind::Io,
            Error::Config(_) | Error::InvalidParams(_) => ErrorKind::Config,
            Error::Stage { source, .. } => source.kind(),
            _ => ErrorKind::Data,
        }
    }
}
