use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    // Y4M / raw video
    #[error("malformed Y4M magic: expected \"YUV4MPEG2\", found {0:?}")]
    MalformedMagic(String),
    #[error("malformed Y4M header: {0}")]
    MalformedHeader(String),
    #[error("unsupported chroma format {0:?} (only 4:2:0 is supported)")]
    UnsupportedChroma(String),
    #[error("truncated frame payload in frame {frame}")]
    TruncatedFrame { frame: usize },
    #[error("sequence has no frames")]
    EmptySequence,
    #[error("invalid frame: {0}")]
    InvalidFrame(String),
    #[error("geometry mismatch: {0}")]
    GeometryMismatch(String),

    // parameter adaptation
    #[error("invalid bit depth shift: {0}")]
    InvalidShift(String),
    #[error("odd luma dimensions {width}x{height} cannot be halved")]
    OddDimensions { width: usize, height: usize },

    // host codec
    #[error("QP {0} outside [0, 51]")]
    QpOutOfRange(i32),
    #[error("frame dimensions {width}x{height} are not multiples of 8")]
    NotBlockAligned { width: usize, height: usize },
    #[error("corrupt payload: {0}")]
    CorruptPayload(String),
    #[error("failed to spawn {program}: {source}")]
    SpawnFailure {
        program: String,
        #[source]
        source: std::io::Error,
    },
    #[error("external command {program} exited with status {status}")]
    ExternalStatus { program: String, status: String },
    #[error("external command {program} produced no output file {path}")]
    MissingOutput { program: String, path: PathBuf },
    #[error("external command {program} timed out after {seconds} s")]
    Timeout { program: String, seconds: u64 },
    #[error("invalid command template: {0}")]
    InvalidTemplate(String),

    // nn
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("backward called without a recorded forward pass")]
    BackwardWithoutForward,
    #[error("invalid checkpoint: {0}")]
    InvalidCheckpoint(String),

    // qmo / restoration
    #[error("source too small: {0}")]
    SourceTooSmall(String),
    #[error("empty dataset")]
    EmptyDataset,
    #[error("expected {expected} frames in clip, got {got}")]
    WrongFrameCount { expected: usize, got: usize },
    #[error("no decisions to segment")]
    EmptyDecisions,
    #[error("no restoration model exists for mode M0")]
    NoModelForM0,
    #[error("no restoration model for mode {mode} at QP {qp}")]
    MissingModel { mode: String, qp: u8 },
    #[error("invalid rate sweep: {0}")]
    InvalidSweep(String),
    #[error("restoration model mismatch: {0}")]
    ModelMismatch(String),

    // metrics
    #[error("curve needs at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("invalid curve: {0}")]
    InvalidCurve(String),
    #[error("curves do not overlap: {0}")]
    NoOverlap(String),
    #[error("metric mismatch: {0} vs {1}")]
    MetricMismatch(String, String),
    #[error("malformed CSV row {row}: {msg}")]
    MalformedRow { row: usize, msg: String },
    #[error("duplicate point for {key} at QP {qp}")]
    DuplicatePoint { key: String, qp: u8 },
    #[error("no anchor curve for sequence {0:?}")]
    UnmatchedSequence(String),

    // container
    #[error("bad container magic {0:02x?}")]
    BadMagic([u8; 4]),
    #[error("unsupported container version {0}")]
    VersionMismatch(u8),
    #[error("truncated container {section} at offset {offset}")]
    Truncated { section: &'static str, offset: usize },
    #[error("truncated payload of segment {segment} at offset {offset}")]
    TruncatedPayload { segment: usize, offset: usize },
    #[error("invalid mode flag byte 0x{0:02x}")]
    InvalidModeFlag(u8),
    #[error("segment frame counts sum to {sum}, header says {expected}")]
    SegmentSumMismatch { sum: u64, expected: u64 },
    #[error("invalid container: {0}")]
    InvalidContainer(String),

    // pipeline
    #[error("configuration error: {0}")]
    Config(String),
    #[error("segment {segment} (frames {start}..{end}): {source}")]
    Segment {
        segment: usize,
        start: usize,
        end: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Stable kebab-case identifier, used for the machine-readable error
    /// line printed by the command-line tool.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::MalformedMagic(_) => "malformed-magic",
            Error::MalformedHeader(_) => "malformed-header",
            Error::UnsupportedChroma(_) => "unsupported-chroma",
            Error::TruncatedFrame { .. } => "truncated-frame",
            Error::EmptySequence => "empty-sequence",
            Error::InvalidFrame(_) => "invalid-frame",
            Error::GeometryMismatch(_) => "geometry-mismatch",
            Error::InvalidShift(_) => "invalid-shift",
            Error::OddDimensions { .. } => "odd-dimensions",
            Error::QpOutOfRange(_) => "qp-out-of-range",
            Error::NotBlockAligned { .. } => "not-block-aligned",
            Error::CorruptPayload(_) => "corrupt-payload",
            Error::SpawnFailure { .. } => "spawn-failure",
            Error::ExternalStatus { .. } => "external-status",
            Error::MissingOutput { .. } => "missing-output",
            Error::Timeout { .. } => "timeout",
            Error::InvalidTemplate(_) => "invalid-template",
            Error::ShapeMismatch(_) => "shape-mismatch",
            Error::BackwardWithoutForward => "backward-without-forward",
            Error::InvalidCheckpoint(_) => "invalid-checkpoint",
            Error::SourceTooSmall(_) => "source-too-small",
            Error::EmptyDataset => "empty-dataset",
            Error::WrongFrameCount { .. } => "wrong-frame-count",
            Error::EmptyDecisions => "empty-decisions",
            Error::NoModelForM0 => "no-model-for-m0",
            Error::MissingModel { .. } => "missing-model",
            Error::InvalidSweep(_) => "invalid-sweep",
            Error::ModelMismatch(_) => "model-mismatch",
            Error::TooFewPoints(_) => "too-few-points",
            Error::InvalidCurve(_) => "invalid-curve",
            Error::NoOverlap(_) => "no-overlap",
            Error::MetricMismatch(..) => "metric-mismatch",
            Error::MalformedRow { .. } => "malformed-row",
            Error::DuplicatePoint { .. } => "duplicate-point",
            Error::UnmatchedSequence(_) => "unmatched-sequence",
            Error::BadMagic(_) => "bad-magic",
            Error::VersionMismatch(_) => "version-mismatch",
            Error::Truncated { .. } => "truncated",
            Error::TruncatedPayload { .. } => "truncated-payload",
            Error::InvalidModeFlag(_) => "invalid-mode-flag",
            Error::SegmentSumMismatch { .. } => "segment-sum-mismatch",
            Error::InvalidContainer(_) => "invalid-container",
            Error::Config(_) => "config",
            Error::Segment { source, .. } => source.code(),
        }
    }
}
