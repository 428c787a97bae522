use std::path::PathBuf;

/// Error type shared by every stage of the toolkit.
///
/// Variants are grouped by the kind of failure they describe: `Validation`
/// covers inputs that were rejected before any processing started (bad
/// parameters, unreadable or malformed files), everything else is a
/// processing failure on data that looked plausible at the door. The CLI
/// maps this split onto exit codes.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("cannot read {path}: {reason}")]
    UnreadableFile { path: PathBuf, reason: String },

    #[error("unsupported raster format for {path}: {detail}")]
    UnsupportedFormat { path: PathBuf, detail: String },

    #[error("row {row} has {got} cells, expected {expected}")]
    RaggedRows {
        row: usize,
        expected: usize,
        got: usize,
    },

    #[error("cell at row {row}, column {col} is not numeric: {text:?}")]
    NonNumericCell {
        row: usize,
        col: usize,
        text: String,
    },

    #[error("image carries no temperature calibration")]
    NoCalibration,

    #[error("out of bounds: {detail}")]
    OutOfBounds { detail: String },

    #[error("search window {window_w}x{window_h} exceeds image {width}x{height}")]
    RectLargerThanImage {
        window_w: usize,
        window_h: usize,
        width: usize,
        height: usize,
    },

    #[error("degenerate keypoint configuration: {detail}")]
    DegenerateConfiguration { detail: String },

    #[error("dimensions differ: {a_w}x{a_h} vs {b_w}x{b_h}")]
    DimensionMismatch {
        a_w: usize,
        a_h: usize,
        b_w: usize,
        b_h: usize,
    },

    #[error("registration search space is empty: {detail}")]
    EmptySearchSpace { detail: String },

    #[error("no pixel reaches the segmentation cutoff")]
    EmptySegment,

    #[error("classification gallery is empty")]
    EmptyGallery,

    #[error("gallery holds {len} records, need at least {k}")]
    GalleryTooSmall { len: usize, k: usize },

    #[error("gallery record {id:?} carries no label")]
    UnlabeledGallery { id: String },

    #[error("phantom spec invalid: {detail}")]
    SpecOutOfBounds { detail: String },

    #[error("invalid parameters: {detail}")]
    InvalidParams { detail: String },

    #[error("cannot parse {what}: {detail}")]
    Parse { what: String, detail: String },

    #[error("cannot write {path}: {reason}")]
    UnwritableFile { path: PathBuf, reason: String },
}

impl Error {
    /// True for errors raised while validating inputs, false for failures
    /// that occurred during processing itself.
    pub fn is_validation(&self) -> bool {
        !matches!(
            self,
            Error::DegenerateConfiguration { .. }
                | Error::EmptySegment
                | Error::UnwritableFile { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
