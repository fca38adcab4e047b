use std::path::PathBuf;

use thiserror::Error;

use crate::types::{Finger, Label};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("row {row}: embedding has dimension {found}, expected {expected}")]
    DimensionMismatch { row: usize, expected: usize, found: usize },

    #[error("row {row}: non-finite value in {field}")]
    NonFinite { row: usize, field: &'static str },

    #[error("row {row}: pad_score {value} outside [0, 1]")]
    PadScoreOutOfRange { row: usize, value: f64 },

    #[error("row {row}: duplicate sample {user}/{finger}/{index}")]
    DuplicateSample { row: usize, user: String, finger: Finger, index: u32 },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("query has dimension {found}, expected {expected}")]
    QueryDimension { expected: usize, found: usize },

    #[error("no candidates left after exclusion")]
    NoCandidates,

    #[error("batch query {index} failed: {source}")]
    BatchQuery {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("probe row {row}: {source}")]
    Probe {
        row: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("missing class {0}")]
    MissingClass(Label),

    #[error("no templates for claimed finger {finger} of user {user}")]
    NoTemplatesForFinger { user: String, finger: Finger },

    #[error("gallery user {0} also appears in the validation set")]
    UserCollision(String),

    #[error("no gallery for claimed user {0}")]
    UnknownGallery(String),

    #[error("gallery templates must be bona fide (row {row})")]
    GalleryLabel { row: usize },

    #[error("invalid threshold {0}: must lie in (0, 1)")]
    InvalidThreshold(f64),

    #[error("invalid LUT: {0}")]
    InvalidLut(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("empty {0} list")]
    EmptyScores(&'static str),

    #[error("{0}")]
    Json(#[from] serde_json::Error),

    #[error("{0}")]
    Csv(#[from] csv::Error),
}
