//! User-specific fingerprint presentation-attack detection with closeness codes.
//!
//! A probe is placed relative to the claimed user's enrolled templates and a
//! population validation set. Three nearest-neighbour tests give a 3-bit
//! code, and a look-up table estimated on the validation set maps each code
//! to bona fide, attack, or "defer to the generic PAD score".

pub mod closeness;
pub mod error;
pub mod fusion;
pub mod io;
pub mod lut;
pub mod metrics;
pub mod nn;
pub mod synth;
pub mod types;

pub use closeness::{training_code, training_codes, verification_code};
pub use error::{Error, Result};
pub use fusion::{
    fuse_analytic, fuse_empirical, fuse_empirical_at, ComparatorInput, FusionInput, FusionPoint, FusionReport,
    PadOperatingPoint, Trial,
};
pub use io::{load_dataset, load_records, Format, RecordFile};
pub use lut::{
    classify, classify_records, decide, estimate_lut, CellCounts, Decision, Lut, LutCell, PadDecisionRule, Verdict,
};
pub use metrics::{
    evaluate, hierarchy_stats, recalibrate_threshold, roc_from_scores, BitRates, ComparisonRow, HierarchyStats,
    PadReport, Recalibration, RocCurve, RocPoint,
};
pub use nn::{nearest, nearest_batch, Exclusion, Hit, Metric, NnResult, VectorSet};
pub use synth::{generate, split, Split, SynthConfig};
pub use types::{ClosenessCode, Dataset, EmbeddingRecord, Finger, Gallery, Label, SampleId};
