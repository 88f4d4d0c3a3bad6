//! Crate-wide error type.
//!
//! Variants are grouped by how a caller is expected to react: problems with
//! the *request* (bad parameters, unknown columns or segments) versus
//! problems with the *data* (unreadable files, malformed values, degenerate
//! inputs). The CLI maps the former to usage errors and the latter to data
//! errors when choosing its exit code.

use thiserror::Error;

/// Everything that can go wrong inside the library.
#[derive(Debug, Error)]
pub enum Error {
    /// Underlying I/O failure while reading or writing a file.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// CSV-level failure (malformed quoting, unreadable stream, ...).
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    /// JSON (de)serialization failure.
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    /// A caller-supplied parameter is out of range or inconsistent.
    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    /// A required column is missing from the input header.
    #[error("missing column {name:?} in input header")]
    MissingColumn {
        /// Column name that was requested but not found.
        name: String,
    },

    /// A refinement step referenced a segment id that does not exist.
    #[error("segment {id} not found (segment ids are 0..{count})")]
    SegmentNotFound {
        /// Requested segment id.
        id: usize,
        /// Number of segments actually present.
        count: usize,
    },

    /// An operation that needs data received none.
    #[error("empty input: {0}")]
    EmptyInput(String),

    /// A feature has no variation, so it cannot be standardized.
    #[error("column {name:?} has zero variance and cannot be standardized")]
    ZeroVariance {
        /// Offending column name.
        name: String,
    },

    /// Every value in a column is missing, so there is no mean to impute.
    #[error("column {name:?} is entirely missing; cannot impute a mean")]
    ColumnAllMissing {
        /// Offending column name.
        name: String,
    },

    /// A computation produced or received a non-finite number.
    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    /// Fixed-point money arithmetic overflowed.
    #[error("money amount overflowed 64-bit minor units")]
    MoneyOverflow,

    /// Input is larger than a configured safety cap.
    #[error("{0}")]
    SizeCapExceeded(String),

    /// A structured input file (dendrogram, manifest, ...) parsed as JSON
    /// or CSV but its content is inconsistent.
    #[error("malformed input: {0}")]
    Malformed(String),

    /// The data ran fine through an earlier stage but does not support
    /// what a later stage needs (e.g. a density scan found no outliers to
    /// split). A property of this data, not of the request.
    #[error("degenerate result: {0}")]
    Degenerate(String),
}

impl Error {
    /// True when the error reflects a bad request (wrong flags, unknown
    /// names) rather than bad data. The CLI uses this to pick exit codes.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::InvalidParam(_) | Error::MissingColumn { .. } | Error::SegmentNotFound { .. }
        )
    }
}
