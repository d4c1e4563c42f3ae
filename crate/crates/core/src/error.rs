//! Error type shared by every module.

use std::path::PathBuf;

/// Errors raised by the mosaic library.
///
/// Every variant names the module that raised it so that CLI users can tell
/// an ingestion problem from a tiling or inference problem.
#[derive(Debug, thiserror::Error)]
pub enum MosaicError {
    /// Malformed input row.
    #[error("panel: parse error on line {line}: {message}")]
    Parse { line: u64, message: String },

    /// The same (date, asset) or (date, asset, factor) cell appeared twice.
    #[error("panel: duplicate entry on line {line}: {cell}")]
    Duplicate { line: u64, cell: String },

    /// An observed asset is missing exposures for some date.
    #[error("panel: exposure coverage error: {0}")]
    Coverage(String),

    /// Exposure matrix is numerically rank deficient.
    #[error("residuals: exposure matrix has rank {rank} < {columns} columns; offending factors: {factors:?}")]
    RankDeficient {
        rank: usize,
        columns: usize,
        factors: Vec<String>,
    },

    /// Fewer than 2k assets are available, so every tile regression is saturated.
    #[error("tiling: powerless configuration: {assets} assets < 2 x {factors} factors")]
    Powerless { assets: usize, factors: usize },

    /// A batch with a single timepoint admits only the identity permutation.
    #[error("tiling: degenerate batch at timepoint {time}: batches need at least 2 timepoints")]
    DegenerateBatch { time: usize },

    /// Bad argument supplied by the caller.
    #[error("{module}: invalid argument: {message}")]
    InvalidArgument {
        module: &'static str,
        message: String,
    },

    /// A statistic or estimate collapsed (zero variance and similar).
    #[error("{module}: statistical degeneracy: {message}")]
    Degenerate {
        module: &'static str,
        message: String,
    },

    /// An internal invariant failed (a bug, or a tiling that failed validation).
    #[error("{module}: invariant violated: {message}")]
    Invariant {
        module: &'static str,
        message: String,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl MosaicError {
    pub(crate) fn invalid(module: &'static str, message: impl Into<String>) -> Self {
        MosaicError::InvalidArgument {
            module,
            message: message.into(),
        }
    }

    pub(crate) fn degenerate(module: &'static str, message: impl Into<String>) -> Self {
        MosaicError::Degenerate {
            module,
            message: message.into(),
        }
    }

    pub(crate) fn invariant(module: &'static str, message: impl Into<String>) -> Self {
        MosaicError::Invariant {
            module,
            message: message.into(),
        }
    }

    /// Process exit code used by the CLI: 1 degeneracy, 2 input error, 3 invariant.
    pub fn exit_code(&self) -> i32 {
        match self {
            MosaicError::Degenerate { .. } => 1,
            MosaicError::Invariant { .. } => 3,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, MosaicError>;
