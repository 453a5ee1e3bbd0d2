//! Crate-wide error type.
//!
//! Every fallible operation in the crate returns [`Result`]. Numerical
//! breakdown during fitting ([`Error::CholeskyFailure`]) is deliberately its
//! own variant: it is the one failure an end user is expected to *act* on
//! (lower the degree or add a ridge), and the CLI maps it to a dedicated
//! exit code.

use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
#[non_exhaustive]
pub enum Error {
    /// A point (or coefficient vector) had the wrong number of coordinates.
    #[error("dimension mismatch: expected {expected} coordinates, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// A coordinate was NaN or infinite.
    #[error("non-finite coordinate at position {index}: {value}")]
    NonFinite { index: usize, value: f64 },

    /// Two accumulators (or a model and a vector) were built over different bases.
    #[error(
        "basis mismatch: (p={left_p}, d={left_d}) vs (p={right_p}, d={right_d}); \
         operands must share dimension and degree"
    )]
    BasisMismatch {
        left_p: usize,
        left_d: usize,
        right_p: usize,
        right_d: usize,
    },

    /// The requested basis would not fit in memory / addressable indices.
    #[error("basis for p={p}, d={d} has more than {max} monomials and cannot be allocated")]
    CapacityExceeded { p: usize, d: usize, max: usize },

    /// No mass: an operation that needs at least one accumulated point saw none.
    #[error("empty measure: no points have been accumulated")]
    EmptyMeasure,

    /// The (ridge-adjusted) moment matrix is numerically singular.
    ///
    /// With no ridge this almost always means the sample lies on (or hugs) an
    /// algebraic set of degree ≤ d, so the degree-d monomials are linearly
    /// dependent on the data and the empirical moment matrix is rank-deficient.
    #[error(
        "moment matrix is numerically singular: Cholesky pivot {pivot:.3e} at basis index \
         {index} is below the threshold {threshold:.3e}; the sample appears to lie on an \
         algebraic set of degree <= {degree}. Lower the degree or fit with a positive ridge."
    )]
    CholeskyFailure {
        pivot: f64,
        index: usize,
        threshold: f64,
        degree: usize,
    },

    /// An affine map that must be invertible is (numerically) singular.
    #[error("affine map is numerically singular (|det| = {det:.3e})")]
    SingularMap { det: f64 },

    /// Mahalanobis view requested on a model of degree ≠ 1.
    #[error("the Mahalanobis view requires a degree-1 model, got degree {d}")]
    NotDegreeOne { d: usize },

    /// Level-set grids are only defined for planar (p = 2) models.
    #[error("level-set grids require a 2-dimensional model, got p = {p}")]
    GridDimension { p: usize },

    /// Level-set bounding box is empty or inverted, or a grid side is zero.
    #[error("degenerate level-set box: {reason}")]
    DegenerateBox { reason: String },

    /// A scalar parameter was outside its admissible range.
    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// A synthetic-cloud request that cannot be met (e.g. zero points).
    #[error("invalid synthetic cloud spec: {0}")]
    InvalidSpec(String),

    /// CSV cell that failed to parse as a number.
    #[error("row {row}, column {column}: cannot parse {value:?} as a number")]
    Parse {
        row: usize,
        column: String,
        value: String,
    },

    /// Structural problem with an input table (missing column, ragged rows, ...).
    #[error("schema error: {0}")]
    Schema(String),

    /// Scores and labels of different lengths, or no scores at all.
    #[error("scored dataset mismatch: {scores} scores vs {labels} labels")]
    LabelMismatch { scores: usize, labels: usize },

    /// Ranking metrics are undefined without at least one positive label.
    #[error("no positive labels: precision-recall and detection curves are undefined")]
    NoPositives,

    /// A persisted model file that does not match the expected layout.
    #[error("model file error: {0}")]
    ModelFormat(String),

    /// Bad configuration file contents.
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code the CLI uses for this error.
    ///
    /// Numerical-degeneracy failures (singular moment matrix, singular affine
    /// map) exit with 2 so scripts can distinguish "your data is on an
    /// algebraic set" from garden-variety usage errors (1).
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::CholeskyFailure { .. } | Error::SingularMap { .. } => 2,
            _ => 1,
        }
    }
}
