//! Crate-wide error type.

use crate::sketch::Variant;

/// Everything that can go wrong across the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A parameter is outside its documented domain.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Two objects that must agree on dimensions/parameters do not.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A coordinate index is outside `[0, d)`.
    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    /// Sketches cannot be merged or compared.
    #[error("incompatible sketches: {0}")]
    IncompatibleSketches(String),

    /// An estimator was called on the wrong sketch variant.
    #[error("estimator requires a {expected:?} sketch, got {actual:?}")]
    WrongVariant { expected: Variant, actual: Variant },

    /// Two support indices share a bucket, so the collision-free
    /// sensitivity bound does not hold for this family.
    #[error(
        "bucket collision in row {row}, bucket {bucket}: support indices {first} and {second}"
    )]
    BucketCollision {
        row: usize,
        bucket: usize,
        first: usize,
        second: usize,
    },

    /// Materializing the family would exceed the entry budget.
    #[error("hash family with {entries} entries exceeds the limit of {limit}; build it with the size override if this is intentional")]
    FamilyTooLarge { entries: u64, limit: u64 },

    /// Merging or re-noising would need a noise distribution the
    /// [`NoiseSpec`](crate::privacy::NoiseSpec) cannot represent.
    #[error("noise composition unsupported: {0}")]
    NoiseComposition(String),

    /// A serialized family or sketch is malformed.
    #[error("malformed data: {0}")]
    Format(String),

    /// Dataset file could not be interpreted.
    #[error("dataset: {0}")]
    Dataset(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Short machine-readable tag for the error class (used by the CLI).
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParameter(_) => "invalid-parameter",
            Error::DimensionMismatch(_) => "dimension-mismatch",
            Error::IndexOutOfRange { .. } => "index-out-of-range",
            Error::IncompatibleSketches(_) => "incompatible-sketches",
            Error::WrongVariant { .. } => "wrong-variant",
            Error::BucketCollision { .. } => "bucket-collision",
            Error::FamilyTooLarge { .. } => "family-too-large",
            Error::NoiseComposition(_) => "noise-composition",
            Error::Format(_) => "malformed-data",
            Error::Dataset(_) => "dataset",
            Error::Io(_) => "io",
        }
    }
}
