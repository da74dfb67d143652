use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("failed to read {path}: {cause}")]
    Io { path: PathBuf, cause: std::io::Error },

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: usize,
        message: String,
    },

    #[error("need at least 2 observations, got {0}")]
    EmptyData(usize),

    #[error("row {row} has {found} fields, expected {expected}")]
    DimensionMismatch {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("non-finite value at row {row}, column {column}")]
    NonFinite { row: usize, column: usize },

    #[error("all features have zero variance")]
    DegenerateData,

    #[error("sigma must be positive and finite, got {0}")]
    InvalidSigma(f64),

    #[error("{n} points exceeds the dense graph limit of {limit}")]
    TooLarge { n: usize, limit: usize },

    #[error("vertex {0} has zero degree; sigma is too small for this data")]
    IsolatedVertex(usize),

    #[error("cluster {0} has zero volume")]
    ZeroVolumeCluster(usize),

    #[error("ratio cut requires exactly two clusters, got {0}")]
    RequiresTwoClusters(usize),

    #[error("shape mismatch: expected length {expected}, got {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NonSymmetric(f64),

    #[error("eigensolver did not converge after {iterations} iterations")]
    ConvergenceFailure { iterations: usize },

    #[error("cluster and its complement must both be non-empty")]
    EmptyCluster,

    #[error("every cluster is smaller than the outlier threshold {0}")]
    AllOutliers(usize),

    #[error("one side of the surface contains no sample points")]
    EmptySide,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}
