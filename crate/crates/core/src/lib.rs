//! Spectral clustering with automatic scale selection and automatic
//! cluster-count selection by density separation.
//!
//! The pipeline is:
//!
//! 1. pick the kernel bandwidth `sigma = s(X) * n^(-1/(2d+3))` ([`scale`]),
//! 2. build the dense Gaussian similarity graph and its normalized
//!    Laplacian ([`graph`]),
//! 3. embed the data with the bottom eigenvectors of the Laplacian
//!    ([`eigen`]) and round the embedding with k-means ([`kmeans`]),
//! 4. search over the number of clusters, keeping the largest count whose
//!    non-outlier clusters are all separated from the rest by low-density
//!    regions ([`density`], [`spuds`]).
//!
//! [`asymptotics`] is a Monte Carlo harness that checks the large-sample
//! limits of the scaled cut, volume, normalized cut and ratio cut against
//! closed-form values, and [`metrics`] provides normalized mutual
//! information for evaluating clusterings.

// NaN must fail the positivity checks, so negated comparisons are deliberate.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod dataset;
pub mod density;
pub mod eigen;
mod error;
pub mod graph;
pub mod kmeans;
pub mod metrics;
pub mod scale;
pub mod spuds;
mod sum;

pub use dataset::{load_csv, DataMatrix, LabelVector};
pub use error::{Error, Result};
pub use graph::{build_graph, Partition, SimilarityGraph};
pub use spuds::{spuds_cluster, SpudsConfig, SpudsResult, SpudsWarning};
