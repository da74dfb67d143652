//! Serialized form of a clustering run.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use spuds::kmeans::KMeansConfig;
use spuds::spuds::{Merge, PhaseTimings, SpudsResult, SpudsWarning, TraceEntry};
use spuds::SpudsConfig;

/// Every setting that influences a run. Feeding this back through
/// `cluster --config` reproduces the partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterSettings {
    pub input: PathBuf,
    pub label_column: Option<usize>,
    pub has_header: bool,
    pub subsample: Option<usize>,
    pub sigma: Option<f64>,
    pub c0: usize,
    pub lambda: f64,
    pub gamma_frac: f64,
    pub step: usize,
    pub c_max: Option<usize>,
    pub segment_grid: usize,
    pub seed: u64,
    pub kmeans_restarts: usize,
    pub kmeans_max_iters: usize,
}

impl ClusterSettings {
    pub fn with_defaults(input: PathBuf) -> Self {
        let d = SpudsConfig::default();
        Self {
            input,
            label_column: None,
            has_header: false,
            subsample: None,
            sigma: d.sigma_override,
            c0: d.c0,
            lambda: d.lambda,
            gamma_frac: d.gamma_frac,
            step: d.step,
            c_max: d.c_max,
            segment_grid: d.segment_grid,
            seed: d.seed,
            kmeans_restarts: d.kmeans.restarts,
            kmeans_max_iters: d.kmeans.max_iters,
        }
    }

    pub fn spuds_config(&self) -> SpudsConfig {
        SpudsConfig {
            c0: self.c0,
            lambda: self.lambda,
            gamma_frac: self.gamma_frac,
            step: self.step,
            c_max: self.c_max,
            sigma_override: self.sigma,
            segment_grid: self.segment_grid,
            kmeans: KMeansConfig {
                restarts: self.kmeans_restarts,
                max_iters: self.kmeans_max_iters,
                ..KMeansConfig::default()
            },
            seed: self.seed,
            ..SpudsConfig::default()
        }
    }
}

/// Values derived from the data before the search starts.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Resolved {
    pub n: usize,
    pub d: usize,
    pub sigma: f64,
    /// `None` when `sigma` was given explicitly.
    pub intrinsic_dim: Option<usize>,
    pub s_value: Option<f64>,
    pub gamma: usize,
    pub c_max: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Outcome {
    pub selected_c: usize,
    pub num_clusters: usize,
    /// Final 0-based cluster id per input row (per sampled row when
    /// subsampling).
    pub labels: Vec<usize>,
    pub stored_labels: Vec<usize>,
    pub warning: Option<SpudsWarning>,
    pub merges: Vec<Merge>,
    pub trace: Vec<TraceSummary>,
    pub eigen_solver_calls: usize,
    /// NMI against the label column, when one was given.
    pub nmi: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceSummary {
    pub c: usize,
    pub sizes: Vec<usize>,
    pub all_separated: bool,
}

impl From<&TraceEntry> for TraceSummary {
    fn from(e: &TraceEntry) -> Self {
        Self {
            c: e.c,
            sizes: e.sizes.clone(),
            all_separated: e.all_separated(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Timings {
    pub load: f64,
    pub total: f64,
    #[serde(flatten)]
    pub phases: PhaseTimings,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub version: String,
    pub seed: u64,
    pub threads: usize,
    pub config: ClusterSettings,
    pub resolved: Resolved,
    /// Rows used when subsampling, in output order.
    pub subsample_indices: Option<Vec<usize>>,
    pub result: Outcome,
    pub timings: Timings,
}

impl Outcome {
    pub fn new(r: &SpudsResult, nmi: Option<f64>) -> Self {
        Self {
            selected_c: r.selected_c,
            num_clusters: r.partition.num_clusters(),
            labels: r.partition.assignment().to_vec(),
            stored_labels: r.stored.assignment().to_vec(),
            warning: r.warning,
            merges: r.merges.clone(),
            trace: r.trace.iter().map(TraceSummary::from).collect(),
            eigen_solver_calls: r.eigen_solver_calls,
            nmi,
        }
    }
}
