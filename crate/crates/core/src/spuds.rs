//! Spectral Partitioning Using Density Separation.
//!
//! Starting from `c0` clusters, the search ascends while every
//! non-outlier cluster of the spectral clustering is density separated from
//! the rest, and descends while some non-outlier cluster is not. The stored
//! solution is the largest cluster count whose non-outlier clusters are all
//! separated. Outlier clusters (fewer than `gamma` points) are skipped by the
//! test and finally merged into their nearest non-outlier cluster.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::density::{separation_with_degrees, SeparationConfig};
use crate::eigen::{EigenCache, SolverStrategy};
use crate::graph::{build_graph_with_limit, DEFAULT_MAX_POINTS};
use crate::kmeans::{kmeans, KMeansConfig};
use crate::scale::{compute_sigma, ScaleReport};
use crate::{DataMatrix, Error, Partition, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpudsConfig {
    pub c0: usize,
    pub lambda: f64,
    /// Clusters with fewer than `ceil(n * gamma_frac)` points are outliers.
    pub gamma_frac: f64,
    /// Increment used while ascending; values above 1 enable the
    /// accelerated search with one-by-one fine tuning on the way back down.
    pub step: usize,
    /// Upper bound on the cluster count; `None` means `min(n - 1, 100)`.
    pub c_max: Option<usize>,
    pub sigma_override: Option<f64>,
    pub segment_grid: usize,
    pub kmeans: KMeansConfig,
    pub seed: u64,
    pub max_points: usize,
}

impl Default for SpudsConfig {
    fn default() -> Self {
        Self {
            c0: 30,
            lambda: 1.0,
            gamma_frac: 1.0 / 200.0,
            step: 1,
            c_max: None,
            sigma_override: None,
            segment_grid: 100,
            kmeans: KMeansConfig::default(),
            seed: 0,
            max_points: DEFAULT_MAX_POINTS,
        }
    }
}

impl SpudsConfig {
    pub fn resolved_c_max(&self, n: usize) -> usize {
        self.c_max.unwrap_or_else(|| (n - 1).min(100))
    }

    /// Outlier threshold `max(1, ceil(n * gamma_frac))`.
    pub fn gamma(&self, n: usize) -> usize {
        ((n as f64 * self.gamma_frac).ceil() as usize).max(1)
    }

    fn separation(&self) -> SeparationConfig {
        SeparationConfig {
            lambda: self.lambda,
            segment_grid: self.segment_grid,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if n < 4 {
            return bad(format!("need at least 4 points, got {n}"));
        }
        let c_max = self.resolved_c_max(n);
        if c_max == 0 || c_max > n {
            return bad(format!("c_max must lie in [1, {n}], got {c_max}"));
        }
        if self.c0 == 0 || self.c0 > c_max {
            return bad(format!("c0 must lie in [1, {c_max}], got {}", self.c0));
        }
        if self.step == 0 {
            return bad("step must be at least 1".into());
        }
        if !(self.gamma_frac > 0.0 && self.gamma_frac.is_finite()) {
            return bad(format!("gamma_frac must be positive, got {}", self.gamma_frac));
        }
        if let Some(s) = self.sigma_override {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::InvalidSigma(s));
            }
        }
        self.separation().validate()?;
        self.kmeans.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpudsWarning {
    /// Descent reached a single cluster without finding a separated solution.
    NoValidClustering,
    /// Ascent stopped at `c_max` with every cluster still separated.
    CMaxReached,
}

/// Verdict for one cluster of a proposed solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusterVerdict {
    /// Smaller than the outlier threshold; not tested.
    Outlier,
    Separated,
    NotSeparated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub c: usize,
    pub sizes: Vec<usize>,
    pub verdicts: Vec<ClusterVerdict>,
    pub partition: Partition,
}

impl TraceEntry {
    pub fn all_separated(&self) -> bool {
        !self.verdicts.contains(&ClusterVerdict::NotSeparated)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Merge {
    pub outlier: usize,
    pub into: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseTimings {
    pub scale: f64,
    pub graph: f64,
    /// `(c, seconds)` for every eigensolve that did work.
    pub eigen: Vec<(usize, f64)>,
    pub kmeans: Vec<(usize, f64)>,
    pub separation: f64,
    pub merge: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpudsResult {
    /// Final partition after outlier merging.
    pub partition: Partition,
    /// Cluster count of the stored solution, before merging.
    pub selected_c: usize,
    /// The stored solution before merging.
    pub stored: Partition,
    pub sigma: f64,
    pub gamma: usize,
    pub scale: Option<ScaleReport>,
    pub trace: Vec<TraceEntry>,
    pub merges: Vec<Merge>,
    pub warning: Option<SpudsWarning>,
    pub eigen_solver_calls: usize,
    pub timings: PhaseTimings,
}

struct Search<'a> {
    x: &'a DataMatrix,
    cfg: &'a SpudsConfig,
    cache: EigenCache,
    degree: Vec<f64>,
    sigma: f64,
    gamma: usize,
    trace: Vec<TraceEntry>,
    timings: PhaseTimings,
}

impl Search<'_> {
    fn kmeans_seed(&self, c: usize) -> u64 {
        self.cfg.seed ^ (c as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15)
    }

    /// Spectral clustering with `c` clusters, checked for separation.
    fn propose(&mut self, c: usize) -> Result<TraceEntry> {
        let t = Instant::now();
        let before = self.cache.solver_calls();
        let emb = self.cache.embedding(c)?;
        if self.cache.solver_calls() > before {
            self.timings.eigen.push((c, t.elapsed().as_secs_f64()));
        }

        let t = Instant::now();
        let km = KMeansConfig {
            seed: self.kmeans_seed(c),
            ..self.cfg.kmeans
        };
        let partition = kmeans(&emb.scaled, c, &km)?.partition;
        self.timings.kmeans.push((c, t.elapsed().as_secs_f64()));

        let t = Instant::now();
        let sizes = partition.sizes();
        let sep = self.cfg.separation();
        let verdicts = sizes
            .iter()
            .enumerate()
            .map(|(k, &size)| {
                if size < self.gamma {
                    ClusterVerdict::Outlier
                } else if partition.num_clusters() == 1 {
                    // nothing to be separated from
                    ClusterVerdict::Separated
                } else {
                    let inside: Vec<bool> =
                        partition.assignment().iter().map(|&a| a == k).collect();
                    let v = separation_with_degrees(self.x, &inside, &self.degree, self.sigma, &sep);
                    if v.separated {
                        ClusterVerdict::Separated
                    } else {
                        ClusterVerdict::NotSeparated
                    }
                }
            })
            .collect();
        self.timings.separation += t.elapsed().as_secs_f64();

        let entry = TraceEntry {
            c,
            sizes,
            verdicts,
            partition,
        };
        log::debug!("c = {c}: all separated = {}", entry.all_separated());
        self.trace.push(entry.clone());
        Ok(entry)
    }
}

/// Runs the full search on `x`.
pub fn spuds_cluster(x: &DataMatrix, cfg: &SpudsConfig) -> Result<SpudsResult> {
    let n = x.n();
    cfg.validate(n)?;
    let c_max = cfg.resolved_c_max(n);
    let gamma = cfg.gamma(n);
    let mut timings = PhaseTimings::default();

    let t = Instant::now();
    let (sigma, scale) = match cfg.sigma_override {
        Some(s) => (s, None),
        None => {
            let report = compute_sigma(x)?;
            (report.sigma, Some(report))
        }
    };
    timings.scale = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let graph = build_graph_with_limit(x, sigma, cfg.max_points)?;
    let degree = graph.degree().to_vec();
    let cache = EigenCache::new(&graph, SolverStrategy::Auto)?;
    drop(graph);
    timings.graph = t.elapsed().as_secs_f64();

    let mut search = Search {
        x,
        cfg,
        cache,
        degree,
        sigma,
        gamma,
        trace: Vec::new(),
        timings,
    };

    let mut warning = None;
    let first = search.propose(cfg.c0)?;
    let stored = if first.all_separated() {
        let mut best = first;
        loop {
            if best.c >= c_max {
                warning = Some(SpudsWarning::CMaxReached);
                break best;
            }
            let next_c = (best.c + cfg.step).min(c_max);
            let next = search.propose(next_c)?;
            if next.all_separated() {
                best = next;
                continue;
            }
            // Fine tuning after an accelerated jump: step back down by one.
            let mut c = next_c - 1;
            let mut found = None;
            while c > best.c {
                let cand = search.propose(c)?;
                if cand.all_separated() {
                    found = Some(cand);
                    break;
                }
                c -= 1;
            }
            break found.unwrap_or(best);
        }
    } else {
        let mut c = cfg.c0;
        loop {
            c -= 1;
            if c == 1 {
                warning = Some(SpudsWarning::NoValidClustering);
                break search.propose(1)?;
            }
            let cand = search.propose(c)?;
            if cand.all_separated() {
                break cand;
            }
        }
    };

    let t = Instant::now();
    let (partition, merges) = match merge_outliers(x, &stored.partition, gamma) {
        Ok(merged) => merged,
        Err(Error::AllOutliers(_)) => {
            log::warn!("every cluster is below the outlier threshold {gamma}; nothing merged");
            (stored.partition.clone(), Vec::new())
        }
        Err(e) => return Err(e),
    };
    search.timings.merge = t.elapsed().as_secs_f64();

    Ok(SpudsResult {
        partition,
        selected_c: stored.c,
        stored: stored.partition,
        sigma,
        gamma,
        scale,
        eigen_solver_calls: search.cache.solver_calls(),
        trace: search.trace,
        merges,
        warning,
        timings: search.timings,
    })
}

/// Single-linkage distance between two index sets.
fn min_pair_distance(x: &DataMatrix, a: &[usize], b: &[usize]) -> f64 {
    let mut best = f64::INFINITY;
    for &i in a {
        for &j in b {
            best = best.min(x.sq_dist(i, j));
        }
    }
    best.sqrt()
}

/// Merges every cluster with fewer than `gamma` points into the nearest
/// cluster that has at least `gamma` points (single linkage, lowest id on
/// ties). Distances are measured against the original substantive clusters,
/// so merges do not cascade. Surviving clusters keep their relative order
/// and are renumbered `0..k`.
pub fn merge_outliers(
    x: &DataMatrix,
    p: &Partition,
    gamma: usize,
) -> Result<(Partition, Vec<Merge>)> {
    if p.len() != x.n() {
        return Err(Error::LengthMismatch {
            expected: x.n(),
            found: p.len(),
        });
    }
    let sizes = p.sizes();
    let substantive: Vec<usize> = (0..sizes.len()).filter(|&k| sizes[k] >= gamma).collect();
    if substantive.is_empty() {
        return Err(Error::AllOutliers(gamma));
    }
    let members: Vec<Vec<usize>> = (0..sizes.len()).map(|k| p.members(k)).collect();

    let mut target: Vec<usize> = (0..sizes.len()).collect();
    let mut merges = Vec::new();
    for k in (0..sizes.len()).filter(|&k| sizes[k] < gamma) {
        let mut best = (f64::INFINITY, substantive[0]);
        for &s in &substantive {
            let d = min_pair_distance(x, &members[k], &members[s]);
            if d < best.0 {
                best = (d, s);
            }
        }
        target[k] = best.1;
        merges.push(Merge {
            outlier: k,
            into: best.1,
        });
    }

    let mut renumber = vec![usize::MAX; sizes.len()];
    for (new, &s) in substantive.iter().enumerate() {
        renumber[s] = new;
    }
    let assignment = p
        .assignment()
        .iter()
        .map(|&a| renumber[target[a]])
        .collect();
    Ok((Partition::new(assignment)?, merges))
}
