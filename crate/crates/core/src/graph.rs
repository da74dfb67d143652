//! Gaussian similarity graph and graph-cut objectives.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::sq_dist;
use crate::sum::neumaier_sum;
use crate::{DataMatrix, Error, Result};

/// Default cap on `n` for the dense `n x n` affinity matrix.
pub const DEFAULT_MAX_POINTS: usize = 20_000;

/// Degrees below this are treated as zero.
pub const MIN_DEGREE: f64 = 1e-300;

/// Dense affinity `A_ij = exp(-|x_i - x_j|^2 / (2 sigma^2))` with zero
/// diagonal, and its row sums.
#[derive(Debug, Clone)]
pub struct SimilarityGraph {
    affinity: DMatrix<f64>,
    degree: Vec<f64>,
    sigma: f64,
}

impl SimilarityGraph {
    pub fn n(&self) -> usize {
        self.degree.len()
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn affinity(&self) -> &DMatrix<f64> {
        &self.affinity
    }

    pub fn degree(&self) -> &[f64] {
        &self.degree
    }

    /// Unnormalized kernel density proxy at sample `i`: the kernel sum over
    /// all samples including `i` itself, i.e. `D_ii + 1`.
    pub fn point_density(&self, i: usize) -> f64 {
        self.degree[i] + 1.0
    }

    /// Sum of degrees over the members of each cluster.
    pub fn volumes(&self, p: &Partition) -> Result<Vec<f64>> {
        self.check(p)?;
        let mut vol = vec![0.0; p.num_clusters()];
        for (i, &c) in p.assignment().iter().enumerate() {
            vol[c] += self.degree[i];
        }
        Ok(vol)
    }

    /// `Cut(C_k, X \ C_k)` for every cluster `k`.
    pub fn cluster_cuts(&self, p: &Partition) -> Result<Vec<f64>> {
        self.check(p)?;
        let a = p.assignment();
        let n = self.n();
        let mut cuts = vec![0.0; p.num_clusters()];
        for j in 0..n {
            let col = self.affinity.column(j);
            for i in (j + 1)..n {
                if a[i] != a[j] {
                    let w = col[i];
                    cuts[a[i]] += w;
                    cuts[a[j]] += w;
                }
            }
        }
        Ok(cuts)
    }

    fn check(&self, p: &Partition) -> Result<()> {
        if p.len() != self.n() {
            return Err(Error::LengthMismatch {
                expected: self.n(),
                found: p.len(),
            });
        }
        Ok(())
    }
}

/// Assignment of `n` points to clusters `0..c`, each non-empty.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Partition {
    assignment: Vec<usize>,
    num_clusters: usize,
}

impl Partition {
    pub fn new(assignment: Vec<usize>) -> Result<Self> {
        let num_clusters = assignment.iter().max().map_or(0, |m| m + 1);
        let mut seen = vec![false; num_clusters];
        for &c in &assignment {
            seen[c] = true;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidPartition(format!(
                "cluster id {missing} is unused"
            )));
        }
        Ok(Self {
            assignment,
            num_clusters,
        })
    }

    /// Renumbers arbitrary ids to `0..c` in order of first appearance.
    pub fn from_labels(labels: &[usize]) -> Self {
        let lv = crate::LabelVector::canonicalize(labels.iter().copied());
        Self {
            num_clusters: lv.num_classes(),
            assignment: lv.labels().to_vec(),
        }
    }

    pub fn single(n: usize) -> Self {
        Self {
            assignment: vec![0; n],
            num_clusters: usize::from(n > 0),
        }
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn num_clusters(&self) -> usize {
        self.num_clusters
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.num_clusters];
        for &c in &self.assignment {
            sizes[c] += 1;
        }
        sizes
    }

    /// Indices of the points in cluster `k`, ascending.
    pub fn members(&self, k: usize) -> Vec<usize> {
        self.assignment
            .iter()
            .enumerate()
            .filter_map(|(i, &c)| (c == k).then_some(i))
            .collect()
    }
}

impl TryFrom<Vec<usize>> for Partition {
    type Error = Error;

    fn try_from(v: Vec<usize>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<Partition> for Vec<usize> {
    fn from(p: Partition) -> Self {
        p.assignment
    }
}

#[inline]
pub(crate) fn gaussian_kernel(sq_dist: f64, sigma: f64) -> f64 {
    (-sq_dist / (2.0 * sigma * sigma)).exp()
}

pub fn build_graph(x: &DataMatrix, sigma: f64) -> Result<SimilarityGraph> {
    build_graph_with_limit(x, sigma, DEFAULT_MAX_POINTS)
}

/// Builds the dense similarity graph; rows are filled in parallel and each
/// degree is summed over its row in index order, so the result does not
/// depend on the thread count.
pub fn build_graph_with_limit(
    x: &DataMatrix,
    sigma: f64,
    max_points: usize,
) -> Result<SimilarityGraph> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidSigma(sigma));
    }
    let n = x.n();
    if n > max_points {
        return Err(Error::TooLarge {
            n,
            limit: max_points,
        });
    }
    let mut data = vec![0.0; n * n];
    let degree: Vec<f64> = data
        .par_chunks_mut(n)
        .enumerate()
        .map(|(i, row)| {
            let xi = x.row(i);
            for (j, a) in row.iter_mut().enumerate() {
                *a = if i == j {
                    0.0
                } else {
                    gaussian_kernel(sq_dist(xi, x.row(j)), sigma)
                };
            }
            neumaier_sum(row.iter().copied())
        })
        .collect();
    // Symmetric, so the row-major buffer reads the same column-major.
    let affinity = DMatrix::from_vec(n, n, data);
    Ok(SimilarityGraph {
        affinity,
        degree,
        sigma,
    })
}

/// `L = I - D^(-1/2) A D^(-1/2)`.
pub fn laplacian(g: &SimilarityGraph) -> Result<DMatrix<f64>> {
    let inv_sqrt = inverse_sqrt_degrees(g)?;
    let n = g.n();
    let mut l = DMatrix::zeros(n, n);
    for j in 0..n {
        let a = g.affinity.column(j);
        let mut lc = l.column_mut(j);
        for i in 0..n {
            lc[i] = -a[i] * inv_sqrt[i] * inv_sqrt[j];
        }
        lc[j] += 1.0;
    }
    Ok(l)
}

/// `D_ii^(-1/2)`, failing on isolated vertices.
pub fn inverse_sqrt_degrees(g: &SimilarityGraph) -> Result<Vec<f64>> {
    g.degree
        .iter()
        .enumerate()
        .map(|(i, &d)| {
            if d < MIN_DEGREE {
                Err(Error::IsolatedVertex(i))
            } else {
                Ok(1.0 / d.sqrt())
            }
        })
        .collect()
}

/// Total affinity over unordered pairs in different clusters.
pub fn cut_value(g: &SimilarityGraph, p: &Partition) -> Result<f64> {
    Ok(0.5 * g.cluster_cuts(p)?.iter().sum::<f64>())
}

/// `sum_k Cut(C_k, X \ C_k) / vol(C_k)`.
pub fn ncut_value(g: &SimilarityGraph, p: &Partition) -> Result<f64> {
    let cuts = g.cluster_cuts(p)?;
    let vols = g.volumes(p)?;
    let mut total = 0.0;
    for (k, (c, v)) in cuts.iter().zip(&vols).enumerate() {
        if !(*v > 0.0) {
            return Err(Error::ZeroVolumeCluster(k));
        }
        total += c / v;
    }
    Ok(total)
}

/// `Cut(C, X \ C) * (1/|C| + 1/|X \ C|)` for a two-cluster partition.
pub fn ratio_cut_value(g: &SimilarityGraph, p: &Partition) -> Result<f64> {
    if p.num_clusters() != 2 {
        return Err(Error::RequiresTwoClusters(p.num_clusters()));
    }
    let cut = cut_value(g, p)?;
    let sizes = p.sizes();
    Ok(cut * (1.0 / sizes[0] as f64 + 1.0 / sizes[1] as f64))
}

pub fn point_density(g: &SimilarityGraph, i: usize) -> f64 {
    g.point_density(i)
}
