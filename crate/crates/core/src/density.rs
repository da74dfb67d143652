//! Density separation test for a single cluster.
//!
//! A cluster `C` is *not* separated from the rest of the data when some
//! straight segment, joining a boundary point of `C` to its nearest point
//! outside `C`, never drops below `lambda * p_thresh` in kernel density,
//! where `p_thresh` is the smaller of the two sides' peak densities. Density
//! at a sample point is its degree plus one, i.e. the Gaussian kernel sum
//! over all samples including itself; along a segment the same kernel sum
//! is evaluated directly on an even grid of positions.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::sq_dist;
use crate::graph::gaussian_kernel;
use crate::{DataMatrix, Error, Result, SimilarityGraph};

/// Relative slack when comparing segment densities to the threshold.
pub const COMPARE_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeparationConfig {
    /// Fraction of the peak density a connecting path must stay above.
    pub lambda: f64,
    /// Interior grid points per segment (the two endpoints are added).
    pub segment_grid: usize,
}

impl Default for SeparationConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            segment_grid: 100,
        }
    }
}

impl SeparationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "lambda must lie in (0, 1], got {}",
                self.lambda
            )));
        }
        if self.segment_grid == 0 {
            return Err(Error::InvalidConfig("segment_grid must be positive".into()));
        }
        Ok(())
    }
}

/// The segment that defeated separation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub boundary_point: usize,
    pub neighbor: usize,
    /// Position of the minimum along the segment; `1` is the boundary point.
    pub gamma: f64,
    /// Minimum kernel density found along the segment.
    pub density: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeparationVerdict {
    pub separated: bool,
    pub witness: Option<Witness>,
}

fn membership(n: usize, cluster: &[usize]) -> Result<Vec<bool>> {
    let mut inside = vec![false; n];
    for &i in cluster {
        if i >= n {
            return Err(Error::LengthMismatch {
                expected: n,
                found: i + 1,
            });
        }
        inside[i] = true;
    }
    let size = inside.iter().filter(|&&b| b).count();
    if size == 0 || size == n {
        return Err(Error::EmptyCluster);
    }
    Ok(inside)
}

/// Members of `cluster` that are the nearest cluster member of at least one
/// point outside it. Every tied nearest member is included. Ascending.
pub fn boundary_points(x: &DataMatrix, cluster: &[usize]) -> Result<Vec<usize>> {
    let inside = membership(x.n(), cluster)?;
    Ok(boundary_from_membership(x, &inside))
}

fn boundary_from_membership(x: &DataMatrix, inside: &[bool]) -> Vec<usize> {
    let members: Vec<usize> = (0..x.n()).filter(|&i| inside[i]).collect();
    let hits: Vec<Vec<usize>> = (0..x.n())
        .into_par_iter()
        .filter(|&o| !inside[o])
        .map(|o| {
            let mut best = f64::INFINITY;
            let mut tied = Vec::new();
            for &m in &members {
                let d = x.sq_dist(o, m);
                if d < best {
                    best = d;
                    tied.clear();
                    tied.push(m);
                } else if d == best {
                    tied.push(m);
                }
            }
            tied
        })
        .collect();
    let mut flag = vec![false; x.n()];
    for m in hits.into_iter().flatten() {
        flag[m] = true;
    }
    (0..x.n()).filter(|&i| flag[i]).collect()
}

/// Gaussian kernel sum over every sample at an arbitrary location.
pub fn kernel_density_at(x: &DataMatrix, point: &[f64], sigma: f64) -> f64 {
    x.rows().map(|r| gaussian_kernel(sq_dist(point, r), sigma)).sum()
}

/// Minimum kernel density over `segment_grid + 2` evenly spaced positions
/// on the segment from `to` (gamma = 0) to `from` (gamma = 1). A zero-length
/// segment is evaluated at gamma = 0 only.
fn segment_minimum(
    x: &DataMatrix,
    from: usize,
    to: usize,
    sigma: f64,
    grid: usize,
) -> (f64, f64) {
    let (a, b) = (x.row(from), x.row(to));
    let steps = if a == b { 0 } else { grid + 1 };
    let mut z = vec![0.0; x.d()];
    let mut best = (f64::INFINITY, 0.0);
    for s in 0..=steps {
        let gamma = if steps == 0 { 0.0 } else { s as f64 / steps as f64 };
        for k in 0..z.len() {
            z[k] = gamma * a[k] + (1.0 - gamma) * b[k];
        }
        let p = kernel_density_at(x, &z, sigma);
        if p < best.0 {
            best = (p, gamma);
        }
    }
    best
}

/// Decides whether `cluster` is density separated from the remaining points.
///
/// Boundary points are examined in parallel, and the witness reported is
/// the one with the lowest boundary index, so the verdict matches a
/// sequential scan.
pub fn is_density_separated(
    x: &DataMatrix,
    cluster: &[usize],
    g: &SimilarityGraph,
    cfg: &SeparationConfig,
) -> Result<SeparationVerdict> {
    cfg.validate()?;
    if g.n() != x.n() {
        return Err(Error::LengthMismatch {
            expected: x.n(),
            found: g.n(),
        });
    }
    let inside = membership(x.n(), cluster)?;
    let degree = g.degree();
    Ok(separation_with_degrees(x, &inside, degree, g.sigma(), cfg))
}

pub(crate) fn separation_with_degrees(
    x: &DataMatrix,
    inside: &[bool],
    degree: &[f64],
    sigma: f64,
    cfg: &SeparationConfig,
) -> SeparationVerdict {
    let peak = |want: bool| {
        (0..x.n())
            .filter(|&i| inside[i] == want)
            .map(|i| degree[i] + 1.0)
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let threshold = peak(true).min(peak(false));
    // endpoint densities are recomputed along the segment in a different
    // summation order than the degrees, so allow for rounding
    let cutoff = cfg.lambda * threshold * (1.0 - COMPARE_RTOL);

    let boundary = boundary_from_membership(x, inside);
    let outside: Vec<usize> = (0..x.n()).filter(|&i| !inside[i]).collect();
    let witness = boundary
        .par_iter()
        .map(|&b| {
            let mut nearest = (f64::INFINITY, usize::MAX);
            for &o in &outside {
                let d = x.sq_dist(b, o);
                if d < nearest.0 {
                    nearest = (d, o);
                }
            }
            let (density, gamma) = segment_minimum(x, b, nearest.1, sigma, cfg.segment_grid);
            (density >= cutoff).then_some(Witness {
                boundary_point: b,
                neighbor: nearest.1,
                gamma,
                density,
                threshold,
            })
        })
        .find_first(|w| w.is_some())
        .flatten();
    SeparationVerdict {
        separated: witness.is_none(),
        witness,
    }
}
