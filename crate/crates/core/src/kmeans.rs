//! Lloyd's k-means with k-means++ seeding, used to round the spectral
//! embedding into a partition.
//!
//! Restart `r` draws from a ChaCha8 stream seeded with `seed + r`
//! (`rand_chacha::ChaCha8Rng::seed_from_u64`), so results are reproducible
//! across platforms and independent of how restarts are scheduled.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{Error, Partition, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KMeansConfig {
    pub restarts: usize,
    pub max_iters: usize,
    pub seed: u64,
    /// Stop when the relative drop in distortion falls to this value.
    pub tol: f64,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self {
            restarts: 10,
            max_iters: 100,
            seed: 0,
            tol: 1e-9,
        }
    }
}

impl KMeansConfig {
    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 || self.max_iters == 0 {
            return Err(Error::InvalidConfig(
                "k-means restarts and max_iters must be at least 1".into(),
            ));
        }
        if !(self.tol >= 0.0) {
            return Err(Error::InvalidConfig("k-means tol must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct KMeansFit {
    pub partition: Partition,
    /// Sum of squared distances to the assigned centers.
    pub distortion: f64,
    /// Restart that produced this fit.
    pub restart: usize,
    /// Distortion after each Lloyd iteration of the winning restart.
    pub history: Vec<f64>,
}

/// Row-major view of the points being clustered.
struct Points<'a> {
    data: &'a [f64],
    dim: usize,
}

impl Points<'_> {
    fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Clusters the rows of `rows` into `c` groups, keeping the best of
/// `cfg.restarts` runs by `(distortion, restart index)`.
pub fn kmeans(rows: &DMatrix<f64>, c: usize, cfg: &KMeansConfig) -> Result<KMeansFit> {
    let (n, dim) = rows.shape();
    let data: Vec<f64> = (0..n)
        .flat_map(|i| (0..dim).map(move |k| (i, k)))
        .map(|(i, k)| rows[(i, k)])
        .collect();
    kmeans_rows(&data, dim.max(1), c, cfg)
}

/// As [`kmeans`], on a row-major buffer with `dim` columns.
pub fn kmeans_rows(data: &[f64], dim: usize, c: usize, cfg: &KMeansConfig) -> Result<KMeansFit> {
    cfg.validate()?;
    let pts = Points { data, dim };
    let n = pts.len();
    if c == 0 || c > n {
        return Err(Error::InvalidConfig(format!(
            "cannot form {c} clusters from {n} points"
        )));
    }
    let fits: Vec<KMeansFit> = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| single_run(&pts, c, cfg, r))
        .collect();
    Ok(fits
        .into_iter()
        .min_by(|a, b| {
            a.distortion
                .total_cmp(&b.distortion)
                .then(a.restart.cmp(&b.restart))
        })
        .expect("at least one restart"))
}

fn single_run(pts: &Points, c: usize, cfg: &KMeansConfig, restart: usize) -> KMeansFit {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(restart as u64));
    let mut centers = plus_plus(pts, c, &mut rng);
    let mut assign = vec![0usize; pts.len()];
    let mut history: Vec<f64> = Vec::new();

    for _ in 0..cfg.max_iters {
        assign_points(pts, &centers, &mut assign);
        repair_empty(pts, &mut centers, &mut assign, c);
        update_centers(pts, &assign, &mut centers, c);
        let cur = total_distortion(pts, &centers, &assign);
        let done = history
            .last()
            .is_some_and(|&prev| prev - cur <= cfg.tol * prev.max(f64::MIN_POSITIVE));
        history.push(cur);
        if done {
            break;
        }
    }
    KMeansFit {
        partition: Partition::from_labels(&assign),
        distortion: *history.last().expect("max_iters >= 1"),
        restart,
        history,
    }
}

fn plus_plus(pts: &Points, c: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = pts.len();
    let first = rng.gen_range(0..n);
    let mut centers = vec![pts.row(first).to_vec()];
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(pts.row(i), &centers[0])).collect();
    while centers.len() < c {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.gen::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = n - 1;
            for (i, w) in d2.iter().enumerate() {
                acc += w;
                if acc > target {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            // every point coincides with a center already
            rng.gen_range(0..n)
        };
        let center = pts.row(pick).to_vec();
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(pts.row(i), &center));
        }
        centers.push(center);
    }
    centers
}

/// Nearest-center assignment; lowest center index wins ties.
fn assign_points(pts: &Points, centers: &[Vec<f64>], assign: &mut [usize]) {
    for (i, a) in assign.iter_mut().enumerate() {
        let row = pts.row(i);
        let mut best = (f64::INFINITY, 0);
        for (k, ctr) in centers.iter().enumerate() {
            let d = sq_dist(row, ctr);
            if d < best.0 {
                best = (d, k);
            }
        }
        *a = best.1;
    }
}

/// Gives every empty cluster the point farthest from its current center.
fn repair_empty(pts: &Points, centers: &mut [Vec<f64>], assign: &mut [usize], c: usize) {
    loop {
        let mut counts = vec![0usize; c];
        for &a in assign.iter() {
            counts[a] += 1;
        }
        let Some(empty) = counts.iter().position(|&k| k == 0) else {
            return;
        };
        let mut far = (-1.0, usize::MAX);
        for (i, &a) in assign.iter().enumerate() {
            if counts[a] < 2 {
                continue;
            }
            let d = sq_dist(pts.row(i), &centers[a]);
            if d > far.0 {
                far = (d, i);
            }
        }
        if far.1 == usize::MAX {
            return;
        }
        assign[far.1] = empty;
        centers[empty] = pts.row(far.1).to_vec();
    }
}

fn update_centers(pts: &Points, assign: &[usize], centers: &mut [Vec<f64>], c: usize) {
    let dim = pts.dim;
    let mut sums = vec![vec![0.0; dim]; c];
    let mut counts = vec![0usize; c];
    for (i, &a) in assign.iter().enumerate() {
        counts[a] += 1;
        for (s, v) in sums[a].iter_mut().zip(pts.row(i)) {
            *s += v;
        }
    }
    for k in 0..c {
        if counts[k] > 0 {
            for (ctr, s) in centers[k].iter_mut().zip(&sums[k]) {
                *ctr = s / counts[k] as f64;
            }
        }
    }
}

fn total_distortion(pts: &Points, centers: &[Vec<f64>], assign: &[usize]) -> f64 {
    assign
        .iter()
        .enumerate()
        .map(|(i, &a)| sq_dist(pts.row(i), &centers[a]))
        .sum()
}
