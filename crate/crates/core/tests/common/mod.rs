#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use spuds::DataMatrix;

/// Spherical unit-variance blobs, `per` points each, returned with labels.
pub fn blobs(centers: &[[f64; 2]], per: usize, seed: u64) -> (DataMatrix, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::new();
    let mut labels = Vec::new();
    for (k, c) in centers.iter().enumerate() {
        for _ in 0..per {
            for &m in c {
                let z: f64 = rng.sample(StandardNormal);
                values.push(m + z);
            }
            labels.push(k);
        }
    }
    let n = labels.len();
    (DataMatrix::new(values, n, 2).unwrap(), labels)
}

/// Corners of an equilateral triangle with side 10.
pub const TRIANGLE: [[f64; 2]; 3] = [[0.0, 0.0], [10.0, 0.0], [5.0, 8.660_254_037_844_386]];

pub fn three_blobs(seed: u64) -> (DataMatrix, Vec<usize>) {
    blobs(&TRIANGLE, 200, seed)
}

/// Point cloud uniform in `[0, 1)^d` with `n` rows.
pub fn uniform_cloud(n: usize, d: usize, rng: &mut impl Rng) -> DataMatrix {
    let values = (0..n * d).map(|_| rng.gen::<f64>()).collect();
    DataMatrix::new(values, n, d).unwrap()
}

/// Kernel value straight from coordinates, independent of the graph module.
pub fn kernel(x: &DataMatrix, i: usize, j: usize, sigma: f64) -> f64 {
    let d2: f64 = x
        .row(i)
        .iter()
        .zip(x.row(j))
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    (-d2 / (2.0 * sigma * sigma)).exp()
}

pub fn brute_degree(x: &DataMatrix, sigma: f64) -> Vec<f64> {
    (0..x.n())
        .map(|i| (0..x.n()).filter(|&j| j != i).map(|j| kernel(x, i, j, sigma)).sum())
        .collect()
}

/// Double loop over ordered pairs, halved.
pub fn brute_cut(x: &DataMatrix, labels: &[usize], sigma: f64) -> f64 {
    let mut total = 0.0;
    for i in 0..x.n() {
        for j in 0..x.n() {
            if labels[i] != labels[j] {
                total += kernel(x, i, j, sigma);
            }
        }
    }
    total / 2.0
}

pub fn brute_ncut(x: &DataMatrix, labels: &[usize], sigma: f64) -> f64 {
    let c = labels.iter().max().unwrap() + 1;
    let deg = brute_degree(x, sigma);
    (0..c)
        .map(|k| {
            let mut cut = 0.0;
            let mut vol = 0.0;
            for i in (0..x.n()).filter(|&i| labels[i] == k) {
                vol += deg[i];
                for j in (0..x.n()).filter(|&j| labels[j] != k) {
                    cut += kernel(x, i, j, sigma);
                }
            }
            cut / vol
        })
        .sum()
}

pub fn brute_ratio_cut(x: &DataMatrix, labels: &[usize], sigma: f64) -> f64 {
    let n1 = labels.iter().filter(|&&l| l == 0).count() as f64;
    let n2 = x.n() as f64 - n1;
    brute_cut(x, labels, sigma) * (1.0 / n1 + 1.0 / n2)
}

/// `1/2 sum_ij A_ij (f_i / sqrt(d_i) - f_j / sqrt(d_j))^2`.
pub fn pairwise_form(x: &DataMatrix, f: &[f64], sigma: f64) -> f64 {
    let deg = brute_degree(x, sigma);
    let mut total = 0.0;
    for i in 0..x.n() {
        for j in 0..x.n() {
            if i != j {
                let diff = f[i] / deg[i].sqrt() - f[j] / deg[j].sqrt();
                total += kernel(x, i, j, sigma) * diff * diff;
            }
        }
    }
    total / 2.0
}

/// Labels in `0..c` with every label used, `c <= n`.
pub fn random_labels(n: usize, c: usize, rng: &mut impl Rng) -> Vec<usize> {
    let mut labels: Vec<usize> = (0..n).map(|i| if i < c { i } else { rng.gen_range(0..c) }).collect();
    for i in (1..n).rev() {
        labels.swap(i, rng.gen_range(0..=i));
    }
    labels
}
