//! Data-driven choice of the Gaussian kernel bandwidth.
//!
//! `sigma = s(X) * n^(-1/(2d+3))`, where `s(X)` is the square root of the
//! mean of the top `d'` eigenvalues of the sample covariance and `d'` is the
//! Kaiser estimate of intrinsic dimension, capped at [`MAX_INTRINSIC_DIM`].
//! The exponent uses the ambient dimension `d`, which keeps
//! `n * sigma^(2d+2+eps)` growing for small `eps > 0`.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::{DataMatrix, Error, Result};

pub const MAX_INTRINSIC_DIM: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleReport {
    pub intrinsic_dim: usize,
    pub s_value: f64,
    pub sigma: f64,
    /// Sample covariance eigenvalues, descending.
    pub covariance_eigenvalues: Vec<f64>,
}

/// `s * n^(-1/(2d+3))`.
pub fn bandwidth(s: f64, n: usize, d: usize) -> f64 {
    s * (n as f64).powf(-1.0 / (2 * d + 3) as f64)
}

/// Unbiased sample covariance (`n - 1` denominator).
pub fn covariance(x: &DataMatrix) -> DMatrix<f64> {
    let (n, d) = (x.n(), x.d());
    let mut mean = vec![0.0; d];
    for row in x.rows() {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);

    let mut cov = DMatrix::zeros(d, d);
    let mut centered = vec![0.0; d];
    for row in x.rows() {
        for k in 0..d {
            centered[k] = row[k] - mean[k];
        }
        for a in 0..d {
            for b in a..d {
                cov[(a, b)] += centered[a] * centered[b];
            }
        }
    }
    for a in 0..d {
        for b in a..d {
            let v = cov[(a, b)] / (n - 1) as f64;
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }
    cov
}

fn descending_eigenvalues(m: DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    ev
}

fn kaiser_from_covariance(cov: &DMatrix<f64>) -> Result<usize> {
    let d = cov.nrows();
    let live: Vec<usize> = (0..d).filter(|&k| cov[(k, k)] > 0.0).collect();
    if live.is_empty() {
        return Err(Error::DegenerateData);
    }
    if live.len() < d {
        log::warn!(
            "{} zero-variance feature(s) excluded from the correlation matrix",
            d - live.len()
        );
    }
    let m = live.len();
    let corr = DMatrix::from_fn(m, m, |a, b| {
        let (ka, kb) = (live[a], live[b]);
        if a == b {
            1.0
        } else {
            cov[(ka, kb)] / (cov[(ka, ka)] * cov[(kb, kb)]).sqrt()
        }
    });
    // Eigenvalues of an exact identity block come back within rounding of 1.
    let count = descending_eigenvalues(corr)
        .into_iter()
        .filter(|&e| e >= 1.0 - 1e-10)
        .count();
    Ok(count.clamp(1, d.min(MAX_INTRINSIC_DIM)))
}

/// Number of correlation-matrix eigenvalues at or above 1, clamped to
/// `[1, min(d, 20)]`. Zero-variance features are dropped from the
/// correlation matrix.
pub fn kaiser_intrinsic_dim(x: &DataMatrix) -> Result<usize> {
    kaiser_from_covariance(&covariance(x))
}

pub fn compute_sigma(x: &DataMatrix) -> Result<ScaleReport> {
    let cov = covariance(x);
    let intrinsic_dim = kaiser_from_covariance(&cov)?;
    let covariance_eigenvalues = descending_eigenvalues(cov);
    let mean_top = covariance_eigenvalues[..intrinsic_dim]
        .iter()
        .map(|e| e.max(0.0))
        .sum::<f64>()
        / intrinsic_dim as f64;
    let s_value = mean_top.sqrt();
    if !(s_value > 0.0) {
        return Err(Error::DegenerateData);
    }
    Ok(ScaleReport {
        intrinsic_dim,
        s_value,
        sigma: bandwidth(s_value, x.n(), x.d()),
        covariance_eigenvalues,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn gaussian(n: usize, d: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n * d).map(|_| rng.sample(StandardNormal)).collect()
    }

    /// Rescales each column to zero mean and unit (n-1) variance.
    fn standardize(values: &mut [f64], n: usize, d: usize) {
        for k in 0..d {
            let mean = (0..n).map(|i| values[i * d + k]).sum::<f64>() / n as f64;
            let var = (0..n)
                .map(|i| (values[i * d + k] - mean).powi(2))
                .sum::<f64>()
                / (n - 1) as f64;
            for i in 0..n {
                values[i * d + k] = (values[i * d + k] - mean) / var.sqrt();
            }
        }
    }

    /// Two columns with exactly zero sample correlation and unit variance.
    fn whitened_pair(n: usize, seed: u64) -> Vec<f64> {
        let mut w = gaussian(n, 2, seed);
        standardize(&mut w, n, 2);
        let r12 = (0..n).map(|i| w[2 * i] * w[2 * i + 1]).sum::<f64>() / (n - 1) as f64;
        for i in 0..n {
            w[2 * i + 1] -= r12 * w[2 * i];
        }
        standardize(&mut w, n, 2);
        w
    }

    #[test]
    fn independent_features_give_full_dimension() {
        let x = DataMatrix::new(whitened_pair(2000, 1), 2000, 2).unwrap();
        assert_eq!(kaiser_intrinsic_dim(&x).unwrap(), 2);

        let exact =
            DataMatrix::from_rows(&[[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]]).unwrap();
        assert_eq!(kaiser_intrinsic_dim(&exact).unwrap(), 2);
    }

    #[test]
    fn kaiser_caps_at_twenty() {
        // 25 blocks of two identical columns: correlation eigenvalues are 2 (x25) and 0 (x25).
        let base = gaussian(200, 25, 2);
        let mut v = Vec::with_capacity(200 * 50);
        for r in base.chunks(25) {
            for &z in r {
                v.extend_from_slice(&[z, z]);
            }
        }
        let x = DataMatrix::new(v, 200, 50).unwrap();
        assert_eq!(kaiser_intrinsic_dim(&x).unwrap(), 20);
    }

    #[test]
    fn rank_one_data_has_dimension_one() {
        let base = gaussian(100, 1, 3);
        let v: Vec<f64> = base.iter().flat_map(|&z| [z, 2.0 * z, -0.5 * z]).collect();
        let x = DataMatrix::new(v, 100, 3).unwrap();
        assert_eq!(kaiser_intrinsic_dim(&x).unwrap(), 1);
    }

    #[test]
    fn constant_data_is_degenerate() {
        let x = DataMatrix::from_rows(&[[1.0, 2.0], [1.0, 2.0], [1.0, 2.0]]).unwrap();
        assert!(matches!(compute_sigma(&x), Err(Error::DegenerateData)));
        // one constant column is dropped, the other still works
        let x = DataMatrix::from_rows(&[[1.0, 2.0], [2.0, 2.0], [4.0, 2.0]]).unwrap();
        assert_eq!(kaiser_intrinsic_dim(&x).unwrap(), 1);
    }

    #[test]
    fn unit_variance_line() {
        let mut v = gaussian(1000, 1, 4);
        standardize(&mut v, 1000, 1);
        let x = DataMatrix::new(v, 1000, 1).unwrap();
        let r = compute_sigma(&x).unwrap();
        assert_eq!(r.intrinsic_dim, 1);
        assert!((r.s_value - 1.0).abs() < 1e-12);
        assert!((r.sigma - 0.251_188_643_150_958).abs() < 1e-9);
    }

    #[test]
    fn correlated_pair_uses_top_covariance_eigenvalue() {
        // Covariance with eigenvalues (4, 0.01) rotated so the correlation is 0.9,
        // giving correlation eigenvalues (1.9, 0.1).
        let corr_at = |t: f64| {
            let (c, s) = (t.cos(), t.sin());
            let a = 4.0 * c * c + 0.01 * s * s;
            let b = 4.0 * s * s + 0.01 * c * c;
            3.99 * s * c / (a * b).sqrt()
        };
        let (mut lo, mut hi) = (1e-6, std::f64::consts::FRAC_PI_4);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if corr_at(mid) < 0.9 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let t = 0.5 * (lo + hi);
        let (c, s) = (t.cos(), t.sin());

        let n = 400;
        let w = whitened_pair(n, 5);
        let v: Vec<f64> = w
            .chunks(2)
            .flat_map(|z| {
                let (u1, u2) = (2.0 * z[0], 0.1 * z[1]);
                [c * u1 - s * u2, s * u1 + c * u2]
            })
            .collect();
        let x = DataMatrix::new(v, n, 2).unwrap();
        let r = compute_sigma(&x).unwrap();
        assert_eq!(r.intrinsic_dim, 1);
        assert!((r.covariance_eigenvalues[0] - 4.0).abs() < 1e-9);
        assert!((r.covariance_eigenvalues[1] - 0.01).abs() < 1e-9);
        assert!((r.s_value - 2.0).abs() < 1e-9);
        assert!((r.sigma - 2.0 * (n as f64).powf(-1.0 / 7.0)).abs() < 1e-9);
    }

    #[test]
    fn bandwidth_exponent_is_exact() {
        let ns = [100usize, 1000, 10000];
        for d in 1..6 {
            let pts: Vec<(f64, f64)> = ns
                .iter()
                .map(|&n| ((n as f64).ln(), bandwidth(1.7, n, d).ln()))
                .collect();
            let mx = pts.iter().map(|p| p.0).sum::<f64>() / 3.0;
            let my = pts.iter().map(|p| p.1).sum::<f64>() / 3.0;
            let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
            let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
            let slope = sxy / sxx;
            assert!((slope + 1.0 / (2 * d + 3) as f64).abs() < 1e-9);
        }
    }

    #[test]
    fn translation_and_scaling() {
        let x = DataMatrix::new(gaussian(300, 3, 6), 300, 3).unwrap();
        let base = compute_sigma(&x).unwrap();
        let shifted = x
            .map_rows(|r, o| {
                o[0] = r[0] + 5.0;
                o[1] = r[1] - 3.0;
                o[2] = r[2] + 0.25;
            })
            .unwrap();
        let s = compute_sigma(&shifted).unwrap();
        assert_eq!(s.intrinsic_dim, base.intrinsic_dim);
        assert!((s.sigma - base.sigma).abs() <= 1e-12 * base.sigma);

        let scaled = x.map_rows(|r, o| o.iter_mut().zip(r).for_each(|(o, v)| *o = 3.0 * v)).unwrap();
        let s = compute_sigma(&scaled).unwrap();
        assert!((s.s_value - 3.0 * base.s_value).abs() < 1e-10);
        assert!((s.sigma - 3.0 * base.sigma).abs() < 1e-10);
    }
}
