//! Bottom eigenpairs of the normalized Laplacian and the spectral embedding
//! `D^(-1/2) U`.
//!
//! Two solvers are available. Small problems use a full dense symmetric
//! decomposition. Large ones use Lanczos with full reorthogonalization and
//! locking: each run is deflated against the already-converged vectors,
//! converged Ritz pairs are locked from the bottom of the spectrum up, and
//! the search stops only once a fresh deflated run confirms that nothing
//! smaller than the requested eigenvalues remains. Repeated eigenvalues
//! (disconnected graphs) are picked up by that final check, one copy per
//! run.
//!
//! Sign convention: every eigenvector is flipped so that its entry of
//! largest magnitude (lowest index on ties) is positive.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::graph::{inverse_sqrt_degrees, laplacian};
use crate::{Error, Result, SimilarityGraph};

/// Problems up to this size are solved by full dense decomposition.
pub const DENSE_LIMIT: usize = 2000;

/// Target residual `|L u - lambda u| / max(1, lambda)`.
pub const RESIDUAL_TOL: f64 = 1e-8;

const SYMMETRY_TOL: f64 = 1e-10;
const START_SEED: u64 = 0x1a2c_705e;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolverStrategy {
    /// Dense up to [`DENSE_LIMIT`], Lanczos above.
    #[default]
    Auto,
    Dense,
    Lanczos,
}

impl SolverStrategy {
    fn resolve(self, n: usize) -> Self {
        match self {
            Self::Auto if n <= DENSE_LIMIT => Self::Dense,
            Self::Auto => Self::Lanczos,
            s => s,
        }
    }
}

/// Eigenpairs with ascending eigenvalues; columns of `vectors` orthonormal.
#[derive(Debug, Clone)]
pub struct EigenPairs {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

impl EigenPairs {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct SpectralEmbedding {
    pub values: Vec<f64>,
    /// `U`, one eigenvector per column.
    pub vectors: DMatrix<f64>,
    /// `D^(-1/2) U`.
    pub scaled: DMatrix<f64>,
}

pub fn smallest_eigenpairs(l: &DMatrix<f64>, c: usize) -> Result<EigenPairs> {
    smallest_eigenpairs_with(l, c, SolverStrategy::Auto)
}

pub fn smallest_eigenpairs_with(
    l: &DMatrix<f64>,
    c: usize,
    strategy: SolverStrategy,
) -> Result<EigenPairs> {
    let mut solver = EigenSolver::new(l, strategy)?;
    solver.ensure(c)?;
    Ok(solver.pairs(c))
}

/// Embeds the graph with its `c` bottom Laplacian eigenvectors.
pub fn spectral_embed(g: &SimilarityGraph, c: usize) -> Result<SpectralEmbedding> {
    let mut cache = EigenCache::new(g, SolverStrategy::Auto)?;
    cache.embedding(c)
}

/// Makes the largest-magnitude entry of `v` positive.
fn fix_sign(mut v: DVector<f64>) -> DVector<f64> {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.neg_mut();
    }
    v
}

fn check_symmetric(l: &DMatrix<f64>) -> Result<()> {
    if !l.is_square() {
        return Err(Error::NonSymmetric(f64::INFINITY));
    }
    let n = l.nrows();
    let mut worst: f64 = 0.0;
    for j in 0..n {
        for i in (j + 1)..n {
            worst = worst.max((l[(i, j)] - l[(j, i)]).abs());
        }
    }
    if worst > SYMMETRY_TOL {
        Err(Error::NonSymmetric(worst))
    } else {
        Ok(())
    }
}

/// `y = L x` using columns of the symmetric `L`; each entry is a fixed-order
/// dot product, so the result is independent of the thread count.
fn matvec(l: &DMatrix<f64>, x: &DVector<f64>) -> DVector<f64> {
    let n = l.nrows();
    let out: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| l.column(i).dot(x))
        .collect();
    DVector::from_vec(out)
}

/// Incremental bottom-eigenpair solver for a fixed symmetric matrix.
#[derive(Debug)]
pub struct EigenSolver<'a> {
    l: &'a DMatrix<f64>,
    strategy: SolverStrategy,
    values: Vec<f64>,
    vectors: Vec<DVector<f64>>,
    /// Number of times the underlying solver was invoked.
    solver_calls: usize,
    matvecs: usize,
    complete: bool,
}

impl<'a> EigenSolver<'a> {
    pub fn new(l: &'a DMatrix<f64>, strategy: SolverStrategy) -> Result<Self> {
        check_symmetric(l)?;
        Ok(Self {
            l,
            strategy: strategy.resolve(l.nrows()),
            values: Vec::new(),
            vectors: Vec::new(),
            solver_calls: 0,
            matvecs: 0,
            complete: false,
        })
    }

    pub fn n(&self) -> usize {
        self.l.nrows()
    }

    pub fn solver_calls(&self) -> usize {
        self.solver_calls
    }

    pub fn available(&self) -> usize {
        self.values.len()
    }

    /// Makes at least `c` bottom eigenpairs available.
    pub fn ensure(&mut self, c: usize) -> Result<()> {
        let n = self.n();
        if c == 0 || c > n {
            return Err(Error::InvalidConfig(format!(
                "requested {c} eigenpairs of a {n} x {n} matrix"
            )));
        }
        if c <= self.values.len() {
            return Ok(());
        }
        self.solver_calls += 1;
        match self.strategy {
            SolverStrategy::Dense => self.dense(),
            _ => self.lanczos(c),
        }
    }

    /// The first `c` pairs; `ensure(c)` must have succeeded.
    pub fn pairs(&self, c: usize) -> EigenPairs {
        let n = self.n();
        let vectors = DMatrix::from_fn(n, c, |i, k| self.vectors[k][i]);
        EigenPairs {
            values: self.values[..c].to_vec(),
            vectors,
        }
    }

    fn dense(&mut self) -> Result<()> {
        let eig = SymmetricEigen::new(self.l.clone());
        let mut order: Vec<usize> = (0..self.n()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        self.values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        self.vectors = order
            .iter()
            .map(|&k| fix_sign(eig.eigenvectors.column(k).into_owned()))
            .collect();
        self.complete = true;
        Ok(())
    }

    fn orthogonalize(&self, w: &mut DVector<f64>, basis: &[DVector<f64>]) {
        // two passes of classical Gram-Schmidt
        for _ in 0..2 {
            for q in self.vectors.iter().chain(basis) {
                let h = q.dot(w);
                w.axpy(-h, q, 1.0);
            }
        }
    }

    fn random_start(&self, run: u64) -> DVector<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(START_SEED.wrapping_add(run));
        DVector::from_fn(self.n(), |_, _| rng.sample(StandardNormal))
    }

    fn lanczos(&mut self, want: usize) -> Result<()> {
        let n = self.n();
        let budget = 10 * n;
        let mut run = 0u64;
        let mut restart: Option<DVector<f64>> = None;

        loop {
            let remaining = n - self.values.len();
            if remaining == 0 {
                self.complete = true;
                break;
            }
            let need = want.saturating_sub(self.values.len()).max(1);
            let max_dim = remaining.min((3 * need + 50).max(100));

            let mut start = restart.take().unwrap_or_else(|| self.random_start(run));
            run += 1;
            self.orthogonalize(&mut start, &[]);
            let norm = start.norm();
            if norm < 1e-12 {
                restart = None;
                continue;
            }
            start /= norm;

            let outcome = self.lanczos_run(start, max_dim, need)?;
            if self.matvecs > budget {
                return Err(Error::ConvergenceFailure {
                    iterations: self.matvecs,
                });
            }

            let have_enough = self.values.len() >= want;
            // Nothing below the current c-th value remains: done.
            if have_enough {
                let cth = self.sorted_value(want - 1);
                let lowest_new = outcome.converged.first().map(|p| p.0);
                match lowest_new {
                    Some(mu) if mu < cth - 1e-10 => {}
                    Some(_) => break,
                    None if outcome.exhausted => break,
                    None => {
                        restart = outcome.restart;
                        continue;
                    }
                }
            }
            for (value, vector) in outcome.converged {
                self.values.push(value);
                self.vectors.push(vector);
            }
            self.sort_locked();
            if outcome.exhausted {
                self.complete = self.values.len() == n;
            }
            restart = outcome.restart;
        }
        self.sort_locked();
        Ok(())
    }

    fn sorted_value(&self, k: usize) -> f64 {
        let mut v = self.values.clone();
        v.sort_by(|a, b| a.total_cmp(b));
        v[k]
    }

    fn sort_locked(&mut self) {
        let mut order: Vec<usize> = (0..self.values.len()).collect();
        order.sort_by(|&a, &b| self.values[a].total_cmp(&self.values[b]));
        self.values = order.iter().map(|&k| self.values[k]).collect();
        self.vectors = order.iter().map(|&k| self.vectors[k].clone()).collect();
    }

    /// One Lanczos run from `start` (unit norm, orthogonal to the locked
    /// vectors). Returns the Ritz pairs that converged consecutively from the
    /// bottom of the run's spectrum.
    fn lanczos_run(&mut self, start: DVector<f64>, max_dim: usize, need: usize) -> Result<RunOutcome> {
        let mut basis: Vec<DVector<f64>> = vec![start];
        let mut alpha: Vec<f64> = Vec::new();
        let mut beta: Vec<f64> = Vec::new();
        let check_every = 10;

        loop {
            let j = basis.len() - 1;
            let mut w = matvec(self.l, &basis[j]);
            self.matvecs += 1;
            let a = basis[j].dot(&w);
            w.axpy(-a, &basis[j], 1.0);
            if j > 0 {
                w.axpy(-beta[j - 1], &basis[j - 1], 1.0);
            }
            self.orthogonalize(&mut w, &basis);
            alpha.push(a);
            let b = w.norm();
            let dim = basis.len();
            let breakdown = b < 1e-12;
            let full = dim >= max_dim;

            if breakdown || full || dim.is_multiple_of(check_every) {
                let ritz = tridiagonal_ritz(&alpha, &beta);
                let mut converged = Vec::new();
                for (k, value) in ritz.values.iter().enumerate() {
                    let estimate = (b * ritz.vectors[(dim - 1, k)]).abs();
                    if !breakdown && estimate > 1e-2 * RESIDUAL_TOL * value.abs().max(1.0) {
                        break;
                    }
                    let mut u = DVector::zeros(self.n());
                    for (q, s) in basis.iter().zip(ritz.vectors.column(k).iter()) {
                        u.axpy(*s, q, 1.0);
                    }
                    u /= u.norm();
                    let r = matvec(self.l, &u) - *value * &u;
                    self.matvecs += 1;
                    if r.norm() > RESIDUAL_TOL * value.abs().max(1.0) {
                        break;
                    }
                    converged.push((*value, fix_sign(u)));
                }

                if breakdown || full || converged.len() >= need {
                    let restart = if breakdown || converged.len() >= ritz.values.len() {
                        None
                    } else {
                        // Explicit restart from the wanted, not yet converged Ritz vectors.
                        let hi = ritz.values.len().min(converged.len() + need.max(1));
                        let mut v = DVector::zeros(self.n());
                        for k in converged.len()..hi {
                            for (q, s) in basis.iter().zip(ritz.vectors.column(k).iter()) {
                                v.axpy(*s, q, 1.0);
                            }
                        }
                        Some(v)
                    };
                    return Ok(RunOutcome {
                        converged,
                        restart,
                        exhausted: breakdown && dim + self.values.len() >= self.n(),
                    });
                }
            }
            beta.push(b);
            basis.push(w / b);
        }
    }
}

struct RunOutcome {
    converged: Vec<(f64, DVector<f64>)>,
    restart: Option<DVector<f64>>,
    exhausted: bool,
}

struct Ritz {
    values: Vec<f64>,
    vectors: DMatrix<f64>,
}

/// Ascending eigenpairs of the symmetric tridiagonal matrix with diagonal
/// `alpha` and off-diagonal `beta`.
fn tridiagonal_ritz(alpha: &[f64], beta: &[f64]) -> Ritz {
    let m = alpha.len();
    let t = DMatrix::from_fn(m, m, |i, j| {
        if i == j {
            alpha[i]
        } else if i + 1 == j {
            beta[i]
        } else if j + 1 == i {
            beta[j]
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(t);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    Ritz {
        values: order.iter().map(|&k| eig.eigenvalues[k]).collect(),
        vectors: DMatrix::from_fn(m, m, |i, k| eig.eigenvectors[(i, order[k])]),
    }
}

/// Laplacian of a graph plus a lazily grown set of its bottom eigenpairs.
/// Growing the requested count reuses every pair already computed.
#[derive(Debug)]
pub struct EigenCache {
    laplacian: DMatrix<f64>,
    inv_sqrt_degree: Vec<f64>,
    strategy: SolverStrategy,
    values: Vec<f64>,
    vectors: Vec<DVector<f64>>,
    solver_calls: usize,
}

impl EigenCache {
    pub fn new(g: &SimilarityGraph, strategy: SolverStrategy) -> Result<Self> {
        let laplacian = laplacian(g)?;
        let inv_sqrt_degree = inverse_sqrt_degrees(g)?;
        Ok(Self {
            laplacian,
            inv_sqrt_degree,
            strategy,
            values: Vec::new(),
            vectors: Vec::new(),
            solver_calls: 0,
        })
    }

    pub fn laplacian(&self) -> &DMatrix<f64> {
        &self.laplacian
    }

    /// How many times an eigensolver was actually run.
    pub fn solver_calls(&self) -> usize {
        self.solver_calls
    }

    pub fn cached(&self) -> usize {
        self.values.len()
    }

    pub fn ensure(&mut self, c: usize) -> Result<()> {
        if c <= self.values.len() {
            return Ok(());
        }
        let mut solver = EigenSolver::new(&self.laplacian, self.strategy)?;
        solver.values = std::mem::take(&mut self.values);
        solver.vectors = std::mem::take(&mut self.vectors);
        let result = solver.ensure(c);
        self.solver_calls += solver.solver_calls;
        self.values = solver.values;
        self.vectors = solver.vectors;
        result
    }

    pub fn embedding(&mut self, c: usize) -> Result<SpectralEmbedding> {
        self.ensure(c)?;
        let n = self.laplacian.nrows();
        let vectors = DMatrix::from_fn(n, c, |i, k| self.vectors[k][i]);
        let scaled = DMatrix::from_fn(n, c, |i, k| vectors[(i, k)] * self.inv_sqrt_degree[i]);
        Ok(SpectralEmbedding {
            values: self.values[..c].to_vec(),
            vectors,
            scaled,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{build_graph, DataMatrix};

    fn residual(l: &DMatrix<f64>, p: &EigenPairs, k: usize) -> f64 {
        let u = p.vectors.column(k);
        (l * u - p.values[k] * u).norm()
    }

    #[test]
    fn two_by_two() {
        let l = DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]);
        for s in [SolverStrategy::Dense, SolverStrategy::Lanczos] {
            let p = smallest_eigenpairs_with(&l, 2, s).unwrap();
            assert!(p.values[0].abs() < 1e-12);
            assert!((p.values[1] - 2.0).abs() < 1e-12);
            let h = std::f64::consts::FRAC_1_SQRT_2;
            assert!((p.vectors[(0, 0)] - h).abs() < 1e-10);
            assert!((p.vectors[(1, 0)] - h).abs() < 1e-10);
        }
    }

    #[test]
    fn complete_graph_spectrum() {
        let n = 5;
        let l = DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { -1.0 / (n - 1) as f64 });
        for s in [SolverStrategy::Dense, SolverStrategy::Lanczos] {
            let p = smallest_eigenpairs_with(&l, n, s).unwrap();
            assert!(p.values[0].abs() < 1e-10);
            for v in &p.values[1..] {
                assert!((v - 1.25).abs() < 1e-10, "{s:?} {v}");
            }
            for k in 0..n {
                assert!(residual(&l, &p, k) < 1e-8);
            }
            let gram = p.vectors.transpose() * &p.vectors;
            assert!((gram - DMatrix::identity(n, n)).amax() < 1e-8);
        }
    }

    #[test]
    fn rejects_asymmetric_input() {
        let l = DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -0.5, 1.0]);
        assert!(matches!(smallest_eigenpairs(&l, 1), Err(Error::NonSymmetric(_))));
    }

    #[test]
    fn sign_convention() {
        let v = fix_sign(DVector::from_vec(vec![0.1, -0.9, 0.3]));
        assert!(v[1] > 0.0);
        let v = fix_sign(DVector::from_vec(vec![-0.5, 0.5]));
        assert!(v[0] > 0.0);
    }

    fn two_pairs() -> DataMatrix {
        DataMatrix::from_rows(&[[0.0, 0.0], [0.0, 0.0], [50.0, 0.0], [50.0, 0.0]]).unwrap()
    }

    #[test]
    fn disconnected_pairs_embed_to_two_values() {
        let g = build_graph(&two_pairs(), 1.0).unwrap();
        let e = spectral_embed(&g, 2).unwrap();
        assert!(e.values[0].abs() < 1e-10 && e.values[1].abs() < 1e-10);
        let rows: Vec<(f64, f64)> = (0..4).map(|i| (e.scaled[(i, 0)], e.scaled[(i, 1)])).collect();
        let close = |a: (f64, f64), b: (f64, f64)| (a.0 - b.0).abs() + (a.1 - b.1).abs() < 1e-9;
        assert!(close(rows[0], rows[1]));
        assert!(close(rows[2], rows[3]));
        assert!(!close(rows[0], rows[2]));
    }

    #[test]
    fn single_column_is_constant_after_scaling() {
        let x = DataMatrix::from_rows(&[[0.0], [0.5], [1.3], [2.0], [2.2]]).unwrap();
        let g = build_graph(&x, 0.7).unwrap();
        let e = spectral_embed(&g, 1).unwrap();
        let first = e.scaled[(0, 0)];
        for i in 1..5 {
            assert!((e.scaled[(i, 0)] - first).abs() < 1e-10);
        }
    }

    #[test]
    fn lanczos_finds_repeated_zero_eigenvalues() {
        // three disconnected groups: eigenvalue 0 has multiplicity 3
        let mut rows = Vec::new();
        for c in 0..3 {
            for k in 0..6 {
                rows.push([100.0 * c as f64 + 0.3 * k as f64, 0.1 * (k % 2) as f64]);
            }
        }
        let x = DataMatrix::from_rows(&rows).unwrap();
        let g = build_graph(&x, 0.5).unwrap();
        let l = laplacian(&g).unwrap();
        let dense = smallest_eigenpairs_with(&l, 5, SolverStrategy::Dense).unwrap();
        let lanczos = smallest_eigenpairs_with(&l, 5, SolverStrategy::Lanczos).unwrap();
        for k in 0..5 {
            assert!((dense.values[k] - lanczos.values[k]).abs() < 1e-8);
            assert!(residual(&l, &lanczos, k) < 1e-8);
        }
        assert!(lanczos.values[2].abs() < 1e-10);
    }

    #[test]
    fn cache_reuses_pairs() {
        let x = DataMatrix::from_rows(&[[0.0], [0.4], [1.1], [1.9], [3.0], [3.3]]).unwrap();
        let g = build_graph(&x, 0.6).unwrap();
        let mut cache = EigenCache::new(&g, SolverStrategy::Lanczos).unwrap();
        let e2 = cache.embedding(2).unwrap();
        let calls = cache.solver_calls();
        let again = cache.embedding(2).unwrap();
        assert_eq!(cache.solver_calls(), calls);
        assert_eq!(e2.values, again.values);
        let e3 = cache.embedding(3).unwrap();
        for k in 0..2 {
            assert!((e2.values[k] - e3.values[k]).abs() < 1e-8);
        }
    }
}
