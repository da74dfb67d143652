//! Monte Carlo checks of the large-sample behaviour of graph-cut quantities.
//!
//! For an i.i.d. sample from a density `p` and a bandwidth `sigma_n -> 0`
//! with `n * sigma_n^(2d+2+eps) -> inf`, the scaled statistics below converge
//! almost surely:
//!
//! | statistic   | scaled quantity                                         | limit                                   |
//! |-------------|---------------------------------------------------------|-----------------------------------------|
//! | volume      | `c_d / (n^2 s^d) * sum_{i in M} sum_{j != i} k_ij`       | `int_M p^2`                             |
//! | cut         | `c_d sqrt(2 pi) / (n^2 s^(d+1)) * sum_{i in S1, j in S2} k_ij` | `oint_S p^2`                     |
//! | ncut        | `sqrt(2 pi) / s * NCut(S1, S2)`                          | `oint_S p^2 (1/int_S1 p^2 + 1/int_S2 p^2)` |
//! | ratio cut   | scaled cut `* (n/|S1| + n/|S2|)`                         | `oint_S p^2 (1/P(S1) + 1/P(S2))`        |
//!
//! with `k_ij = exp(-|x_i - x_j|^2 / (2 s^2))` and `c_d = (2 pi)^(-d/2)`.
//! Surfaces are hyperplanes, for which every limit has a closed form.

use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::dataset::sq_dist;
use crate::sum::Neumaier;
use crate::{DataMatrix, Error, Result};

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / SQRT_2)
}

fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

/// The hyperplane `{x : normal . x = offset}`; the negative side
/// `normal . x < offset` is `S1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HalfspaceSurface {
    normal: Vec<f64>,
    offset: f64,
}

impl HalfspaceSurface {
    /// `normal` is rescaled to unit length.
    pub fn new(normal: Vec<f64>, offset: f64) -> Result<Self> {
        let norm = normal.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 0.0 && norm.is_finite()) || !offset.is_finite() {
            return Err(Error::InvalidConfig(
                "surface normal must be non-zero and finite".into(),
            ));
        }
        Ok(Self {
            normal: normal.iter().map(|v| v / norm).collect(),
            offset,
        })
    }

    /// The hyperplane `x_0 = offset` in `dim` dimensions.
    pub fn axis(dim: usize, offset: f64) -> Self {
        let mut normal = vec![0.0; dim.max(1)];
        normal[0] = 1.0;
        Self { normal, offset }
    }

    pub fn normal(&self) -> &[f64] {
        &self.normal
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn dim(&self) -> usize {
        self.normal.len()
    }

    pub fn on_negative_side(&self, x: &[f64]) -> bool {
        self.normal.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() < self.offset
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Region {
    Negative(HalfspaceSurface),
    Positive(HalfspaceSurface),
    Whole,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum ModelKind {
    Gaussian { dim: usize },
    Mixture { separation: f64 },
    Uniform,
}

/// A density with a seeded sampler and closed-form integrals of `p^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityModel {
    kind: ModelKind,
}

/// One-dimensional view of a half-line: `x < t` (`below`) or `x > t`.
struct HalfLine {
    t: f64,
    below: bool,
}

impl DensityModel {
    /// Standard normal in `dim` dimensions.
    pub fn gaussian(dim: usize) -> Self {
        Self {
            kind: ModelKind::Gaussian { dim: dim.max(1) },
        }
    }

    /// Equal-weight mixture of unit normals centred at `+-separation / 2`.
    pub fn mixture_1d(separation: f64) -> Self {
        Self {
            kind: ModelKind::Mixture { separation },
        }
    }

    /// Uniform on `[0, 1]`. Its density jumps at the edges, so it is not
    /// Lipschitz; kept as a negative control.
    pub fn uniform_1d() -> Self {
        Self {
            kind: ModelKind::Uniform,
        }
    }

    pub const NAMES: [&'static str; 4] = ["gauss1d", "gauss2d", "mixture1d", "uniform1d"];

    /// Looks up a built-in model; `separation` applies to `mixture1d`.
    pub fn by_name(name: &str, separation: f64) -> Result<Self> {
        match name {
            "gauss1d" => Ok(Self::gaussian(1)),
            "gauss2d" => Ok(Self::gaussian(2)),
            "mixture1d" => Ok(Self::mixture_1d(separation)),
            "uniform1d" => Ok(Self::uniform_1d()),
            _ => Err(Error::InvalidConfig(format!(
                "unknown model {name:?}; valid models: {}",
                Self::NAMES.join(", ")
            ))),
        }
    }

    pub fn name(&self) -> String {
        match self.kind {
            ModelKind::Gaussian { dim } => format!("gauss{dim}d"),
            ModelKind::Mixture { .. } => "mixture1d".into(),
            ModelKind::Uniform => "uniform1d".into(),
        }
    }

    pub fn dim(&self) -> usize {
        match self.kind {
            ModelKind::Gaussian { dim } => dim,
            _ => 1,
        }
    }

    /// Draws `n` points from a ChaCha8 stream seeded with `seed`. Samples
    /// for the same seed are nested: the first `m` rows of a size-`n` draw
    /// equal the size-`m` draw.
    pub fn sample(&self, n: usize, seed: u64) -> Result<DataMatrix> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = self.dim();
        let mut values = Vec::with_capacity(n * d);
        for _ in 0..n {
            match self.kind {
                ModelKind::Gaussian { dim } => {
                    for _ in 0..dim {
                        values.push(rng.sample(StandardNormal));
                    }
                }
                ModelKind::Mixture { separation } => {
                    let z: f64 = rng.sample(StandardNormal);
                    let shift = if rng.gen::<bool>() { 0.5 } else { -0.5 } * separation;
                    values.push(z + shift);
                }
                ModelKind::Uniform => values.push(rng.gen::<f64>()),
            }
        }
        DataMatrix::new(values, n, d)
    }

    pub fn density(&self, x: &[f64]) -> f64 {
        match self.kind {
            ModelKind::Gaussian { .. } => x.iter().map(|&v| normal_pdf(v)).product(),
            ModelKind::Mixture { separation } => {
                let a = 0.5 * separation;
                0.5 * (normal_pdf(x[0] - a) + normal_pdf(x[0] + a))
            }
            ModelKind::Uniform => {
                if (0.0..=1.0).contains(&x[0]) {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    fn check_surface(&self, s: &HalfspaceSurface) -> Result<()> {
        if s.dim() != self.dim() {
            return Err(Error::LengthMismatch {
                expected: self.dim(),
                found: s.dim(),
            });
        }
        Ok(())
    }

    fn half_line(s: &HalfspaceSurface) -> HalfLine {
        if s.normal[0] > 0.0 {
            HalfLine {
                t: s.offset,
                below: true,
            }
        } else {
            HalfLine {
                t: -s.offset,
                below: false,
            }
        }
    }

    /// 1-d only: `P(X < t)` and `int_{-inf}^t p^2`.
    fn cdf_1d(&self, t: f64) -> (f64, f64) {
        match self.kind {
            ModelKind::Gaussian { .. } => (
                normal_cdf(t),
                normal_cdf(SQRT_2 * t) / (2.0 * PI.sqrt()),
            ),
            ModelKind::Mixture { separation } => {
                let a = 0.5 * separation;
                let prob = 0.5 * (normal_cdf(t - a) + normal_cdf(t + a));
                let sq = (normal_cdf(SQRT_2 * (t - a))
                    + normal_cdf(SQRT_2 * (t + a))
                    + 2.0 * (-a * a).exp() * normal_cdf(SQRT_2 * t))
                    / (8.0 * PI.sqrt());
                (prob, sq)
            }
            ModelKind::Uniform => {
                let c = t.clamp(0.0, 1.0);
                (c, c)
            }
        }
    }

    /// `P(X in S1)` for the negative side of `s`.
    pub fn negative_side_prob(&self, s: &HalfspaceSurface) -> Result<f64> {
        self.check_surface(s)?;
        Ok(match self.kind {
            ModelKind::Gaussian { .. } => normal_cdf(s.offset),
            _ => {
                let h = Self::half_line(s);
                let (p, _) = self.cdf_1d(h.t);
                if h.below {
                    p
                } else {
                    1.0 - p
                }
            }
        })
    }

    pub fn region_prob(&self, region: &Region) -> Result<f64> {
        match region {
            Region::Whole => Ok(1.0),
            Region::Negative(s) => self.negative_side_prob(s),
            Region::Positive(s) => Ok(1.0 - self.negative_side_prob(s)?),
        }
    }

    /// `int_{R^d} p^2`.
    pub fn total_squared_mass(&self) -> f64 {
        match self.kind {
            ModelKind::Gaussian { dim } => (4.0 * PI).powf(-(dim as f64) / 2.0),
            ModelKind::Mixture { separation } => {
                let a = 0.5 * separation;
                (1.0 + (-a * a).exp()) / (4.0 * PI.sqrt())
            }
            ModelKind::Uniform => 1.0,
        }
    }

    /// `int_{S1} p^2` for the negative side of `s`.
    pub fn negative_side_squared_mass(&self, s: &HalfspaceSurface) -> Result<f64> {
        self.check_surface(s)?;
        Ok(match self.kind {
            // p^2 = (4 pi)^(-d/2) * density of N(0, I/2)
            ModelKind::Gaussian { .. } => self.total_squared_mass() * normal_cdf(SQRT_2 * s.offset),
            _ => {
                let h = Self::half_line(s);
                let (_, q) = self.cdf_1d(h.t);
                if h.below {
                    q
                } else {
                    self.total_squared_mass() - q
                }
            }
        })
    }

    pub fn squared_mass(&self, region: &Region) -> Result<f64> {
        match region {
            Region::Whole => Ok(self.total_squared_mass()),
            Region::Negative(s) => self.negative_side_squared_mass(s),
            Region::Positive(s) => {
                Ok(self.total_squared_mass() - self.negative_side_squared_mass(s)?)
            }
        }
    }

    /// `oint_S p^2` over the hyperplane.
    pub fn surface_squared_mass(&self, s: &HalfspaceSurface) -> Result<f64> {
        self.check_surface(s)?;
        Ok(match self.kind {
            ModelKind::Gaussian { dim } => {
                let d = dim as f64;
                (2.0 * PI).powf(-d) * PI.powf((d - 1.0) / 2.0) * (-s.offset * s.offset).exp()
            }
            _ => {
                let t = Self::half_line(s).t;
                let p = if matches!(self.kind, ModelKind::Uniform) {
                    if t > 0.0 && t < 1.0 {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    self.density(&[t])
                };
                p * p
            }
        })
    }

    /// Limit of `statistic` for this density and surface.
    pub fn target(&self, statistic: Statistic, s: &HalfspaceSurface) -> Result<f64> {
        let surface = || self.surface_squared_mass(s);
        Ok(match statistic {
            Statistic::Volume => self.negative_side_squared_mass(s)?,
            Statistic::TotalVolume => self.total_squared_mass(),
            Statistic::Cut => surface()?,
            Statistic::Ncut => {
                let q1 = self.negative_side_squared_mass(s)?;
                let q2 = self.total_squared_mass() - q1;
                surface()? * (1.0 / q1 + 1.0 / q2)
            }
            Statistic::RatioCut => {
                let p1 = self.negative_side_prob(s)?;
                surface()? * (1.0 / p1 + 1.0 / (1.0 - p1))
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    /// Scaled volume of the negative side `S1`.
    Volume,
    /// Scaled volume of the whole sample.
    TotalVolume,
    Cut,
    Ncut,
    RatioCut,
}

impl Statistic {
    pub const ALL: [Statistic; 5] = [
        Statistic::Volume,
        Statistic::TotalVolume,
        Statistic::Cut,
        Statistic::Ncut,
        Statistic::RatioCut,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Statistic::Volume => "volume",
            Statistic::TotalVolume => "total_volume",
            Statistic::Cut => "cut",
            Statistic::Ncut => "ncut",
            Statistic::RatioCut => "ratio_cut",
        }
    }
}

impl fmt::Display for Statistic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Statistic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Statistic::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Statistic::ALL.iter().map(|s| s.as_str()).collect();
                Error::InvalidConfig(format!(
                    "unknown statistic {s:?}; valid statistics: {}",
                    names.join(", ")
                ))
            })
    }
}

/// Kernel sums for the two-sided split of a sample by a hyperplane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairSums {
    pub n: usize,
    pub dim: usize,
    pub sigma: f64,
    pub n_negative: usize,
    pub n_positive: usize,
    /// `sum_{i in S1} sum_{j != i} k_ij`.
    pub volume_negative: f64,
    pub volume_positive: f64,
    /// `sum_{i in S1, j in S2} k_ij`.
    pub cross: f64,
}

impl PairSums {
    /// Accumulates all `n (n - 1) / 2` kernel values once, in fixed order,
    /// with compensated summation at both the row and the total level.
    pub fn compute(x: &DataMatrix, s: &HalfspaceSurface, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidSigma(sigma));
        }
        if s.dim() != x.d() {
            return Err(Error::LengthMismatch {
                expected: x.d(),
                found: s.dim(),
            });
        }
        let (neg, pos): (Vec<usize>, Vec<usize>) =
            (0..x.n()).partition(|&i| s.on_negative_side(x.row(i)));
        let pack = |idx: &[usize]| -> Vec<f64> {
            idx.iter().flat_map(|&i| x.row(i).iter().copied()).collect()
        };
        let (a, b) = (pack(&neg), pack(&pos));
        let d = x.d();
        let scale = -1.0 / (2.0 * sigma * sigma);

        let within = |v: &[f64]| {
            let m = v.len() / d;
            let mut total = Neumaier::default();
            for i in 0..m {
                let xi = &v[i * d..(i + 1) * d];
                let mut row = Neumaier::default();
                for j in (i + 1)..m {
                    row.add((sq_dist(xi, &v[j * d..(j + 1) * d]) * scale).exp());
                }
                total.add(row.value());
            }
            total.value()
        };
        let mut cross = Neumaier::default();
        for xi in a.chunks_exact(d) {
            let mut row = Neumaier::default();
            for xj in b.chunks_exact(d) {
                row.add((sq_dist(xi, xj) * scale).exp());
            }
            cross.add(row.value());
        }
        let cross = cross.value();
        let (w_neg, w_pos) = (within(&a), within(&b));
        Ok(Self {
            n: x.n(),
            dim: d,
            sigma,
            n_negative: neg.len(),
            n_positive: pos.len(),
            volume_negative: 2.0 * w_neg + cross,
            volume_positive: 2.0 * w_pos + cross,
            cross,
        })
    }

    fn c_d(&self) -> f64 {
        (2.0 * PI).powf(-(self.dim as f64) / 2.0)
    }

    fn require_both_sides(&self) -> Result<()> {
        if self.n_negative == 0 || self.n_positive == 0 {
            Err(Error::EmptySide)
        } else {
            Ok(())
        }
    }

    fn volume_scale(&self) -> f64 {
        let n = self.n as f64;
        self.c_d() / (n * n * self.sigma.powi(self.dim as i32))
    }

    pub fn scaled_volume(&self, region: &RegionSide) -> f64 {
        let raw = match region {
            RegionSide::Negative => self.volume_negative,
            RegionSide::Positive => self.volume_positive,
            RegionSide::Whole => self.volume_negative + self.volume_positive,
        };
        self.volume_scale() * raw
    }

    pub fn scaled_cut(&self) -> Result<f64> {
        self.require_both_sides()?;
        Ok(self.volume_scale() * (2.0 * PI).sqrt() / self.sigma * self.cross)
    }

    pub fn scaled_ncut(&self) -> Result<f64> {
        self.require_both_sides()?;
        let ncut = self.cross / self.volume_negative + self.cross / self.volume_positive;
        Ok((2.0 * PI).sqrt() / self.sigma * ncut)
    }

    /// Count factors `(n / |S1|, n / |S2|)` of the ratio cut.
    pub fn ratio_factors(&self) -> (f64, f64) {
        let n = self.n as f64;
        (n / self.n_negative as f64, n / self.n_positive as f64)
    }

    pub fn scaled_ratio_cut(&self) -> Result<f64> {
        let (f1, f2) = self.ratio_factors();
        Ok(self.scaled_cut()? * (f1 + f2))
    }

    pub fn statistic(&self, statistic: Statistic) -> Result<f64> {
        match statistic {
            Statistic::Volume => Ok(self.scaled_volume(&RegionSide::Negative)),
            Statistic::TotalVolume => Ok(self.scaled_volume(&RegionSide::Whole)),
            Statistic::Cut => self.scaled_cut(),
            Statistic::Ncut => self.scaled_ncut(),
            Statistic::RatioCut => self.scaled_ratio_cut(),
        }
    }
}

/// Which part of a hyperplane split a volume refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegionSide {
    Negative,
    Positive,
    Whole,
}

pub fn scaled_ncut_estimate(x: &DataMatrix, s: &HalfspaceSurface, sigma: f64) -> Result<f64> {
    PairSums::compute(x, s, sigma)?.scaled_ncut()
}

pub fn scaled_cut_estimate(x: &DataMatrix, s: &HalfspaceSurface, sigma: f64) -> Result<f64> {
    PairSums::compute(x, s, sigma)?.scaled_cut()
}

pub fn scaled_ratio_cut_estimate(x: &DataMatrix, s: &HalfspaceSurface, sigma: f64) -> Result<f64> {
    PairSums::compute(x, s, sigma)?.scaled_ratio_cut()
}

/// Scaled volume of the sample points in `region`; zero when none fall there.
pub fn scaled_volume_estimate(x: &DataMatrix, region: &Region, sigma: f64) -> Result<f64> {
    let (surface, side) = match region {
        Region::Negative(s) => (s.clone(), RegionSide::Negative),
        Region::Positive(s) => (s.clone(), RegionSide::Positive),
        Region::Whole => (HalfspaceSurface::axis(x.d(), 0.0), RegionSide::Whole),
    };
    Ok(PairSums::compute(x, &surface, sigma)?.scaled_volume(&side))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    /// Strictly ascending sample sizes.
    pub n_grid: Vec<usize>,
    /// Number of seeds per sample size.
    pub seeds: usize,
    /// Cell `k` uses seed `base_seed + k`.
    pub base_seed: u64,
    /// Bandwidth rule `sigma_n = n^(-alpha)`.
    pub alpha: f64,
}

impl StudyConfig {
    /// `alpha = 1/(2d+3)`, the bandwidth exponent used for clustering.
    pub fn default_alpha(dim: usize) -> f64 {
        1.0 / (2 * dim + 3) as f64
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.n_grid.is_empty() || self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig(
                "n_grid must be non-empty and strictly ascending".into(),
            ));
        }
        if self.n_grid[0] < 2 {
            return Err(Error::InvalidConfig("sample sizes must be at least 2".into()));
        }
        if self.seeds == 0 {
            return Err(Error::InvalidConfig("need at least one seed".into()));
        }
        let limit = 1.0 / (2 * dim + 2) as f64;
        if !(self.alpha > 0.0 && self.alpha < limit) {
            return Err(Error::InvalidConfig(format!(
                "alpha = {} violates the rate condition n * sigma_n^(2d+2+eps) -> inf \
                 for sigma_n = n^(-alpha); need 0 < alpha < 1/(2d+2) = {limit}",
                self.alpha
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub n: usize,
    pub seed: u64,
    pub sigma: f64,
    /// `None` when one side of the surface received no points.
    pub estimate: Option<f64>,
    pub error: Option<f64>,
    pub n_negative: usize,
    pub n_positive: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub sigma: f64,
    pub median_error: Option<f64>,
    pub iqr: Option<f64>,
    pub median_estimate: Option<f64>,
    pub missing: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRun {
    pub model: String,
    pub surface: HalfspaceSurface,
    pub statistic: Statistic,
    pub alpha: f64,
    pub target: f64,
    pub cells: Vec<Cell>,
    pub summary: Vec<Summary>,
}

impl ConvergenceRun {
    pub fn median_errors(&self) -> Vec<Option<f64>> {
        self.summary.iter().map(|s| s.median_error).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,seed,sigma,estimate,error,n_negative,n_positive\n");
        let opt = |v: Option<f64>| v.map(|v| format!("{v}")).unwrap_or_default();
        for c in &self.cells {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                c.n,
                c.seed,
                c.sigma,
                opt(c.estimate),
                opt(c.error),
                c.n_negative,
                c.n_positive
            ));
        }
        out
    }
}

/// Quantile with linear interpolation between order statistics.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

fn summarize(n: usize, sigma: f64, cells: &[&Cell]) -> Summary {
    let mut errors: Vec<f64> = cells.iter().filter_map(|c| c.error).collect();
    let mut estimates: Vec<f64> = cells.iter().filter_map(|c| c.estimate).collect();
    errors.sort_by(|a, b| a.total_cmp(b));
    estimates.sort_by(|a, b| a.total_cmp(b));
    let missing = cells.len() - errors.len();
    if errors.is_empty() {
        return Summary {
            n,
            sigma,
            median_error: None,
            iqr: None,
            median_estimate: None,
            missing,
        };
    }
    Summary {
        n,
        sigma,
        median_error: Some(quantile(&errors, 0.5)),
        iqr: Some(quantile(&errors, 0.75) - quantile(&errors, 0.25)),
        median_estimate: Some(quantile(&estimates, 0.5)),
        missing,
    }
}

pub fn convergence_study(
    model: &DensityModel,
    surface: &HalfspaceSurface,
    statistic: Statistic,
    cfg: &StudyConfig,
) -> Result<ConvergenceRun> {
    Ok(convergence_studies(model, surface, &[statistic], cfg)?.remove(0))
}

/// Runs several statistics on the same `(n, seed)` samples; each cell's
/// pair sums are computed once and shared.
pub fn convergence_studies(
    model: &DensityModel,
    surface: &HalfspaceSurface,
    statistics: &[Statistic],
    cfg: &StudyConfig,
) -> Result<Vec<ConvergenceRun>> {
    cfg.validate(model.dim())?;
    if surface.dim() != model.dim() {
        return Err(Error::LengthMismatch {
            expected: model.dim(),
            found: surface.dim(),
        });
    }
    let targets = statistics
        .iter()
        .map(|&st| model.target(st, surface))
        .collect::<Result<Vec<_>>>()?;

    let jobs: Vec<(usize, u64)> = cfg
        .n_grid
        .iter()
        .flat_map(|&n| (0..cfg.seeds as u64).map(move |k| (n, cfg.base_seed + k)))
        .collect();
    let sums = jobs
        .par_iter()
        .map(|&(n, seed)| {
            let x = model.sample(n, seed)?;
            let sigma = (n as f64).powf(-cfg.alpha);
            PairSums::compute(&x, surface, sigma)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut runs = Vec::with_capacity(statistics.len());
    for (&statistic, &target) in statistics.iter().zip(&targets) {
        let cells: Vec<Cell> = jobs
            .iter()
            .zip(&sums)
            .map(|(&(n, seed), ps)| {
                let estimate = match ps.statistic(statistic) {
                    Ok(v) => Some(v),
                    Err(Error::EmptySide) => None,
                    Err(e) => return Err(e),
                };
                Ok(Cell {
                    n,
                    seed,
                    sigma: ps.sigma,
                    estimate,
                    error: estimate.map(|e| (e - target).abs()),
                    n_negative: ps.n_negative,
                    n_positive: ps.n_positive,
                })
            })
            .collect::<Result<_>>()?;
        let summary = cfg
            .n_grid
            .iter()
            .map(|&n| {
                let group: Vec<&Cell> = cells.iter().filter(|c| c.n == n).collect();
                summarize(n, (n as f64).powf(-cfg.alpha), &group)
            })
            .collect();
        runs.push(ConvergenceRun {
            model: model.name(),
            surface: surface.clone(),
            statistic,
            alpha: cfg.alpha,
            target,
            cells,
            summary,
        });
    }
    Ok(runs)
}
