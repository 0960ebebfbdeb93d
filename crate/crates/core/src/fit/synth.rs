//! Synthetic surrogate dataset with the published marginals and
//! correlations.
//!
//! Draws come from a Gaussian copula. Each margin is the piecewise-linear
//! quantile function through the published min/quartiles/max. Because that
//! transform bends the correlation, the latent normal correlations are
//! solved pair by pair so the output Pearson correlations match the
//! targets, then repaired to the nearest correlation matrix if needed.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use super::dataset::{Dataset, ExperimentRecord, Provenance};
use super::reference;

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("need at least 10 rows, got {0}")]
    TooFewRows(usize),
    #[error("correlation repair did not converge after {iterations} iterations (residual {residual:e})")]
    RepairDiverged { iterations: usize, residual: f64 },
}

/// Piecewise-linear quantile function through `(p, value)` knots.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileMap {
    knots: Vec<(f64, f64)>,
}

impl QuantileMap {
    pub fn new(knots: Vec<(f64, f64)>) -> Self {
        Self { knots }
    }

    /// Knots at 0, ¼, ½, ¾, 1 from the published summary column.
    pub fn from_summary(column: usize) -> Self {
        let s = &reference::SUMMARY;
        Self::new(vec![
            (0.0, s[reference::MIN][column]),
            (0.25, s[reference::Q25][column]),
            (0.5, s[reference::Q50][column]),
            (0.75, s[reference::Q75][column]),
            (1.0, s[reference::MAX][column]),
        ])
    }

    pub fn apply(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        let k = self
            .knots
            .windows(2)
            .position(|w| u <= w[1].0)
            .unwrap_or(self.knots.len() - 2);
        let ((p0, v0), (p1, v1)) = (self.knots[k], self.knots[k + 1]);
        v0 + (v1 - v0) * (u - p0) / (p1 - p0)
    }
}

/// Nodes and weights of Gauss–Hermite quadrature for the standard normal
/// measure (weights sum to 1), from the eigen decomposition of the Jacobi
/// matrix of the probabilists' Hermite polynomials.
pub fn gauss_hermite(order: usize) -> Vec<(f64, f64)> {
    let jacobi = DMatrix::from_fn(order, order, |i, j| {
        if i + 1 == j || j + 1 == i {
            (i.max(j) as f64).sqrt()
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(jacobi);
    let mut nodes: Vec<(f64, f64)> = (0..order)
        .map(|k| (eig.eigenvalues[k], eig.eigenvectors[(0, k)].powi(2)))
        .collect();
    nodes.sort_by(|a, b| a.0.total_cmp(&b.0));
    nodes
}

const QUADRATURE_ORDER: usize = 64;

struct Margin {
    values: Vec<f64>,
    mean: f64,
    std: f64,
}

/// Synthetic dataset generator with calibrated latent correlations.
pub struct Synthesizer {
    maps: Vec<QuantileMap>,
    cholesky: DMatrix<f64>,
    latent: DMatrix<f64>,
}

impl Synthesizer {
    pub fn published() -> Result<Self, SynthError> {
        let maps: Vec<QuantileMap> = (0..9).map(QuantileMap::from_summary).collect();
        let target = DMatrix::from_fn(9, 9, |i, j| reference::CORRELATION[i][j]);
        Self::new(maps, target)
    }

    pub fn new(maps: Vec<QuantileMap>, target: DMatrix<f64>) -> Result<Self, SynthError> {
        let latent = calibrate(&maps, &target);
        let repaired = nearest_correlation(&latent, 1e-6, 2000)?;
        let cholesky = nalgebra::Cholesky::new(repaired.clone())
            .map(|c| c.l())
            .ok_or(SynthError::RepairDiverged {
                iterations: 0,
                residual: f64::NAN,
            })?;
        Ok(Self {
            maps,
            cholesky,
            latent: repaired,
        })
    }

    pub fn latent_correlation(&self) -> &DMatrix<f64> {
        &self.latent
    }

    pub fn sample(&self, n: usize, seed: u64) -> Result<Dataset, SynthError> {
        if n < 10 {
            return Err(SynthError::TooFewRows(n));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::standard();
        let d = self.maps.len();
        let mut records = Vec::with_capacity(n);
        let mut z = vec![0.0; d];
        for _ in 0..n {
            for zi in z.iter_mut() {
                *zi = StandardNormal.sample(&mut rng);
            }
            let mut v = [0.0; 9];
            for i in 0..d {
                let x: f64 = (0..=i).map(|k| self.cholesky[(i, k)] * z[k]).sum();
                v[i] = self.maps[i].apply(normal.cdf(x));
            }
            records.push(ExperimentRecord::from_array(v));
        }
        Ok(Dataset::new(records, Provenance::Synthetic))
    }
}

/// `n` rows honouring the published marginals and correlations.
pub fn synthesize_dataset(n: usize, seed: u64) -> Result<Dataset, SynthError> {
    Synthesizer::published()?.sample(n, seed)
}

fn margin(map: &QuantileMap, gh: &[(f64, f64)]) -> Margin {
    let normal = Normal::standard();
    let values: Vec<f64> = gh.iter().map(|(z, _)| map.apply(normal.cdf(*z))).collect();
    let mean: f64 = values.iter().zip(gh).map(|(v, (_, w))| v * w).sum();
    let var: f64 = values.iter().zip(gh).map(|(v, (_, w))| w * (v - mean).powi(2)).sum();
    Margin {
        values,
        mean,
        std: var.sqrt(),
    }
}

fn correlation_for(a: &Margin, map_b: &QuantileMap, b: &Margin, r: f64, gh: &[(f64, f64)]) -> f64 {
    let normal = Normal::standard();
    let s = (1.0 - r * r).max(0.0).sqrt();
    let table: Vec<Vec<f64>> = gh
        .iter()
        .map(|(z1, _)| gh.iter().map(|(w, _)| map_b.apply(normal.cdf(r * z1 + s * w))).collect())
        .collect();
    let mut cov = 0.0;
    for (i, (_, wi)) in gh.iter().enumerate() {
        let inner: f64 = gh.iter().zip(&table[i]).map(|((_, wj), v)| wj * (v - b.mean)).sum();
        cov += wi * (a.values[i] - a.mean) * inner;
    }
    cov / (a.std * b.std)
}

/// Latent correlations whose transformed correlations hit the targets,
/// solved per pair by bisection on `r ∈ (−1, 1)`.
fn calibrate(maps: &[QuantileMap], target: &DMatrix<f64>) -> DMatrix<f64> {
    let gh = gauss_hermite(QUADRATURE_ORDER);
    let margins: Vec<Margin> = maps.iter().map(|m| margin(m, &gh)).collect();
    let d = maps.len();
    let mut latent = DMatrix::identity(d, d);
    for i in 0..d {
        for j in (i + 1)..d {
            let goal = target[(i, j)];
            let f = |r: f64| correlation_for(&margins[i], &maps[j], &margins[j], r, &gh);
            let (mut lo, mut hi) = (-0.9999, 0.9999);
            let r = if goal <= f(lo) {
                lo
            } else if goal >= f(hi) {
                hi
            } else {
                for _ in 0..50 {
                    let mid = 0.5 * (lo + hi);
                    if f(mid) < goal {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                0.5 * (lo + hi)
            };
            latent[(i, j)] = r;
            latent[(j, i)] = r;
        }
    }
    latent
}

/// Nearest correlation matrix by alternating projections with Dykstra's
/// correction. Eigenvalues are floored at `floor` so the result admits a
/// Cholesky factor. Returns the input unchanged when it already qualifies.
pub fn nearest_correlation(a: &DMatrix<f64>, floor: f64, max_iter: usize) -> Result<DMatrix<f64>, SynthError> {
    let d = a.nrows();
    let min_eig = SymmetricEigen::new(a.clone()).eigenvalues.min();
    if min_eig >= floor {
        return Ok(a.clone());
    }
    let mut y = a.clone();
    let mut ds = DMatrix::zeros(d, d);
    let mut residual = f64::INFINITY;
    for _ in 0..max_iter {
        let r = &y - &ds;
        let eig = SymmetricEigen::new(r.clone());
        let clipped = eig.eigenvalues.map(|l| l.max(floor));
        let x = &eig.eigenvectors * DMatrix::from_diagonal(&clipped) * eig.eigenvectors.transpose();
        ds = &x - &r;
        let mut next = x.clone();
        for i in 0..d {
            next[(i, i)] = 1.0;
        }
        residual = (&next - &y).norm();
        y = next;
        if residual < 1e-10 && SymmetricEigen::new(y.clone()).eigenvalues.min() > 0.0 {
            return Ok(y);
        }
    }
    Err(SynthError::RepairDiverged {
        iterations: max_iter,
        residual,
    })
}
