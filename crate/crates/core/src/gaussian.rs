//! Brownian comparison ensembles and iid partial-sum surrogates.
//!
//! Normal variates come from Box–Muller on the seeded uniform stream, so
//! ensembles are identical on every platform.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::Result;
use crate::exec::{indexed_rng, Exec};
use crate::paths::{CovMatrix, PathEnsemble, StepPath};

/// Standard normal variates by the Box–Muller transform, two per pair of
/// uniforms.
pub struct NormalStream {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl NormalStream {
    pub fn new(rng: ChaCha8Rng) -> Self {
        Self { rng, spare: None }
    }

    pub fn sample(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        // 1 - U lies in (0, 1], keeping the logarithm finite.
        let u1 = 1.0 - self.rng.random::<f64>();
        let u2 = self.rng.random::<f64>();
        let radius = (-2.0 * u1.ln()).sqrt();
        self.spare = Some(radius * (TAU * u2).sin());
        radius * (TAU * u2).cos()
    }

    pub fn fill(&mut self, out: &mut [f64]) {
        for x in out {
            *x = self.sample();
        }
    }
}

/// `m` iid `N(0, σ²)` samples from stream 0 of `seed`.
pub fn normal_sample(m: usize, sigma: f64, seed: u64) -> Vec<f64> {
    let mut s = NormalStream::new(indexed_rng(seed, 0));
    (0..m).map(|_| sigma * s.sample()).collect()
}

/// The exact `N(0, σ²)` quantile grid `σ Φ^{-1}((i + 1/2)/m)`, the
/// equal-weight `m`-point measure closest to the normal law.
pub fn normal_quantiles(m: usize, sigma: f64) -> Vec<f64> {
    let law = Normal::standard();
    (0..m).map(|i| sigma * law.inverse_cdf((i as f64 + 0.5) / m as f64)).collect()
}

/// Symmetric square root through the eigen-decomposition, with clamped
/// eigenvalues.
pub fn psd_sqrt(m: &CovMatrix) -> DMatrix<f64> {
    let q = m.eigenvectors();
    // Eigenvalues at round-off level are zero; their roots would not be.
    let top = m.eigenvalues().iter().fold(0.0_f64, |a, &b| a.max(b.abs()));
    let floor = 8.0 * m.dim() as f64 * f64::EPSILON * top;
    let roots = DVector::from_iterator(
        m.dim(),
        m.eigenvalues().iter().map(|&e| if e <= floor { 0.0 } else { e.sqrt() }),
    );
    q * DMatrix::from_diagonal(&roots) * q.transpose()
}

#[derive(Clone, Debug)]
pub struct BrownianSpec {
    pub covariance: CovMatrix,
    /// Grid size: paths jump at `j/n`.
    pub n: usize,
    pub m: usize,
    pub seed: u64,
}

/// Brownian motion with covariance `Σ` observed at `j/n` and held
/// constant in between: `value(j) = Σ^{1/2} (Z_1 + … + Z_j)/√n`.
pub fn sample_brownian(spec: &BrownianSpec, exec: Exec) -> Result<PathEnsemble> {
    let d = spec.covariance.dim();
    let root = psd_sqrt(&spec.covariance);
    let scale = (spec.n as f64).sqrt().recip();
    let paths = exec.map_indexed(spec.m, |i| {
        let mut normals = NormalStream::new(indexed_rng(spec.seed, i as u64));
        let mut z = vec![0.0; d];
        let mut increments = vec![0.0; spec.n * d];
        for row in increments.chunks_exact_mut(d) {
            normals.fill(&mut z);
            for (r, out) in row.iter_mut().enumerate() {
                *out = (0..d).map(|c| root[(r, c)] * z[c]).sum();
            }
        }
        StepPath::from_increments(&increments, d, scale)
    });
    PathEnsemble::new(paths, format!("brownian n={} seed={}", spec.n, spec.seed))
}

/// Mean-zero step laws for iid partial sums.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepLaw {
    /// Standard normal.
    Gaussian,
    /// Uniform on `[−√3, √3]` (unit variance).
    Uniform,
    /// `±1` with equal probability.
    Rademacher,
}

impl StepLaw {
    fn draw(self, rng: &mut ChaCha8Rng, normals: &mut NormalStream) -> f64 {
        match self {
            StepLaw::Gaussian => normals.sample(),
            StepLaw::Uniform => 3f64.sqrt() * (2.0 * rng.random::<f64>() - 1.0),
            StepLaw::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
        }
    }
}

/// `m` unscaled partial-sum paths `Y(j/k) = X̂_1 + … + X̂_j` of `k` iid
/// `R^d` steps with iid coordinates from `law`.
pub fn iid_partial_sum_ensemble(law: StepLaw, d: usize, k: usize, m: usize, seed: u64, exec: Exec) -> Result<PathEnsemble> {
    let paths = exec.map_indexed(m, |i| {
        let mut rng = indexed_rng(seed, 2 * i as u64);
        let mut normals = NormalStream::new(indexed_rng(seed, 2 * i as u64 + 1));
        let steps: Vec<f64> = (0..k * d).map(|_| law.draw(&mut rng, &mut normals)).collect();
        StepPath::from_increments(&steps, d, 1.0)
    });
    PathEnsemble::new(paths, format!("iid {law:?} k={k} seed={seed}"))
}

/// Multiplies every path value by `factor`.
pub fn scale_ensemble(e: &PathEnsemble, factor: f64) -> Result<PathEnsemble> {
    let paths = e
        .paths()
        .iter()
        .map(|p| StepPath::new(p.n(), p.d(), p.values().iter().map(|x| x * factor).collect()))
        .collect::<Result<_>>()?;
    PathEnsemble::new(paths, e.provenance.clone())
}
