//! Birkhoff sums, the step processes `W_n(t) = n^{-1/2} S_[nt]`, the
//! sup-norm on path space and covariance estimation.
//!
//! Vectors in `R^d` carry the L1 norm `|y| = Σ|y_i|` throughout.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::dynamics::Sampler;
use crate::error::{Error, Result};
use crate::exec::pairwise_mean;

pub const SYMMETRY_TOL: f64 = 1e-12;
pub const PSD_TOL: f64 = 1e-10;

#[inline]
pub fn l1(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

/// A càdlàg step function on `[0,1]` with jumps at `j/n`: `value(j)` is
/// the path on `[j/n, (j+1)/n)` and `value(n)` its value at `t = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct StepPath {
    n: usize,
    d: usize,
    values: Vec<f64>,
}

impl StepPath {
    /// Wraps `(n+1)·d` values; `values[0..d]` must be zero.
    pub fn new(n: usize, d: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != (n + 1) * d {
            return Err(Error::SizeMismatch { left: values.len(), right: (n + 1) * d });
        }
        if values[..d].iter().any(|&x| x != 0.0) {
            return Err(Error::domain("step paths start at 0"));
        }
        Ok(Self { n, d, values })
    }

    pub fn zeros(n: usize, d: usize) -> Self {
        Self { n, d, values: vec![0.0; (n + 1) * d] }
    }

    /// A path that jumps to `level` at `t = 0` and stays there. Only for
    /// embedding point masses; violates the zero start.
    pub fn constant(n: usize, level: &[f64]) -> Self {
        let d = level.len();
        let mut values = Vec::with_capacity((n + 1) * d);
        for _ in 0..=n {
            values.extend_from_slice(level);
        }
        Self { n, d, values }
    }

    /// `j ↦ scale · partial[j]` for `j = 0..=n`, from running sums of
    /// `increments` (row-major `n × d`).
    pub fn from_increments(increments: &[f64], d: usize, scale: f64) -> Self {
        let n = increments.len() / d;
        let mut values = vec![0.0; (n + 1) * d];
        let mut acc = vec![0.0; d];
        for (j, inc) in increments.chunks_exact(d).enumerate() {
            for c in 0..d {
                acc[c] += inc[c];
                values[(j + 1) * d + c] = scale * acc[c];
            }
        }
        Self { n, d, values }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, j: usize) -> &[f64] {
        &self.values[j * self.d..(j + 1) * self.d]
    }

    /// Evaluation at `t ∈ [0,1]`: `value(floor(n t))`.
    pub fn eval(&self, t: f64) -> &[f64] {
        let j = ((self.n as f64 * t).floor() as usize).min(self.n);
        self.value(j)
    }

    pub fn terminal(&self) -> &[f64] {
        self.value(self.n)
    }

    /// `sup_t |x(t)|`.
    pub fn sup_norm(&self) -> f64 {
        self.values.chunks_exact(self.d).map(l1).fold(0.0, f64::max)
    }

    fn same_grid(&self, other: &StepPath) -> Result<()> {
        if self.n != other.n || self.d != other.d {
            return Err(Error::GridMismatch {
                n_left: self.n,
                d_left: self.d,
                n_right: other.n,
                d_right: other.d,
            });
        }
        Ok(())
    }

    /// The same function on the finer grid `j/(n·factor)`.
    pub fn refine(&self, factor: usize) -> Result<StepPath> {
        if factor == 0 {
            return Err(Error::domain("refinement factor must be positive"));
        }
        let n = self.n * factor;
        let mut values = Vec::with_capacity((n + 1) * self.d);
        for j in 0..n {
            values.extend_from_slice(self.value(j / factor));
        }
        values.extend_from_slice(self.terminal());
        Ok(StepPath { n, d: self.d, values })
    }

    pub fn add(&self, other: &StepPath) -> Result<StepPath> {
        self.same_grid(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect();
        Ok(StepPath { n: self.n, d: self.d, values })
    }
}

/// `S_0 = 0, S_{j+1} = S_j + v_j` for observable values `v` (row-major
/// `n × d`). Returns `(n+1)·d` values.
pub fn birkhoff_sums(values: &[f64], d: usize) -> Result<Vec<f64>> {
    if d == 0 || values.is_empty() || !values.len().is_multiple_of(d) {
        return Err(Error::domain("birkhoff_sums needs a non-empty n x d array"));
    }
    let n = values.len() / d;
    let mut sums = vec![0.0; (n + 1) * d];
    for j in 0..n {
        for c in 0..d {
            sums[(j + 1) * d + c] = sums[j * d + c] + values[j * d + c];
        }
    }
    Ok(sums)
}

/// `W_n` from partial sums `S_0..S_n`: `value(j) = n^{-1/2} S_j`.
pub fn build_path(sums: &[f64], d: usize) -> Result<StepPath> {
    if d == 0 || sums.len() < 2 * d || !sums.len().is_multiple_of(d) {
        return Err(Error::domain("build_path needs S_0..S_n with n >= 1"));
    }
    let n = sums.len() / d - 1;
    let scale = (n as f64).sqrt().recip();
    StepPath::new(n, d, sums.iter().map(|s| s * scale).collect())
}

/// `W_n` straight from observable values.
pub fn path_from_values(values: &[f64], d: usize) -> Result<StepPath> {
    build_path(&birkhoff_sums(values, d)?, d)
}

/// `sup_t |p(t) − q(t)|`. Both are constant on the shared cells, so the
/// maximum over jump points is exact.
pub fn sup_norm_distance(p: &StepPath, q: &StepPath) -> Result<f64> {
    p.same_grid(q)?;
    Ok(sup_distance_unchecked(p, q))
}

#[inline]
pub(crate) fn sup_distance_unchecked(p: &StepPath, q: &StepPath) -> f64 {
    let d = p.d;
    p.values
        .chunks_exact(d)
        .zip(q.values.chunks_exact(d))
        .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Equal-weight empirical measure on path space.
#[derive(Clone, Debug, PartialEq)]
pub struct PathEnsemble {
    n: usize,
    d: usize,
    paths: Vec<StepPath>,
    pub provenance: String,
}

impl PathEnsemble {
    pub fn new(paths: Vec<StepPath>, provenance: impl Into<String>) -> Result<Self> {
        let first = paths.first().ok_or(Error::Empty("path ensemble"))?;
        let (n, d) = (first.n, first.d);
        for p in &paths {
            first.same_grid(p)?;
        }
        Ok(Self { n, d, paths, provenance: provenance.into() })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn paths(&self) -> &[StepPath] {
        &self.paths
    }

    pub fn path(&self, i: usize) -> &StepPath {
        &self.paths[i]
    }

    pub fn into_paths(self) -> Vec<StepPath> {
        self.paths
    }

    pub fn same_grid(&self, other: &PathEnsemble) -> Result<()> {
        self.paths[0].same_grid(&other.paths[0])
    }

    /// Terminal values `x(1)` of coordinate `c`.
    /// Every path re-gridded onto `j/(n·factor)`.
    pub fn refine(&self, factor: usize) -> Result<Self> {
        let paths = self.paths.iter().map(|p| p.refine(factor)).collect::<Result<_>>()?;
        PathEnsemble::new(paths, self.provenance.clone())
    }

    pub fn terminal_coordinate(&self, c: usize) -> Vec<f64> {
        self.paths.iter().map(|p| p.terminal()[c]).collect()
    }

    /// The same paths in a different order.
    pub fn permuted(&self, order: &[usize]) -> Self {
        Self {
            n: self.n,
            d: self.d,
            paths: order.iter().map(|&i| self.paths[i].clone()).collect(),
            provenance: self.provenance.clone(),
        }
    }

    /// `m` paths `W_n` from the sampler's orbits.
    pub fn from_sampler(sampler: &Sampler, n: usize, m: usize, seed: u64) -> Result<Self> {
        let d = sampler.dim();
        let paths = sampler.map_orbits(n, m, seed, |v| {
            StepPath::from_increments(v, d, (n as f64).sqrt().recip())
        })?;
        Self::new(
            paths,
            format!(
                "system={} observable={} seed={seed}",
                sampler.system(),
                sampler.observable().display_ids().join(",")
            ),
        )
    }
}

/// `(mean_i X_i^ρ)^{1/ρ}` over non-negative samples.
pub fn empirical_lp(xs: &[f64], rho: f64) -> f64 {
    // Normalised by the maximum so large ρ cannot overflow.
    let top = xs.iter().fold(0.0_f64, |a, &b| a.max(b));
    if top == 0.0 {
        return 0.0;
    }
    let powered: Vec<f64> = xs.iter().map(|x| (x / top).powf(rho)).collect();
    top * pairwise_mean(&powered).powf(rho.recip())
}

/// Empirical `L^ρ` norm of `max_{1≤j≤n} |S_j|`, with `S_j = √n · W_n(j/n)`.
pub fn max_partial_sum_norm(ens: &PathEnsemble, rho: f64) -> Result<f64> {
    if rho < 1.0 {
        return Err(Error::domain("rho must be at least 1"));
    }
    if ens.is_empty() {
        return Err(Error::Empty("path ensemble"));
    }
    let scale = (ens.n() as f64).sqrt();
    let maxima: Vec<f64> = ens.paths.iter().map(|p| p.sup_norm() * scale).collect();
    Ok(empirical_lp(&maxima, rho))
}

/// [`max_partial_sum_norm`] over sampler orbits, without storing paths.
pub fn max_partial_sum_moment(sampler: &Sampler, n: usize, m: usize, seed: u64, rho: f64) -> Result<f64> {
    if rho < 1.0 {
        return Err(Error::domain("rho must be at least 1"));
    }
    let d = sampler.dim();
    let maxima = sampler.map_orbits(n, m, seed, |v| {
        let mut acc = vec![0.0; d];
        let mut best = 0.0_f64;
        for row in v.chunks_exact(d) {
            for (a, x) in acc.iter_mut().zip(row) {
                *a += x;
            }
            best = best.max(l1(&acc));
        }
        best
    })?;
    Ok(empirical_lp(&maxima, rho))
}

/// A symmetric positive semidefinite `d × d` matrix with a cached
/// eigen-decomposition. Eigenvalues in `[−1e-10, 0)` are clamped to 0.
#[derive(Clone, Debug)]
pub struct CovMatrix {
    matrix: DMatrix<f64>,
    eigenvalues: DVector<f64>,
    eigenvectors: DMatrix<f64>,
}

impl CovMatrix {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() == 0 {
            return Err(Error::domain("covariance must be a non-empty square matrix"));
        }
        let asym = (&matrix - matrix.transpose()).abs().max();
        let scale = matrix.abs().max().max(1.0);
        if asym > SYMMETRY_TOL * scale {
            return Err(Error::Asymmetric(asym));
        }
        Self::from_symmetric(0.5 * (&matrix + matrix.transpose()))
    }

    /// Symmetrises first; for Monte Carlo estimates.
    pub fn symmetrized(matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() == 0 {
            return Err(Error::domain("covariance must be a non-empty square matrix"));
        }
        Self::from_symmetric(0.5 * (&matrix + matrix.transpose()))
    }

    fn from_symmetric(matrix: DMatrix<f64>) -> Result<Self> {
        let eig = SymmetricEigen::new(matrix.clone());
        let scale = matrix.abs().max().max(1.0);
        let mut eigenvalues = eig.eigenvalues;
        for e in eigenvalues.iter_mut() {
            if *e < -PSD_TOL * scale {
                return Err(Error::NotPsd(*e));
            }
            if *e < 0.0 {
                *e = 0.0;
            }
        }
        Ok(Self { matrix, eigenvalues, eigenvectors: eig.eigenvectors })
    }

    pub fn from_row_major(d: usize, entries: &[f64]) -> Result<Self> {
        if entries.len() != d * d {
            return Err(Error::SizeMismatch { left: entries.len(), right: d * d });
        }
        Self::new(DMatrix::from_row_slice(d, d, entries))
    }

    pub fn identity(d: usize) -> Self {
        Self::new(DMatrix::identity(d, d)).expect("identity is PSD")
    }

    pub fn zeros(d: usize) -> Self {
        Self::new(DMatrix::zeros(d, d)).expect("zero is PSD")
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix[(i, j)]
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    /// Smallest and largest eigenvalues above the clamping tolerance.
    pub fn positive_spectrum(&self) -> Option<(f64, f64)> {
        let scale = self.matrix.abs().max().max(1.0);
        let pos: Vec<f64> = self.eigenvalues.iter().copied().filter(|&e| e > PSD_TOL * scale).collect();
        if pos.is_empty() {
            return None;
        }
        Some((pos.iter().copied().fold(f64::INFINITY, f64::min), pos.iter().copied().fold(0.0, f64::max)))
    }

    /// Entrywise L1 distance `Σ_ij |A_ij − B_ij|`.
    pub fn distance(&self, other: &CovMatrix) -> f64 {
        (&self.matrix - &other.matrix).abs().sum()
    }

    pub fn to_row_major(&self) -> Vec<f64> {
        let d = self.dim();
        (0..d).flat_map(|i| (0..d).map(move |j| (i, j))).map(|(i, j)| self.matrix[(i, j)]).collect()
    }

    pub fn to_json(&self, provenance: &str) -> CovarianceJson {
        CovarianceJson { d: self.dim(), entries: self.to_row_major(), provenance: provenance.to_owned() }
    }
}

impl PartialEq for CovMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.matrix == other.matrix
    }
}

/// Serialized form of a covariance matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CovarianceJson {
    pub d: usize,
    /// Row-major entries.
    pub entries: Vec<f64>,
    pub provenance: String,
}

impl CovarianceJson {
    pub fn to_cov(&self) -> Result<CovMatrix> {
        CovMatrix::from_row_major(self.d, &self.entries)
    }
}

/// `n^{-1} Ê[S_n ⊗ S_n]` with entrywise Monte Carlo standard errors.
#[derive(Clone, Debug)]
pub struct SigmaEstimate {
    pub cov: CovMatrix,
    /// Row-major standard errors of the entries.
    pub std_err: Vec<f64>,
    pub n: usize,
    pub m: usize,
}

/// Second-moment matrix `Ê[x ⊗ x]` of samples (row-major `m × d`), times
/// `scale`, with standard errors.
pub fn second_moment(samples: &[f64], d: usize, scale: f64) -> Result<(CovMatrix, Vec<f64>)> {
    let m = samples.len() / d;
    if m == 0 {
        return Err(Error::Empty("second moment samples"));
    }
    let mut entries = vec![0.0; d * d];
    let mut errs = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            let prods: Vec<f64> = samples.chunks_exact(d).map(|s| s[i] * s[j] * scale).collect();
            let mean = pairwise_mean(&prods);
            let dev: Vec<f64> = prods.iter().map(|x| (x - mean) * (x - mean)).collect();
            let var = if m > 1 { pairwise_mean(&dev) * m as f64 / (m - 1) as f64 } else { 0.0 };
            entries[i * d + j] = mean;
            errs[i * d + j] = (var / m as f64).sqrt();
        }
    }
    Ok((CovMatrix::symmetrized(DMatrix::from_row_slice(d, d, &entries))?, errs))
}

/// Monte Carlo estimate of `n^{-1} E[S_n ⊗ S_n]` over `m` orbits.
pub fn estimate_sigma(sampler: &Sampler, n: usize, m: usize, seed: u64) -> Result<SigmaEstimate> {
    let d = sampler.dim();
    let sums = sampler.map_orbits(n, m, seed, |v| {
        let mut s = vec![0.0; d];
        for row in v.chunks_exact(d) {
            for (a, x) in s.iter_mut().zip(row) {
                *a += x;
            }
        }
        s
    })?;
    let flat = sums.concat();
    let (cov, std_err) = second_moment(&flat, d, 1.0 / n as f64)?;
    Ok(SigmaEstimate { cov, std_err, n, m })
}

/// `(n, |n^{-1} Ê[S_n ⊗ S_n] − Σ̂_ref|)` along `ns`, with `Σ̂_ref` the
/// estimate at the largest `n`. Report-only diagnostic.
pub fn sigma_drift_curve(sampler: &Sampler, ns: &[usize], m: usize, seed: u64) -> Result<Vec<(usize, f64)>> {
    let n_ref = *ns.iter().max().ok_or(Error::Empty("n grid"))?;
    let estimates: Vec<(usize, CovMatrix)> = ns
        .iter()
        .map(|&n| Ok((n, estimate_sigma(sampler, n, m, seed)?.cov)))
        .collect::<Result<_>>()?;
    let reference = estimates.iter().find(|(n, _)| *n == n_ref).map(|(_, c)| c.clone()).expect("max present");
    Ok(estimates.into_iter().map(|(n, c)| (n, c.distance(&reference))).collect())
}
