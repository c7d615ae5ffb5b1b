//! Big-block / small-block decomposition of `{0, …, n−1}`.
//!
//! Big blocks have length `p = ⌊n^a⌋`, small blocks `q = ⌊n^b⌋`, and
//! there are `k = ⌊n/(p+q)⌋` of each, alternating and starting with a big
//! block. The tail `{k(p+q), …, n−1}` is the remainder.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::dynamics::Sampler;
use crate::error::{Error, Result};
use crate::numeric::{floor_pow, ExactSum};
use crate::paths::{l1, second_moment, CovMatrix, PathEnsemble, StepPath};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockScheme {
    pub n: usize,
    pub a: f64,
    pub b: f64,
    pub p: usize,
    pub q: usize,
    pub k: usize,
}

/// Builds the scheme for `n ≥ 4` and `0 < b < a < 1`.
pub fn make_scheme(n: usize, a: f64, b: f64) -> Result<BlockScheme> {
    if !(0.0 < b && b < a && a < 1.0) {
        return Err(Error::domain(format!("block exponents need 0 < b < a < 1, got a={a}, b={b}")));
    }
    if n < 4 {
        return Err(Error::domain(format!("block schemes need n >= 4, got {n}")));
    }
    let p = floor_pow(n, a);
    let q = floor_pow(n, b);
    if p + q > n {
        return Err(Error::DegenerateScheme { n, span: p + q });
    }
    Ok(BlockScheme { n, a, b, p, q, k: n / (p + q) })
}

impl BlockScheme {
    pub fn period(&self) -> usize {
        self.p + self.q
    }

    /// Indices of the `i`-th big block, `i ∈ 1..=k`: `[ℓ_i, u_i]` with
    /// `ℓ_i = (i−1)(p+q)` and `u_i = ℓ_i + p − 1`.
    pub fn big_block(&self, i: usize) -> Range<usize> {
        assert!((1..=self.k).contains(&i), "big block index {i} outside 1..={}", self.k);
        let start = (i - 1) * self.period();
        start..start + self.p
    }

    /// Indices of the `i`-th small block, right after big block `i`.
    pub fn small_block(&self, i: usize) -> Range<usize> {
        assert!((1..=self.k).contains(&i), "small block index {i} outside 1..={}", self.k);
        let start = (i - 1) * self.period() + self.p;
        start..start + self.q
    }

    pub fn remainder(&self) -> Range<usize> {
        self.k * self.period()..self.n
    }

    /// Number of indices `j` with `j < n t` at `t = i/k`, i.e. `⌊n i / k⌋`.
    pub fn grid_index(&self, i: usize) -> usize {
        self.n * i / self.k
    }

    /// Checks disjointness, order, coverage of `{0..k(p+q)−1}`, gap `q`
    /// between big blocks and the remainder bound.
    pub fn verify(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::domain(format!("scheme {self:?}: {msg}")));
        if self.k == 0 {
            return fail("no blocks".into());
        }
        let mut next = 0;
        for i in 1..=self.k {
            for r in [self.big_block(i), self.small_block(i)] {
                if r.start != next {
                    return fail(format!("block starting at {} does not follow {next}", r.start));
                }
                next = r.end;
            }
            if i > 1 && self.big_block(i).start - self.big_block(i - 1).end != self.q {
                return fail(format!("gap before big block {i} is not q"));
            }
        }
        if next != self.k * self.period() || self.remainder().start != next {
            return fail("blocks do not cover 0..k(p+q)".into());
        }
        if self.remainder().len() > self.period() {
            return fail(format!("remainder {} exceeds p+q", self.remainder().len()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

/// The big-block process `W̃_n` and the small-block process `R_n`, both
/// step paths with `k` jumps.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockProcesses {
    pub big: StepPath,
    pub small: StepPath,
}

fn check_orbit(values: &[f64], d: usize, needed: usize) -> Result<()> {
    let got = values.len() / d;
    if got < needed {
        return Err(Error::OrbitTooShort { needed, got });
    }
    Ok(())
}

fn block_sum(values: &[f64], d: usize, range: Range<usize>, scale: f64) -> Vec<f64> {
    let mut out = vec![0.0; d];
    for row in values[range.start * d..range.end * d].chunks_exact(d) {
        for (o, x) in out.iter_mut().zip(row) {
            *o += x;
        }
    }
    out.iter_mut().for_each(|x| *x *= scale);
    out
}

/// Big-block sums `X_i = n^{-1/2} Σ_{j ∈ big block i} v_j`, row-major
/// `k × d`.
pub fn big_block_sums(values: &[f64], d: usize, scheme: &BlockScheme) -> Result<Vec<f64>> {
    check_orbit(values, d, scheme.k * scheme.period())?;
    let scale = (scheme.n as f64).sqrt().recip();
    Ok((1..=scheme.k).flat_map(|i| block_sum(values, d, scheme.big_block(i), scale)).collect())
}

/// `W̃_n(t) = Σ_{i ≤ [kt]} X_i` and `R_n(t) = Σ_{i ≤ [kt]} Y_i` from
/// observable values `v_0, v_1, …` (row-major, at least `k(p+q)` rows).
pub fn block_processes(values: &[f64], d: usize, scheme: &BlockScheme) -> Result<BlockProcesses> {
    check_orbit(values, d, scheme.k * scheme.period())?;
    let scale = (scheme.n as f64).sqrt().recip();
    let big: Vec<f64> = (1..=scheme.k).flat_map(|i| block_sum(values, d, scheme.big_block(i), scale)).collect();
    let small: Vec<f64> = (1..=scheme.k).flat_map(|i| block_sum(values, d, scheme.small_block(i), scale)).collect();
    Ok(BlockProcesses {
        big: StepPath::from_increments(&big, d, 1.0),
        small: StepPath::from_increments(&small, d, 1.0),
    })
}

/// Exact residuals of `W_n(t) = W̃_n(t) + R_n(t) + n^{-1/2} S_{h(t)}∘T^{[kt](p+q)}`
/// at `t = i/k`, `i = 0..=k`, as L1 norms.
///
/// Each side is accumulated as an exact sum over its index sets, so the
/// residual is exactly zero precisely when the blocks plus the tail
/// `[i(p+q), ⌊n i/k⌋)` partition the prefix `[0, ⌊n i/k⌋)`.
pub fn decomposition_residuals(values: &[f64], d: usize, scheme: &BlockScheme) -> Result<Vec<f64>> {
    check_orbit(values, d, scheme.n)?;
    let scale = (scheme.n as f64).sqrt().recip();
    let mut out = Vec::with_capacity(scheme.k + 1);
    let mut diff = vec![0.0; d];
    for i in 0..=scheme.k {
        let horizon = scheme.grid_index(i);
        let mut ranges: Vec<Range<usize>> = (1..=i).flat_map(|j| [scheme.big_block(j), scheme.small_block(j)]).collect();
        ranges.push(i * scheme.period()..horizon);
        for (c, slot) in diff.iter_mut().enumerate() {
            let mut acc = ExactSum::new();
            for j in 0..horizon {
                acc.add(values[j * d + c]);
            }
            for r in &ranges {
                for j in r.clone() {
                    acc.sub(values[j * d + c]);
                }
            }
            *slot = acc.value() * scale;
        }
        out.push(l1(&diff));
    }
    Ok(out)
}

/// `sup_t |W_n(t) − (W̃_n(t) + R_n(t))|` over `t = j/n`, the size of the
/// within-block tail term.
pub fn blocking_remainder_sup(values: &[f64], d: usize, scheme: &BlockScheme) -> Result<f64> {
    check_orbit(values, d, scheme.n)?;
    let procs = block_processes(values, d, scheme)?;
    let scale = (scheme.n as f64).sqrt().recip();
    let mut s = vec![0.0; d];
    let mut worst = 0.0_f64;
    for j in 0..=scheme.n {
        if j > 0 {
            for (a, x) in s.iter_mut().zip(&values[(j - 1) * d..j * d]) {
                *a += x;
            }
        }
        let i = (scheme.k * j) / scheme.n;
        let dist: f64 = (0..d)
            .map(|c| (s[c] * scale - procs.big.value(i)[c] - procs.small.value(i)[c]).abs())
            .sum();
        worst = worst.max(dist);
    }
    Ok(worst)
}

/// `m` samples of `X̂_1 = n^{-1/2} S_p` over fresh invariant-measure orbits,
/// row-major `m × d`. Replica `i` uses stream `i` of `seed`.
pub fn big_block_samples(sampler: &Sampler, scheme: &BlockScheme, m: usize, seed: u64) -> Result<Vec<f64>> {
    let d = sampler.dim();
    let scale = (scheme.n as f64).sqrt().recip();
    let sums = sampler.map_orbits(scheme.p, m, seed, |v| block_sum(v, d, 0..scheme.p, scale))?;
    Ok(sums.concat())
}

/// `m` replicas of `Ŵ_n(t) = Σ_{i ≤ [kt]} X̂_i`, where the `k` summands
/// of every replica come from `k` mutually independent orbits.
pub fn independent_blocks(sampler: &Sampler, scheme: &BlockScheme, m: usize, seed: u64) -> Result<PathEnsemble> {
    let d = sampler.dim();
    let k = scheme.k;
    let samples = big_block_samples(sampler, scheme, m * k, seed)?;
    let paths = samples.chunks_exact(k * d).map(|x| StepPath::from_increments(x, d, 1.0)).collect();
    PathEnsemble::new(paths, format!("independent blocks n={} p={} k={} seed={seed}", scheme.n, scheme.p, k))
}

/// `V_n = k Ê[X̂_1 ⊗ X̂_1]` from samples of `X̂_1`.
pub fn v_n_covariance(scheme: &BlockScheme, samples: &[f64], d: usize) -> Result<CovMatrix> {
    Ok(second_moment(samples, d, scheme.k as f64)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{DynSystem, Observable};

    #[test]
    fn scheme_arithmetic() {
        let s = make_scheme(100, 0.6, 0.3).unwrap();
        assert_eq!((s.p, s.q, s.k), (15, 3, 5));
        assert_eq!(s.remainder().len(), 10);
        assert!(s.remainder().len() <= s.p + s.q);
        s.verify().unwrap();
        assert_eq!(s.big_block(3), 36..51);
        assert_eq!(s.small_block(3), 51..54);
    }

    #[test]
    fn degenerate_and_invalid_schemes() {
        assert!(matches!(make_scheme(4, 0.99, 0.98), Err(Error::DegenerateScheme { .. })));
        assert!(make_scheme(100, 0.3, 0.6).is_err());
        assert!(make_scheme(100, 0.5, 0.5).is_err());
        assert!(make_scheme(3, 0.5, 0.2).is_err());
    }

    #[test]
    fn constant_observable_block_sums() {
        let s = make_scheme(100, 0.6, 0.3).unwrap();
        let values = vec![2.5; 100];
        let x = big_block_sums(&values, 1, &s).unwrap();
        for xi in x {
            assert!((xi - 15.0 * 2.5 / 10.0).abs() < 1e-12);
        }
    }

    #[test]
    fn too_short_orbit() {
        let s = make_scheme(100, 0.6, 0.3).unwrap();
        assert!(matches!(block_processes(&[0.0; 50], 1, &s), Err(Error::OrbitTooShort { .. })));
    }

    #[test]
    fn json_round_trip() {
        let s = make_scheme(1000, 0.7, 0.2).unwrap();
        let back: BlockScheme = serde_json::from_str(&s.to_json().unwrap()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn single_block_surrogate_matches_block_sum_law() {
        // n = 16, a = 0.9: p = 12, q = 1, k = 1
        let s = make_scheme(16, 0.9, 0.05).unwrap();
        assert_eq!(s.k, 1);
        let sampler = Sampler::new(DynSystem::Doubling, Observable::parse(&["cos(x)"]).unwrap()).unwrap();
        let hat = independent_blocks(&sampler, &s, 3, 5).unwrap();
        let direct = big_block_samples(&sampler, &s, 3, 5).unwrap();
        for (p, x) in hat.paths().iter().zip(direct) {
            assert_eq!(p.terminal()[0], x);
        }
    }

    #[test]
    fn seeded_determinism() {
        let s = make_scheme(256, 0.6, 0.3).unwrap();
        let sampler = Sampler::new(DynSystem::lsv(0.3).unwrap(), Observable::parse(&["x"]).unwrap()).unwrap();
        assert_eq!(independent_blocks(&sampler, &s, 4, 1).unwrap(), independent_blocks(&sampler, &s, 4, 1).unwrap());
    }
}
