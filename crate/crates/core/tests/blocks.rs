use std::collections::HashSet;

use wiplab_core::blocks::*;
use wiplab_core::dynamics::{DynSystem, Observable, Sampler};
use wiplab_core::paths::estimate_sigma;
use wiplab_core::rates::{optimal_exponents, RateParams};

fn doubling_cos() -> Sampler {
    Sampler::new(DynSystem::doubling(), Observable::parse(&["cos(x)"]).unwrap()).unwrap()
}

fn test_matrix() -> Vec<(usize, f64, f64)> {
    let mut out = Vec::new();
    for n in [4, 10, 64, 100, 257, 1000, 4096, 10_000] {
        for (a, b) in [(0.6, 0.3), (0.7, 0.2), (0.7, 0.5), (0.5, 0.1), (0.9, 0.8), (0.5074, 0.0246)] {
            out.push((n, a, b));
        }
    }
    out
}

#[test]
fn blocks_partition_the_prefix() {
    for (n, a, b) in test_matrix() {
        let s = match make_scheme(n, a, b) {
            Ok(s) => s,
            Err(wiplab_core::Error::DegenerateScheme { .. }) => continue,
            Err(e) => panic!("{e}"),
        };
        s.verify().unwrap();
        let mut seen = HashSet::new();
        for i in 1..=s.k {
            for j in s.big_block(i).chain(s.small_block(i)) {
                assert!(seen.insert(j), "index {j} covered twice in {s:?}");
            }
        }
        for j in s.remainder() {
            assert!(seen.insert(j));
        }
        assert_eq!(seen, (0..n).collect());
        assert!(s.remainder().len() <= s.p + s.q);
    }
}

#[test]
fn telescoping_residual_is_zero() {
    let s = doubling_cos();
    let scheme = make_scheme(1000, 0.6, 0.3).unwrap();
    let rows = s.map_orbits(1000, 100, 41, |v| decomposition_residuals(v, 1, &scheme).unwrap()).unwrap();
    assert!(rows.iter().flatten().all(|&r| r == 0.0));
}

#[test]
fn v_n_matches_orthogonality_oracle() {
    // cos(2π 2^j x) are orthonormal in L²(Leb)/2, so E[S_p²] = p/2.
    let scheme = make_scheme(4096, 0.6, 0.3).unwrap();
    let m = 200_000;
    let samples = big_block_samples(&doubling_cos(), &scheme, m, 42).unwrap();
    let v = v_n_covariance(&scheme, &samples, 1).unwrap().get(0, 0);
    let oracle = (scheme.k * scheme.p) as f64 / (2.0 * scheme.n as f64);
    let se = oracle * (2.0 / m as f64).sqrt();
    assert!((v - oracle).abs() < 4.0 * se, "{v} vs {oracle}");
}

#[test]
fn v_n_gap_shrinks_along_the_grid() {
    let s = doubling_cos();
    let sigma = estimate_sigma(&s, 256, 100_000, 43).unwrap().cov;
    let e = optimal_exponents(&RateParams::new(50.0, 1.0).unwrap()).unwrap();
    let gap = |n: usize| {
        let scheme = make_scheme(n, e.a_f64(), e.b_f64()).unwrap();
        let samples = big_block_samples(&s, &scheme, 400_000, 44).unwrap();
        v_n_covariance(&scheme, &samples, 1).unwrap().distance(&sigma)
    };
    let (first, last) = (gap(1 << 8), gap(1 << 14));
    assert!(last < first, "{first} -> {last}");
}

#[test]
fn small_block_process_shrinks_with_separation() {
    let s = doubling_cos();
    let median_sup = |a: f64, b: f64| {
        let scheme = make_scheme(4096, a, b).unwrap();
        let mut sups = s.map_orbits(4096, 2000, 45, |v| block_processes(v, 1, &scheme).unwrap().small.sup_norm()).unwrap();
        sups.sort_by(f64::total_cmp);
        sups[sups.len() / 2]
    };
    assert!(median_sup(0.7, 0.2) < median_sup(0.7, 0.5));
}

#[test]
fn independent_blocks_are_uncorrelated() {
    let scheme = make_scheme(1024, 0.6, 0.3).unwrap();
    let m = 20_000;
    let e = independent_blocks(&doubling_cos(), &scheme, m, 46).unwrap();
    let x1: Vec<f64> = e.paths().iter().map(|p| p.value(1)[0]).collect();
    let x2: Vec<f64> = e.paths().iter().map(|p| p.value(2)[0] - p.value(1)[0]).collect();
    let cov = x1.iter().zip(&x2).map(|(a, b)| a * b).sum::<f64>() / m as f64;
    let var = x1.iter().map(|a| a * a).sum::<f64>() / m as f64;
    assert!((cov / var).abs() < 4.0 / (m as f64).sqrt(), "{}", cov / var);
}

#[test]
fn scheme_json_roundtrip() {
    let s = make_scheme(100, 0.6, 0.3).unwrap();
    let back: BlockScheme = serde_json::from_str(&s.to_json().unwrap()).unwrap();
    assert_eq!(back, s);
}
