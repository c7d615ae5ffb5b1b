use nalgebra::DMatrix;
use proptest::prelude::*;

use wiplab_core::gaussian::*;
use wiplab_core::paths::CovMatrix;
use wiplab_core::transport::{wasserstein_1d, wasserstein_paths};
use wiplab_core::Exec;

fn brownian(cov: CovMatrix, n: usize, m: usize, seed: u64) -> wiplab_core::paths::PathEnsemble {
    sample_brownian(&BrownianSpec { covariance: cov, n, m, seed }, Exec::default()).unwrap()
}

#[test]
fn terminal_variance_is_sigma() {
    let m = 10_000;
    let e = brownian(CovMatrix::identity(2), 1024, m, 51);
    for c in 0..2 {
        let xs = e.terminal_coordinate(c);
        let var = xs.iter().map(|x| x * x).sum::<f64>() / m as f64;
        let se = (2.0 / m as f64).sqrt();
        assert!((var - 1.0).abs() < 3.0 * se, "coordinate {c}: {var}");
    }
}

#[test]
fn covariance_function_is_min_s_t() {
    let sigma = CovMatrix::from_row_major(2, &[1.0, 0.6, 0.6, 2.0]).unwrap();
    let m = 20_000;
    let e = brownian(sigma.clone(), 16, m, 52);
    for (js, jt) in [(4, 16), (8, 8), (12, 4), (2, 10)] {
        let s = js.min(jt) as f64 / 16.0;
        for (a, b) in [(0, 0), (0, 1), (1, 1)] {
            let prods: Vec<f64> = e.paths().iter().map(|p| p.value(js)[a] * p.value(jt)[b]).collect();
            let mean = prods.iter().sum::<f64>() / m as f64;
            let sd = (prods.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / m as f64).sqrt();
            let target = s * sigma.get(a, b);
            assert!((mean - target).abs() < 4.0 * sd / (m as f64).sqrt(), "({js},{jt}) [{a}{b}]: {mean} vs {target}");
        }
    }
}

#[test]
fn brownian_scaling_across_grids() {
    let m = 4000;
    let sigma = CovMatrix::from_row_major(1, &[0.5]).unwrap();
    let coarse = brownian(sigma.clone(), 64, m, 53).terminal_coordinate(0);
    let fine = brownian(sigma, 256, m, 54).terminal_coordinate(0);
    let w = wasserstein_1d(&coarse, &fine, 1.0).unwrap();
    assert!(w < 3.0 * (0.5f64).sqrt() / (m as f64).sqrt(), "{w}");
}

#[test]
fn gaussian_steps_match_a_normal_sample() {
    let m = 5000;
    let k = 32;
    let e = iid_partial_sum_ensemble(StepLaw::Gaussian, 1, k, m, 55, Exec::default()).unwrap();
    let ends: Vec<f64> = e.terminal_coordinate(0).iter().map(|x| x / (k as f64).sqrt()).collect();
    let reference = normal_quantiles(m, 1.0);
    assert!(wasserstein_1d(&ends, &reference, 1.0).unwrap() < 2.0 / (m as f64).sqrt());
}

#[test]
fn unit_variance_step_laws() {
    let m = 50_000;
    for law in [StepLaw::Gaussian, StepLaw::Uniform, StepLaw::Rademacher] {
        let e = iid_partial_sum_ensemble(law, 1, 1, m, 57, Exec::default()).unwrap();
        let xs = e.terminal_coordinate(0);
        let mean = xs.iter().sum::<f64>() / m as f64;
        let var = xs.iter().map(|x| x * x).sum::<f64>() / m as f64;
        assert!(mean.abs() < 4.0 / (m as f64).sqrt(), "{law:?} mean {mean}");
        assert!((var - 1.0).abs() < 0.03, "{law:?} var {var}");
    }
}

// At m = 256 the empirical distance between independent path ensembles
// sits on a sampling floor (about 0.7 here) that grows with the grid, so
// the k^{-1/2 + 1/p} decrease is not resolvable. Kept as a runnable probe.
#[test]
#[ignore = "dominated by the empirical transport floor at m = 256"]
fn rademacher_walks_approach_brownian() {
    let m = 256;
    let dist = |k: usize| {
        let walk = iid_partial_sum_ensemble(StepLaw::Rademacher, 1, k, m, 58, Exec::default()).unwrap();
        let walk = scale_ensemble(&walk, (k as f64).sqrt().recip()).unwrap();
        let bm = brownian(CovMatrix::identity(1), k, m, 59);
        wasserstein_paths(&walk, &bm, 2.0).unwrap()
    };
    let d: Vec<f64> = [16, 64, 256].into_iter().map(dist).collect();
    assert!(d[2] < d[0], "{d:?}");
}

#[test]
fn projection_square_root_is_itself() {
    let v = [0.6, 0.8, 0.0];
    let p = DMatrix::from_fn(3, 3, |i, j| v[i] * v[j]);
    let c = CovMatrix::new(p.clone()).unwrap();
    assert!((psd_sqrt(&c) - p).abs().max() < 1e-10);
}

proptest! {
    #[test]
    fn square_root_squares_back(d in 1usize..=4, entries in prop::collection::vec(-1.0f64..1.0, 16)) {
        let a = DMatrix::from_fn(d, d, |i, j| entries[i * 4 + j]);
        let m = &a * a.transpose();
        let c = CovMatrix::new(m.clone()).unwrap();
        let r = psd_sqrt(&c);
        prop_assert!((&r * &r - m).abs().max() < 1e-10);
        prop_assert!((&r - r.transpose()).abs().max() < 1e-12);
    }
}
