use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use wiplab_core::dynamics::{DynSystem, Observable, Sampler};
use wiplab_core::paths::*;

fn doubling_cos() -> Sampler {
    Sampler::new(DynSystem::doubling(), Observable::parse(&["cos(x)"]).unwrap()).unwrap()
}

#[test]
fn sigma_for_doubling_cos_is_half() {
    let est = estimate_sigma(&doubling_cos(), 256, 100_000, 31).unwrap();
    let (s, se) = (est.cov.get(0, 0), est.std_err[0]);
    assert!((s - 0.5).abs() <= 3.0 * se, "Σ̂ = {s} ± {se}");
}

#[test]
fn sigma_is_symmetric_psd() {
    let obs = Observable::parse(&["cos(x)", "sin(x)", "cos(2x)*sin(x)"]).unwrap();
    let s = Sampler::new(DynSystem::lsv(0.3).unwrap(), obs).unwrap().burn_in(100);
    let est = estimate_sigma(&s, 64, 500, 32).unwrap();
    let m = est.cov.matrix();
    assert_eq!(m, &m.transpose());
    assert!(est.cov.eigenvalues().iter().all(|&e| e >= 0.0));
}

#[test]
fn max_partial_sums_scale_like_root_n() {
    let s = doubling_cos();
    for rho in [4.0, 100.0] {
        let ratios: Vec<f64> = (6..=14)
            .map(|e| {
                let n = 1usize << e;
                max_partial_sum_moment(&s, n, 2000, 33, rho).unwrap() / (n as f64).sqrt()
            })
            .collect();
        let hi = ratios.iter().cloned().fold(f64::MIN, f64::max);
        let lo = ratios.iter().cloned().fold(f64::MAX, f64::min);
        assert!(hi / lo <= 3.0, "ρ={rho}: {ratios:?}");
    }
}

#[test]
fn streaming_moment_matches_ensemble_form() {
    let s = doubling_cos();
    let e = PathEnsemble::from_sampler(&s, 128, 300, 34).unwrap();
    let a = max_partial_sum_norm(&e, 4.0).unwrap();
    let b = max_partial_sum_moment(&s, 128, 300, 34, 4.0).unwrap();
    assert!((a - b).abs() < 1e-9 * a);
}

#[test]
fn triangle_inequality_on_random_triples() {
    let mut rng = ChaCha8Rng::seed_from_u64(35);
    for _ in 0..1000 {
        let n = rng.random_range(1..20);
        let d = rng.random_range(1..4);
        let [p, q, r] = std::array::from_fn(|_| {
            let incr: Vec<f64> = (0..n * d).map(|_| rng.random_range(-1.0..1.0)).collect();
            StepPath::from_increments(&incr, d, 1.0)
        });
        let pq = sup_norm_distance(&p, &q).unwrap();
        assert_eq!(pq, sup_norm_distance(&q, &p).unwrap());
        let pr = sup_norm_distance(&p, &r).unwrap();
        let qr = sup_norm_distance(&q, &r).unwrap();
        assert!(pr <= pq + qr + 1e-12);
        assert_eq!(sup_norm_distance(&p, &p).unwrap(), 0.0);
    }
}

#[test]
fn covariance_json_roundtrip() {
    let c = CovMatrix::from_row_major(2, &[2.0, 0.5, 0.5, 1.0]).unwrap();
    let json = serde_json::to_string(&c.to_json("unit test")).unwrap();
    let back: CovarianceJson = serde_json::from_str(&json).unwrap();
    assert_eq!(back.d, 2);
    assert_eq!(back.to_cov().unwrap(), c);
}

proptest! {
    #[test]
    fn path_construction_is_linear(v in prop::collection::vec(-2.0f64..2.0, 1..60), w_seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(w_seed);
        let w: Vec<f64> = v.iter().map(|_| rng.random_range(-2.0..2.0)).collect();
        let sum: Vec<f64> = v.iter().zip(&w).map(|(a, b)| a + b).collect();
        let lhs = path_from_values(&sum, 1).unwrap();
        let rhs = path_from_values(&v, 1).unwrap().add(&path_from_values(&w, 1).unwrap()).unwrap();
        prop_assert!(sup_norm_distance(&lhs, &rhs).unwrap() <= 1e-12);
    }

    #[test]
    fn distance_zero_iff_equal(v in prop::collection::vec(-2.0f64..2.0, 1..15), j in 0usize..29, bump in 1e-6f64..1.0) {
        let v: Vec<f64> = v.iter().flat_map(|&x| [x, -x]).collect();
        let p = path_from_values(&v, 2).unwrap();
        let mut values = p.values().to_vec();
        let j = p.d() + j % (values.len() - p.d());
        values[j] += bump;
        let q = StepPath::new(p.n(), p.d(), values).unwrap();
        prop_assert!(sup_norm_distance(&p, &q).unwrap() > 0.0);
    }
}
