use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use wiplab_core::paths::{sup_norm_distance, PathEnsemble, StepPath};
use wiplab_core::transport::*;
use wiplab_core::Exec;

fn random_path(rng: &mut ChaCha8Rng, n: usize, d: usize) -> StepPath {
    let incr: Vec<f64> = (0..n * d).map(|_| rng.random_range(-1.0..1.0)).collect();
    StepPath::from_increments(&incr, d, (n as f64).sqrt().recip())
}

fn random_ensemble(rng: &mut ChaCha8Rng, m: usize, n: usize, d: usize) -> PathEnsemble {
    PathEnsemble::new((0..m).map(|_| random_path(rng, n, d)).collect(), "random").unwrap()
}

fn permutations(m: usize) -> Vec<Vec<usize>> {
    if m == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(m - 1) {
        for slot in 0..m {
            let mut q = p.clone();
            q.insert(slot, m - 1);
            out.push(q);
        }
    }
    out
}

/// Exhaustive minimum over all permutations.
fn brute_force_wp(a: &PathEnsemble, b: &PathEnsemble, p: f64) -> f64 {
    let m = a.len();
    let c: Vec<Vec<f64>> = (0..m)
        .map(|i| (0..m).map(|j| sup_norm_distance(a.path(i), b.path(j)).unwrap().powf(p)).collect())
        .collect();
    let best = permutations(m)
        .iter()
        .map(|perm| perm.iter().enumerate().map(|(i, &j)| c[i][j]).sum::<f64>())
        .fold(f64::INFINITY, f64::min);
    (best / m as f64).powf(p.recip())
}

#[test]
fn assignment_matches_exhaustive_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for trial in 0..100 {
        let m = 1 + trial % 7;
        let n = rng.random_range(1..12);
        let d = rng.random_range(1..3);
        let p = [1.0, 2.0, 1.5][trial % 3];
        let a = random_ensemble(&mut rng, m, n, d);
        let b = random_ensemble(&mut rng, m, n, d);
        let exact = wasserstein_paths(&a, &b, p).unwrap();
        let brute = brute_force_wp(&a, &b, p);
        assert!((exact - brute).abs() <= 1e-12, "trial {trial}: {exact} vs {brute}");
    }
}

#[test]
fn metric_axioms_on_random_triples() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..500 {
        let m = rng.random_range(2..9);
        let n = rng.random_range(2..10);
        let [a, b, c] = std::array::from_fn(|_| random_ensemble(&mut rng, m, n, 2));
        let ab = wasserstein_paths(&a, &b, 1.0).unwrap();
        let ba = wasserstein_paths(&b, &a, 1.0).unwrap();
        assert_eq!(ab, ba, "{m} {n} {:e}", ab - ba);
        let bc = wasserstein_paths(&b, &c, 1.0).unwrap();
        let ac = wasserstein_paths(&a, &c, 1.0).unwrap();
        assert!(ac <= ab + bc + 1e-9);
    }
}

#[test]
fn zero_iff_equal_as_multisets() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let a = random_ensemble(&mut rng, 9, 8, 2);
    let shuffled = a.permuted(&[3, 1, 4, 0, 8, 5, 2, 7, 6]);
    assert_eq!(wasserstein_paths(&a, &shuffled, 2.0).unwrap(), 0.0);
    let b = random_ensemble(&mut rng, 9, 8, 2);
    assert!(wasserstein_paths(&a, &b, 2.0).unwrap() > 0.0);
}

#[test]
fn one_dimensional_consistency() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..50 {
        let m = rng.random_range(1..40);
        let xs: Vec<f64> = (0..m).map(|_| rng.random_range(-3.0..3.0)).collect();
        let ys: Vec<f64> = (0..m).map(|_| rng.random_range(-3.0..3.0)).collect();
        let embed = |v: &[f64]| PathEnsemble::new(v.iter().map(|&x| StepPath::constant(4, &[x])).collect(), "").unwrap();
        for p in [1.0, 2.0, 3.0] {
            let path = wasserstein_paths(&embed(&xs), &embed(&ys), p).unwrap();
            let line = wasserstein_1d(&xs, &ys, p).unwrap();
            assert!((path - line).abs() <= 1e-12, "{path} vs {line}");
        }
    }
}

#[test]
fn kr_duality_for_catalog() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for _ in 0..100 {
        let m = rng.random_range(2..30);
        let a = random_ensemble(&mut rng, m, 16, 2);
        let b = random_ensemble(&mut rng, m, 16, 2);
        let w1 = wasserstein_paths(&a, &b, 1.0).unwrap();
        for f in lipschitz_catalog(a.path(0)) {
            assert!(kr_dual_lower_bound(&a, &b, &f).unwrap() <= w1 + 1e-9, "{f:?}");
        }
    }
}

#[test]
fn interpolation_inequality() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    for _ in 0..200 {
        let m = rng.random_range(2..30);
        let a = random_ensemble(&mut rng, m, 10, 1);
        let b = random_ensemble(&mut rng, m, 10, 1);
        for (r, s) in [(2.0, 4.0), (1.5, 3.0), (2.0, 6.0)] {
            let (lhs, rhs) = interpolation_check(&a, &b, r, s).unwrap();
            assert!(lhs <= rhs + 1e-9, "r={r} s={s}: {lhs} > {rhs}");
        }
    }
}

#[test]
fn sinkhorn_tracks_exact_value() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..5 {
        let a = random_ensemble(&mut rng, 64, 16, 1);
        let b = random_ensemble(&mut rng, 64, 16, 1);
        let cost = cost_matrix(&a, &b, 1.0, Exec::default()).unwrap();
        let exact = wasserstein_from_costs(&cost).unwrap().0;
        let r = sinkhorn_paths(&a, &b, 1.0, &SinkhornOptions::new(0.01 * cost.median())).unwrap();
        assert!(r.converged, "{r:?} exact {exact}");
        assert!(r.value >= exact - 1e-9, "entropic plan undercuts the optimum");
        assert!((r.value - exact) / exact < 0.05, "{} vs {exact}", r.value);
    }
}

#[test]
fn exact_solver_limit() {
    let mut rng = ChaCha8Rng::seed_from_u64(18);
    let a = random_ensemble(&mut rng, EXACT_SOLVER_LIMIT + 1, 1, 1);
    let err = wasserstein_paths(&a, &a, 1.0).unwrap_err();
    assert!(matches!(err, wiplab_core::Error::ResourceLimit(_)));
}

#[test]
fn exec_modes_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    let a = random_ensemble(&mut rng, 64, 32, 2);
    let b = random_ensemble(&mut rng, 64, 32, 2);
    let par = cost_matrix(&a, &b, 2.0, Exec::Parallel).unwrap();
    let seq = cost_matrix(&a, &b, 2.0, Exec::Sequential).unwrap();
    assert_eq!(par.data(), seq.data());
}

proptest! {
    #[test]
    fn monotone_in_order(seed in any::<u64>(), m in 2usize..12, p in 1.0f64..3.0, dq in 0.0f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_ensemble(&mut rng, m, 6, 2);
        let b = random_ensemble(&mut rng, m, 6, 2);
        let lo = wasserstein_paths(&a, &b, p).unwrap();
        let hi = wasserstein_paths(&a, &b, p + dq).unwrap();
        prop_assert!(lo <= hi * (1.0 + 1e-12) + 1e-15);
    }

    #[test]
    fn one_dimensional_sorted_formula(xs in prop::collection::vec(-5.0f64..5.0, 1..50), shift in -2.0f64..2.0) {
        let ys: Vec<f64> = xs.iter().map(|x| x + shift).collect();
        let w = wasserstein_1d(&xs, &ys, 1.0).unwrap();
        prop_assert!((w - shift.abs()).abs() < 1e-12);
    }
}
