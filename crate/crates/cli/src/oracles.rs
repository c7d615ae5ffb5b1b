//! Independent reference computations and random inputs for `check`.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use wiplab_core::paths::{sup_norm_distance, PathEnsemble, StepPath};

/// All permutations of `0..m`, by insertion.
pub fn permutations(m: usize) -> Vec<Vec<usize>> {
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

/// Empirical `W_p` by exhaustive search over all `m!` matchings.
pub fn brute_force_wp(a: &PathEnsemble, b: &PathEnsemble, p: f64) -> f64 {
    let m = a.len();
    assert!(m <= 8, "exhaustive search over {m}! matchings");
    let c: Vec<Vec<f64>> = (0..m)
        .map(|i| (0..m).map(|j| sup_norm_distance(a.path(i), b.path(j)).expect("same grid").powf(p)).collect())
        .collect();
    let best = permutations(m)
        .iter()
        .map(|perm| perm.iter().enumerate().map(|(i, &j)| c[i][j]).sum::<f64>())
        .fold(f64::INFINITY, f64::min);
    (best / m as f64).powf(p.recip())
}

/// A random walk with uniform increments on `[-1, 1]^d`, scaled by `n^{-1/2}`.
pub fn random_path(rng: &mut ChaCha8Rng, n: usize, d: usize) -> StepPath {
    let incr: Vec<f64> = (0..n * d).map(|_| rng.random_range(-1.0..1.0)).collect();
    StepPath::from_increments(&incr, d, (n as f64).sqrt().recip())
}

pub fn random_ensemble(rng: &mut ChaCha8Rng, m: usize, n: usize, d: usize) -> PathEnsemble {
    PathEnsemble::new((0..m).map(|_| random_path(rng, n, d)).collect(), "random walks").expect("non-empty")
}

/// Constant paths at the given levels, embedding a 1-D sample in path space.
pub fn constant_ensemble(levels: &[f64], n: usize) -> PathEnsemble {
    PathEnsemble::new(levels.iter().map(|&x| StepPath::constant(n, &[x])).collect(), "constants").expect("non-empty")
}
