//! Empirical Wasserstein-`p` distances between equal-size samples.
//!
//! Path ensembles use the ground distance `‖x − y‖_∞`. Exact values come
//! from the assignment formulation (uniform weights make an optimal
//! permutation optimal among all couplings); Sinkhorn covers ensembles
//! beyond [`EXACT_SOLVER_LIMIT`].

mod assignment;
mod dual;
mod sinkhorn;

pub use assignment::{solve_assignment, Assignment, CostMatrix};
pub use dual::{kr_dual_lower_bound, lipschitz_catalog, PathFunctional, ScalarMap};
pub use sinkhorn::{sinkhorn_from_costs, SinkhornOptions, SinkhornResult};

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::paths::{empirical_lp, sup_distance_unchecked, PathEnsemble};

/// Largest ensemble the exact solver accepts.
pub const EXACT_SOLVER_LIMIT: usize = 512;

fn check_order(p: f64) -> Result<()> {
    if p >= 1.0 && p.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("Wasserstein order must be a finite p >= 1, got {p}")))
    }
}

/// `((1/m) Σ |x_(i) − y_(i)|^p)^{1/p}` over order statistics.
pub fn wasserstein_1d(mu: &[f64], nu: &[f64], p: f64) -> Result<f64> {
    check_order(p)?;
    if mu.len() != nu.len() {
        return Err(Error::SizeMismatch { left: mu.len(), right: nu.len() });
    }
    if mu.is_empty() {
        return Err(Error::Empty("empirical measure"));
    }
    if mu.iter().chain(nu).any(|x| !x.is_finite()) {
        return Err(Error::domain("samples must be finite"));
    }
    let mut x = mu.to_vec();
    let mut y = nu.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let gaps: Vec<f64> = x.iter().zip(&y).map(|(a, b)| (a - b).abs()).collect();
    Ok(empirical_lp(&gaps, p))
}

/// `C_ij = ‖A_i − B_j‖_∞^p`, rows computed under `exec`.
pub fn cost_matrix(a: &PathEnsemble, b: &PathEnsemble, p: f64, exec: Exec) -> Result<CostMatrix> {
    check_order(p)?;
    a.same_grid(b)?;
    if a.len() != b.len() {
        return Err(Error::SizeMismatch { left: a.len(), right: b.len() });
    }
    let m = a.len();
    let rows = exec.map_indexed(m, |i| {
        let x = a.path(i);
        b.paths().iter().map(|y| sup_distance_unchecked(x, y).powf(p)).collect::<Vec<_>>()
    });
    CostMatrix::new(m, rows.concat(), p)
}

/// Exact empirical `W_p` from a cost matrix already raised to the power `p`.
pub fn wasserstein_from_costs(cost: &CostMatrix) -> Result<(f64, Assignment)> {
    if cost.size() > EXACT_SOLVER_LIMIT {
        return Err(Error::ResourceLimit(format!(
            "exact assignment limited to m <= {EXACT_SOLVER_LIMIT}, got {}",
            cost.size()
        )));
    }
    let plan = solve_assignment(cost);
    Ok((plan.mean_cost.powf(cost.exponent.recip()), plan))
}

/// Exact empirical `W_p` between path ensembles of equal size.
pub fn wasserstein_paths(a: &PathEnsemble, b: &PathEnsemble, p: f64) -> Result<f64> {
    wasserstein_paths_with(a, b, p, Exec::default())
}

pub fn wasserstein_paths_with(a: &PathEnsemble, b: &PathEnsemble, p: f64, exec: Exec) -> Result<f64> {
    if a.len() > EXACT_SOLVER_LIMIT {
        return Err(Error::ResourceLimit(format!(
            "exact assignment limited to m <= {EXACT_SOLVER_LIMIT}, got {}; use sinkhorn",
            a.len()
        )));
    }
    // Solve in a fixed orientation: tie-breaking inside the solver is
    // orientation dependent, and this keeps W(A,B) = W(B,A) bitwise.
    let (a, b) = if canonical_order(a, b) == Ordering::Greater { (b, a) } else { (a, b) };
    Ok(wasserstein_from_costs(&cost_matrix(a, b, p, exec)?)?.0)
}

fn canonical_order(a: &PathEnsemble, b: &PathEnsemble) -> Ordering {
    let flat = |e: &PathEnsemble| e.paths().iter().flat_map(|p| p.values().iter().copied()).collect::<Vec<f64>>();
    let (x, y) = (flat(a), flat(b));
    x.iter().zip(&y).map(|(u, v)| u.total_cmp(v)).find(|o| o.is_ne()).unwrap_or(x.len().cmp(&y.len()))
}

/// Entropic approximation of [`wasserstein_paths`].
pub fn sinkhorn_paths(a: &PathEnsemble, b: &PathEnsemble, p: f64, opts: &SinkhornOptions) -> Result<SinkhornResult> {
    let exec = Exec::default();
    let cost = cost_matrix(a, b, p, exec)?;
    if opts.debias {
        let aa = cost_matrix(a, a, p, exec)?;
        let bb = cost_matrix(b, b, p, exec)?;
        sinkhorn_from_costs(&cost, Some((&aa, &bb)), opts)
    } else {
        sinkhorn_from_costs(&cost, None, opts)
    }
}

/// `W_s(A, δ_0) = (mean ‖A_i‖_∞^s)^{1/s}`.
pub fn moment_to_zero(a: &PathEnsemble, s: f64) -> Result<f64> {
    check_order(s)?;
    let norms: Vec<f64> = a.paths().iter().map(|p| p.sup_norm()).collect();
    Ok(empirical_lp(&norms, s))
}

/// Both sides of
/// `W_r(A,B) ≤ W_1(A,B)^θ (W_s(A,0) + W_s(B,0))^{1−θ}`,
/// `θ = (1/r − 1/s)/(1 − 1/s)`, for `1 ≤ r < s`.
pub fn interpolation_check(a: &PathEnsemble, b: &PathEnsemble, r: f64, s: f64) -> Result<(f64, f64)> {
    check_order(r)?;
    check_order(s)?;
    if r >= s {
        return Err(Error::domain(format!("interpolation needs r < s, got r={r}, s={s}")));
    }
    let theta = (r.recip() - s.recip()) / (1.0 - s.recip());
    let lhs = wasserstein_paths(a, b, r)?;
    let w1 = wasserstein_paths(a, b, 1.0)?;
    let spread = moment_to_zero(a, s)? + moment_to_zero(b, s)?;
    Ok((lhs, w1.powf(theta) * spread.powf(1.0 - theta)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::paths::StepPath;

    fn scalar_ensemble(xs: &[f64]) -> PathEnsemble {
        PathEnsemble::new(xs.iter().map(|&x| StepPath::constant(1, &[x])).collect(), "").unwrap()
    }

    #[test]
    fn one_dimensional_examples() {
        assert_eq!(wasserstein_1d(&[0.3, 0.1], &[0.1, 0.3], 1.0).unwrap(), 0.0);
        assert_eq!(wasserstein_1d(&[0.0], &[1.0], 2.0).unwrap(), 1.0);
        assert_eq!(wasserstein_1d(&[0.0, 0.0, 1.0, 1.0], &[0.0, 1.0, 1.0, 1.0], 1.0).unwrap(), 0.25);
        assert!(wasserstein_1d(&[0.0], &[1.0, 2.0], 1.0).is_err());
        assert!(wasserstein_1d(&[0.0], &[1.0], 0.5).is_err());
    }

    #[test]
    fn single_path_distance() {
        let a = scalar_ensemble(&[2.0]);
        let b = scalar_ensemble(&[-0.5]);
        assert_eq!(wasserstein_paths(&a, &b, 3.0).unwrap(), 2.5);
    }

    #[test]
    fn shuffled_copy_is_at_distance_zero() {
        let a = scalar_ensemble(&[0.1, 0.7, -2.0, 4.0]);
        let b = a.permuted(&[2, 0, 3, 1]);
        assert_eq!(wasserstein_paths(&a, &b, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn solver_limit_is_enforced() {
        let xs: Vec<f64> = (0..=EXACT_SOLVER_LIMIT).map(|i| i as f64).collect();
        let a = scalar_ensemble(&xs);
        assert!(matches!(wasserstein_paths(&a, &a, 1.0), Err(Error::ResourceLimit(_))));
    }

    #[test]
    fn interpolation_trivial_cases() {
        let a = scalar_ensemble(&[0.0, 1.0, 3.0]);
        let b = scalar_ensemble(&[0.5, -1.0, 2.0]);
        assert!(interpolation_check(&a, &b, 2.0, 2.0).is_err());
        let (l, r) = interpolation_check(&a, &a, 2.0, 4.0).unwrap();
        assert_eq!(l, 0.0);
        assert!(r >= 0.0);
        let (l, r) = interpolation_check(&a, &b, 1.0, 4.0).unwrap();
        assert!((l - r).abs() < 1e-15);
    }
}
