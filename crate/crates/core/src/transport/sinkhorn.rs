//! Entropic optimal transport between equal-weight empirical measures,
//! iterated in the log domain.

use crate::error::{Error, Result};
use crate::transport::CostMatrix;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SinkhornOptions {
    /// Absolute regularisation strength, in cost units.
    pub eps: f64,
    pub max_iter: usize,
    /// Stop when the L1 row-marginal violation falls below this.
    pub tol: f64,
    /// Subtract the self-transport terms, `S(A,B) − (S(A,A) + S(B,B))/2`.
    pub debias: bool,
}

impl SinkhornOptions {
    pub fn new(eps: f64) -> Self {
        Self { eps, max_iter: 20_000, tol: 1e-5, debias: false }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SinkhornResult {
    /// `(Σ P_ij C_ij)^{1/p}` for the entropic plan `P`; bounds the exact
    /// value from above unless debiased.
    pub value: f64,
    /// `Σ P_ij C_ij` before taking the root.
    pub transport_cost: f64,
    pub eps: f64,
    pub iterations: usize,
    pub marginal_error: f64,
    pub converged: bool,
}

fn log_sum_exp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.map(|x| (x - max).exp()).sum::<f64>().ln()
}

struct Plan {
    cost: f64,
    iterations: usize,
    marginal_error: f64,
    converged: bool,
}

fn sweep(cost: &CostMatrix, eps: f64, f: &mut [f64], g: &mut [f64]) {
    let m = cost.size();
    let log_w = -(m as f64).ln();
    for i in 0..m {
        f[i] = eps * log_w - eps * log_sum_exp((0..m).map(|j| (g[j] - cost.get(i, j)) / eps));
    }
    for j in 0..m {
        g[j] = eps * log_w - eps * log_sum_exp((0..m).map(|i| (f[i] - cost.get(i, j)) / eps));
    }
}

/// Iterations per annealing stage before the final target-ε loop.
const STAGE_ITERATIONS: usize = 20;

fn entropic_plan_cost(cost: &CostMatrix, opts: &SinkhornOptions) -> Plan {
    let m = cost.size();
    let eps = opts.eps;
    let mut f = vec![0.0; m];
    let mut g = vec![0.0; m];
    // ε-scaling: warm-start the potentials along ε_k = c_max / 2^k.
    let c_max = cost.data().iter().fold(0.0_f64, |a, &b| a.max(b));
    let mut stage = c_max;
    while stage > 2.0 * eps {
        for _ in 0..STAGE_ITERATIONS {
            sweep(cost, stage, &mut f, &mut g);
        }
        stage /= 2.0;
    }
    let row_error = |f: &[f64], g: &[f64]| -> f64 {
        (0..m)
            .map(|i| {
                let mass: f64 = (0..m).map(|j| ((f[i] + g[j] - cost.get(i, j)) / eps).exp()).sum();
                (mass - 1.0 / m as f64).abs()
            })
            .sum()
    };
    let mut iterations = 0;
    let mut marginal_error = f64::INFINITY;
    while iterations < opts.max_iter {
        sweep(cost, eps, &mut f, &mut g);
        iterations += 1;
        if iterations % 10 == 0 || iterations == opts.max_iter {
            marginal_error = row_error(&f, &g);
            if marginal_error < opts.tol {
                break;
            }
        }
    }
    let mut total = 0.0;
    for i in 0..m {
        for j in 0..m {
            let c = cost.get(i, j);
            total += ((f[i] + g[j] - c) / eps).exp() * c;
        }
    }
    Plan { cost: total, iterations, marginal_error, converged: marginal_error < opts.tol }
}

/// Sinkhorn estimate from precomputed cost matrices. `self_costs` holds
/// the `(A,A)` and `(B,B)` matrices and is required iff debiasing.
pub fn sinkhorn_from_costs(
    cost: &CostMatrix,
    self_costs: Option<(&CostMatrix, &CostMatrix)>,
    opts: &SinkhornOptions,
) -> Result<SinkhornResult> {
    if !(opts.eps > 0.0 && opts.eps.is_finite()) {
        return Err(Error::domain(format!("sinkhorn eps must be positive, got {}", opts.eps)));
    }
    let main = entropic_plan_cost(cost, opts);
    let mut transport_cost = main.cost;
    let mut converged = main.converged;
    let mut marginal_error = main.marginal_error;
    let mut iterations = main.iterations;
    if opts.debias {
        let (aa, bb) = self_costs.ok_or_else(|| Error::domain("debiasing needs self-cost matrices"))?;
        let pa = entropic_plan_cost(aa, opts);
        let pb = entropic_plan_cost(bb, opts);
        transport_cost = (transport_cost - 0.5 * (pa.cost + pb.cost)).max(0.0);
        converged &= pa.converged && pb.converged;
        marginal_error = marginal_error.max(pa.marginal_error).max(pb.marginal_error);
        iterations = iterations.max(pa.iterations).max(pb.iterations);
    }
    Ok(SinkhornResult {
        value: transport_cost.powf(cost.exponent.recip()),
        transport_cost,
        eps: opts.eps,
        iterations,
        marginal_error,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_positive_eps() {
        let c = CostMatrix::new(1, vec![0.0], 1.0).unwrap();
        assert!(sinkhorn_from_costs(&c, None, &SinkhornOptions::new(0.0)).is_err());
        assert!(sinkhorn_from_costs(&c, None, &SinkhornOptions::new(-1.0)).is_err());
    }

    #[test]
    fn flags_non_convergence() {
        let c = CostMatrix::new(3, vec![0.0, 3.0, 1.0, 2.0, 0.0, 5.0, 1.0, 4.0, 0.5], 1.0).unwrap();
        let mut opts = SinkhornOptions::new(1.0);
        opts.max_iter = 1;
        opts.tol = 1e-12;
        let r = sinkhorn_from_costs(&c, None, &opts).unwrap();
        assert!(!r.converged);
        assert_eq!(r.iterations, 1);
    }

    #[test]
    fn two_point_instance() {
        let c = CostMatrix::new(2, vec![0.0, 1.0, 1.0, 0.0], 1.0).unwrap();
        let r = sinkhorn_from_costs(&c, None, &SinkhornOptions::new(0.01)).unwrap();
        assert!(r.converged);
        // Entropic plan puts weight ~e^{-100} off the diagonal.
        assert!(r.value < 1e-10, "{r:?}");
    }
}
