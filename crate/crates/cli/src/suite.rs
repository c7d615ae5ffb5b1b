//! The `check` property suite: every invariant that can be tested
//! without a human in the loop, as a pass/fail manifest.

use std::collections::{BTreeMap, HashSet};
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use wiplab_core::blocks::{big_block_samples, decomposition_residuals, make_scheme, v_n_covariance};
use wiplab_core::dynamics::{DynSystem, Observable, Sampler};
use wiplab_core::exec::derive_seed;
use wiplab_core::gaussian::{iid_partial_sum_ensemble, normal_quantiles, sample_brownian, scale_ensemble, BrownianSpec, StepLaw};
use wiplab_core::numeric::rational_to_f64;
use wiplab_core::paths::{estimate_sigma, max_partial_sum_moment, CovMatrix, PathEnsemble};
use wiplab_core::rates::{
    b_matching_dependence_term, b_matching_small_block_term, gamma_for_system, kappa, kappa_from_exponents, kappa_w1,
    optimal_exponents, RateParams, SystemCatalogEntry,
};
use wiplab_core::transport::{interpolation_check, kr_dual_lower_bound, lipschitz_catalog, wasserstein_1d, wasserstein_paths};
use wiplab_core::Exec;

use crate::config::{CheckScale, ExperimentConfig, Overrides};
use crate::error::Result;
use crate::experiments::{run_convergence, run_rates};
use crate::oracles::{brute_force_wp, constant_ensemble, random_ensemble};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    /// Reported for inspection, not counted.
    Info,
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckResult {
    pub id: &'static str,
    pub status: Status,
    pub summary: String,
    pub metrics: BTreeMap<String, f64>,
}

impl CheckResult {
    fn new(id: &'static str, ok: bool, summary: impl Into<String>) -> Self {
        let status = if ok { Status::Pass } else { Status::Fail };
        Self { id, status, summary: summary.into(), metrics: BTreeMap::new() }
    }

    fn info(id: &'static str, summary: impl Into<String>) -> Self {
        Self { id, status: Status::Info, summary: summary.into(), metrics: BTreeMap::new() }
    }

    fn metric(mut self, key: &str, value: f64) -> Self {
        self.metrics.insert(key.to_string(), value);
        self
    }

    pub fn passed(&self) -> bool {
        self.status != Status::Fail
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Manifest {
    pub seed: u64,
    pub scale: CheckScale,
    pub passed: usize,
    pub failed: usize,
    pub info: usize,
    pub checks: Vec<CheckResult>,
}

impl Manifest {
    pub fn all_passed(&self) -> bool {
        self.failed == 0
    }
}

pub type KappaFn = fn(&RateParams) -> BigRational;

type Check = fn(&Suite) -> Result<CheckResult>;

/// Suite parameters. `kappa` is injectable so tests can tamper with it.
#[derive(Clone, Copy, Debug)]
pub struct Suite {
    pub seed: u64,
    pub scale: CheckScale,
    pub kappa: KappaFn,
}

fn q(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn doubling_cos() -> Result<Sampler> {
    Ok(Sampler::new(DynSystem::doubling(), Observable::parse(&["cos(x)"])?)?)
}

impl Suite {
    pub fn new(seed: u64, scale: CheckScale) -> Self {
        Self { seed, scale, kappa }
    }

    pub fn from_config(cfg: &ExperimentConfig) -> Self {
        Self::new(cfg.seed, cfg.check_scale)
    }

    pub fn with_kappa(mut self, kappa: KappaFn) -> Self {
        self.kappa = kappa;
        self
    }

    fn rng(&self, tag: &str) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(derive_seed(self.seed, tag))
    }

    fn seed(&self, tag: &str) -> u64 {
        derive_seed(self.seed, tag)
    }

    /// `full` at acceptance size, `quick` divided by ten.
    fn size(&self, full: usize) -> usize {
        match self.scale {
            CheckScale::Full => full,
            CheckScale::Quick => (full / 10).max(2),
        }
    }

    pub fn registry() -> Vec<(&'static str, Check)> {
        vec![
            ("rates.flowers", Suite::rates_flowers),
            ("rates.factorization", Suite::rates_factorization),
            ("rates.large_gamma", Suite::rates_large_gamma),
            ("rates.optimal_exponents", Suite::rates_optimal_exponents),
            ("transport.exhaustive", Suite::transport_exhaustive),
            ("transport.metric_axioms", Suite::transport_metric_axioms),
            ("transport.one_dimensional", Suite::transport_one_dimensional),
            ("transport.interpolation", Suite::transport_interpolation),
            ("transport.kr_duality", Suite::transport_kr_duality),
            ("blocks.schemes", Suite::blocks_schemes),
            ("blocks.telescoping", Suite::blocks_telescoping),
            ("stats.sigma", Suite::stats_sigma),
            ("stats.v_n_gap", Suite::stats_v_n_gap),
            ("stats.marginal", Suite::stats_marginal),
            ("stats.max_partial_sum", Suite::stats_max_partial_sum),
            ("paths.trend", Suite::paths_trend),
            ("gaussian.iid_trend", Suite::gaussian_iid_trend),
            ("reports.reproducible", Suite::reports_reproducible),
        ]
    }

    /// Runs one check; an error inside it is recorded as a failure.
    pub fn run_check(&self, id: &'static str, check: Check) -> CheckResult {
        check(self).unwrap_or_else(|e| CheckResult::new(id, false, format!("error: {e}")))
    }

    pub fn run(&self) -> (Manifest, Duration) {
        let start = Instant::now();
        let checks: Vec<CheckResult> = Self::registry().into_iter().map(|(id, c)| self.run_check(id, c)).collect();
        let count = |s: Status| checks.iter().filter(|c| c.status == s).count();
        let manifest = Manifest {
            seed: self.seed,
            scale: self.scale,
            passed: count(Status::Pass),
            failed: count(Status::Fail),
            info: count(Status::Info),
            checks,
        };
        (manifest, start.elapsed())
    }

    // ------------------------------------------------------------ rates

    pub fn rates_flowers(&self) -> Result<CheckResult> {
        let flowers = RateParams::from_ratios(gamma_for_system(&SystemCatalogEntry::Flowers)?, q(1, 1))?;
        let lsv = RateParams::from_ratios(gamma_for_system(&SystemCatalogEntry::Lsv { alpha: "1/3".into() })?, q(1, 1))?;
        let k = (self.kappa)(&flowers);
        let ok = k == q(3, 34) && (self.kappa)(&lsv) == k;
        Ok(CheckResult::new("rates.flowers", ok, format!("kappa(flowers) = {k}, kappa(lsv 1/3) = {}", (self.kappa)(&lsv))))
    }

    /// `κ(γ, 1)` equals the Wasserstein-1 exponent, i.e. the `r = 1`
    /// denominator factors, on 50 grid values of `γ ∈ (1, 100]`.
    pub fn rates_factorization(&self) -> Result<CheckResult> {
        let mut exact = true;
        let mut worst = 0.0_f64;
        for i in 1..=50 {
            let g = q(50 + 99 * i, 50);
            let p = RateParams::from_ratios(g.clone(), q(1, 1))?;
            let (k, w) = ((self.kappa)(&p), kappa_w1(&g)?);
            exact &= k == w;
            worst = worst.max((rational_to_f64(&k) - rational_to_f64(&w)).abs());
        }
        let ok = exact && worst <= 1e-10;
        Ok(CheckResult::new("rates.factorization", ok, format!("exact = {exact}, max |diff| = {worst:e}")).metric("max_abs_diff", worst))
    }

    pub fn rates_large_gamma(&self) -> Result<CheckResult> {
        let mut ok = true;
        let mut res = CheckResult::new("rates.large_gamma", true, "");
        for r in [1, 2, 4] {
            let k = rational_to_f64(&(self.kappa)(&RateParams::from_ratios(q(1_000_000, 1), q(r, 1))?));
            ok &= (0.249..=0.25).contains(&k);
            res = res.metric(&format!("kappa_r{r}"), k);
        }
        res.status = if ok { Status::Pass } else { Status::Fail };
        res.summary = "kappa(1e6, r) in [0.249, 0.25] for r in {1, 2, 4}".into();
        Ok(res)
    }

    pub fn rates_optimal_exponents(&self) -> Result<CheckResult> {
        let mut rng = self.rng("rates.optimal_exponents");
        let (mut worst_b, mut worst_k) = (0.0_f64, 0.0_f64);
        let mut ordered = true;
        for _ in 0..200 {
            let g: f64 = rng.random_range(1.0..=20.0);
            if g == 1.0 {
                continue;
            }
            let r: f64 = rng.random_range(1.0..2.0 * g);
            let p = RateParams::new(g, r)?;
            let e = optimal_exponents(&p)?;
            let (a, b) = (e.a_f64(), e.b_f64());
            ordered &= 0.0 < b && b < a && a < 1.0;
            let b1 = rational_to_f64(&b_matching_dependence_term(&p, e.a()));
            let b2 = rational_to_f64(&b_matching_small_block_term(&p, e.a()));
            worst_b = worst_b.max((b1 - b2).abs());
            let k = rational_to_f64(&(self.kappa)(&p));
            worst_k = worst_k.max((rational_to_f64(&kappa_from_exponents(&p, &e)) - k).abs());
        }
        let ok = ordered && worst_b <= 1e-12 && worst_k <= 1e-10;
        Ok(CheckResult::new(
            "rates.optimal_exponents",
            ok,
            format!("0<b<a<1: {ordered}, b-equations max gap {worst_b:e}, kappa gap {worst_k:e}"),
        )
        .metric("b_gap", worst_b)
        .metric("kappa_gap", worst_k))
    }

    // -------------------------------------------------------- transport

    pub fn transport_exhaustive(&self) -> Result<CheckResult> {
        let mut rng = self.rng("transport.exhaustive");
        let mut worst = 0.0_f64;
        for trial in 0..100 {
            let m = 1 + trial % 7;
            let n = rng.random_range(1..12);
            let d = rng.random_range(1..3);
            let p = [1.0, 2.0, 1.5][trial % 3];
            let a = random_ensemble(&mut rng, m, n, d);
            let b = random_ensemble(&mut rng, m, n, d);
            worst = worst.max((wasserstein_paths(&a, &b, p)? - brute_force_wp(&a, &b, p)).abs());
        }
        Ok(CheckResult::new("transport.exhaustive", worst <= 1e-12, format!("max |assignment - exhaustive| = {worst:e}"))
            .metric("max_abs_diff", worst))
    }

    pub fn transport_metric_axioms(&self) -> Result<CheckResult> {
        let mut rng = self.rng("transport.metric_axioms");
        let (mut symmetric, mut identity) = (true, true);
        let mut excess = f64::NEG_INFINITY;
        for _ in 0..500 {
            let m = rng.random_range(2..9);
            let n = rng.random_range(2..10);
            let [a, b, c] = std::array::from_fn(|_| random_ensemble(&mut rng, m, n, 2));
            let ab = wasserstein_paths(&a, &b, 1.0)?;
            symmetric &= ab == wasserstein_paths(&b, &a, 1.0)?;
            identity &= wasserstein_paths(&a, &a, 1.0)? == 0.0;
            let ac = wasserstein_paths(&a, &c, 1.0)?;
            excess = excess.max(ac - ab - wasserstein_paths(&b, &c, 1.0)?);
        }
        let ok = symmetric && identity && excess <= 1e-9;
        Ok(CheckResult::new(
            "transport.metric_axioms",
            ok,
            format!("symmetry exact: {symmetric}, W(A,A) = 0: {identity}, max triangle excess {excess:e}"),
        )
        .metric("triangle_excess", excess))
    }

    pub fn transport_one_dimensional(&self) -> Result<CheckResult> {
        let mut rng = self.rng("transport.one_dimensional");
        let mut worst = 0.0_f64;
        for trial in 0..100 {
            let m = rng.random_range(1..40);
            let p = [1.0, 2.0, 1.5][trial % 3];
            let x: Vec<f64> = (0..m).map(|_| rng.random_range(-3.0..3.0)).collect();
            let y: Vec<f64> = (0..m).map(|_| rng.random_range(-3.0..3.0)).collect();
            let n = rng.random_range(1..6);
            let path = wasserstein_paths(&constant_ensemble(&x, n), &constant_ensemble(&y, n), p)?;
            worst = worst.max((path - wasserstein_1d(&x, &y, p)?).abs());
        }
        Ok(CheckResult::new("transport.one_dimensional", worst <= 1e-12, format!("max |order statistics - assignment| = {worst:e}"))
            .metric("max_abs_diff", worst))
    }

    pub fn transport_interpolation(&self) -> Result<CheckResult> {
        let mut rng = self.rng("transport.interpolation");
        let mut excess = f64::NEG_INFINITY;
        for _ in 0..200 {
            let m = rng.random_range(2..24);
            let n = rng.random_range(2..16);
            let d = rng.random_range(1..3);
            let a = random_ensemble(&mut rng, m, n, d);
            let b = random_ensemble(&mut rng, m, n, d);
            for (r, s) in [(2.0, 4.0), (1.5, 3.0), (2.0, 6.0)] {
                let (lhs, rhs) = interpolation_check(&a, &b, r, s)?;
                excess = excess.max(lhs - rhs);
            }
        }
        Ok(CheckResult::new("transport.interpolation", excess <= 1e-9, format!("max lhs - rhs = {excess:e} over (r,s) in {{(2,4), (1.5,3), (2,6)}}"))
            .metric("max_excess", excess))
    }

    pub fn transport_kr_duality(&self) -> Result<CheckResult> {
        let mut rng = self.rng("transport.kr_duality");
        let mut excess = f64::NEG_INFINITY;
        let mut functionals = 0;
        for _ in 0..100 {
            let m = rng.random_range(2..20);
            let n = rng.random_range(2..16);
            let d = rng.random_range(1..3);
            let a = random_ensemble(&mut rng, m, n, d);
            let b = random_ensemble(&mut rng, m, n, d);
            let w1 = wasserstein_paths(&a, &b, 1.0)?;
            for f in lipschitz_catalog(b.path(0)) {
                excess = excess.max(kr_dual_lower_bound(&a, &b, &f)? - w1);
                functionals += 1;
            }
        }
        Ok(CheckResult::new("transport.kr_duality", excess <= 1e-9, format!("{functionals} functional evaluations, max bound - W1 = {excess:e}"))
            .metric("max_excess", excess))
    }

    // ----------------------------------------------------------- blocks

    /// Every constructible scheme of the test matrix partitions `0..n`.
    pub fn blocks_schemes(&self) -> Result<CheckResult> {
        let mut checked = 0;
        let mut failures = Vec::new();
        for n in [4, 10, 64, 100, 257, 1000, 4096, 10_000, 1 << 14] {
            for (a, b) in [(0.6, 0.3), (0.7, 0.2), (0.7, 0.5), (0.5, 0.1), (0.9, 0.8), (0.5074, 0.0246)] {
                let s = match make_scheme(n, a, b) {
                    Ok(s) => s,
                    Err(wiplab_core::Error::DegenerateScheme { .. }) => continue,
                    Err(e) => return Err(e.into()),
                };
                checked += 1;
                let mut seen = HashSet::new();
                let mut ok = s.verify().is_ok() && s.remainder().len() <= s.p + s.q;
                for i in 1..=s.k {
                    for j in s.big_block(i).chain(s.small_block(i)) {
                        ok &= seen.insert(j);
                    }
                }
                for j in s.remainder() {
                    ok &= seen.insert(j);
                }
                ok &= seen.len() == n && seen.iter().all(|&j| j < n);
                if !ok {
                    failures.push(format!("({n}, {a}, {b})"));
                }
            }
        }
        Ok(CheckResult::new("blocks.schemes", failures.is_empty(), format!("{checked} schemes verified; failures: {failures:?}"))
            .metric("schemes", checked as f64))
    }

    pub fn blocks_telescoping(&self) -> Result<CheckResult> {
        let s = doubling_cos()?;
        let scheme = make_scheme(1000, 0.6, 0.3)?;
        let rows = s.map_orbits(1000, 100, self.seed("blocks.telescoping"), |v| decomposition_residuals(v, 1, &scheme))?;
        let mut worst = 0.0_f64;
        for r in rows {
            worst = r?.into_iter().fold(worst, f64::max);
        }
        Ok(CheckResult::new("blocks.telescoping", worst == 0.0, format!("max residual over 100 orbits = {worst:e}")).metric("max_residual", worst))
    }

    // ------------------------------------------------------- statistics

    /// `Σ̂` for doubling + `cos 2πx` within 3 standard errors of 1/2.
    pub fn stats_sigma(&self) -> Result<CheckResult> {
        let est = estimate_sigma(&doubling_cos()?, 256, self.size(100_000), self.seed("stats.sigma"))?;
        let (v, se) = (est.cov.get(0, 0), est.std_err[0]);
        let ok = (v - 0.5).abs() <= 3.0 * se;
        Ok(CheckResult::new("stats.sigma", ok, format!("sigma = {v} +/- {se} (target 1/2)")).metric("sigma", v).metric("std_err", se))
    }

    /// `|V_n − Σ̂|` smaller at `n = 2^14` than at `n = 2^8`, optimal
    /// exponents of the doubling proxy.
    pub fn stats_v_n_gap(&self) -> Result<CheckResult> {
        let s = doubling_cos()?;
        let sigma = estimate_sigma(&s, 256, self.size(100_000), self.seed("stats.sigma"))?.cov;
        let e = optimal_exponents(&RateParams::from_ratios(q(50, 1), q(1, 1))?)?;
        let gap = |n: usize| -> Result<f64> {
            let scheme = make_scheme(n, e.a_f64(), e.b_f64())?;
            let samples = big_block_samples(&s, &scheme, self.size(400_000), self.seed("stats.v_n_gap"))?;
            Ok(v_n_covariance(&scheme, &samples, 1)?.distance(&sigma))
        };
        let (first, last) = (gap(1 << 8)?, gap(1 << 14)?);
        Ok(CheckResult::new("stats.v_n_gap", last < first, format!("|V_n - sigma|: {first:e} at 2^8, {last:e} at 2^14"))
            .metric("gap_first", first)
            .metric("gap_last", last))
    }

    /// 1-D `W_1` of `W_n(1)` against the exact `N(0, 1/2)` quantile grid.
    pub fn marginal_w1(&self, n: usize, m: usize) -> Result<f64> {
        let s = doubling_cos()?;
        let scale = (n as f64).sqrt().recip();
        let ends = s.map_orbits(n, m, self.seed("stats.marginal"), |v| v.iter().sum::<f64>() * scale)?;
        Ok(wasserstein_1d(&ends, &normal_quantiles(m, 0.5f64.sqrt()), 1.0)?)
    }

    pub fn stats_marginal(&self) -> Result<CheckResult> {
        let m = self.size(100_000);
        let (first, last) = (self.marginal_w1(64, m)?, self.marginal_w1(4096, m)?);
        let ok = last < 0.05 && last < first;
        Ok(CheckResult::new("stats.marginal", ok, format!("W1(W_n(1), N(0,1/2)): {first:.5} at n=64, {last:.5} at n=4096"))
            .metric("w1_first", first)
            .metric("w1_last", last))
    }

    pub fn stats_max_partial_sum(&self) -> Result<CheckResult> {
        let s = doubling_cos()?;
        let mut ratios = Vec::new();
        for e in 6..=14 {
            let n = 1usize << e;
            ratios.push(max_partial_sum_moment(&s, n, self.size(2000), self.seed("stats.max_partial_sum"), 4.0)? / (n as f64).sqrt());
        }
        let hi = ratios.iter().copied().fold(f64::MIN, f64::max);
        let lo = ratios.iter().copied().fold(f64::MAX, f64::min);
        Ok(CheckResult::new("stats.max_partial_sum", hi / lo <= 3.0, format!("L4 norm / sqrt(n) over n = 2^6..2^14: max/min = {:.4}", hi / lo))
            .metric("max_over_min", hi / lo))
    }

    // ------------------------------------------------------------ paths

    /// Path-space `W_1` to Brownian motion at `m = 256`, `n = 64` and
    /// `4096`. Dominated by the empirical floor, so reported only.
    pub fn paths_trend(&self) -> Result<CheckResult> {
        let s = doubling_cos()?;
        let sigma = estimate_sigma(&s, 4096, self.size(10_000), self.seed("paths.sigma"))?.cov;
        let w = |n: usize| -> Result<f64> {
            let e = PathEnsemble::from_sampler(&s, n, 256, self.seed("paths.trend"))?;
            let spec = BrownianSpec { covariance: sigma.clone(), n, m: 256, seed: self.seed("paths.brownian") };
            Ok(wasserstein_paths(&e, &sample_brownian(&spec, Exec::default())?, 1.0)?)
        };
        let (first, last) = (w(64)?, w(4096)?);
        Ok(CheckResult::info(
            "paths.trend",
            format!("W1(W_n, BM) at m = 256: {first:.4} at n=64, {last:.4} at n=4096 (sampling floor dominates)"),
        )
        .metric("w1_first", first)
        .metric("w1_last", last))
    }

    /// Rescaled Rademacher walks against Brownian motion, `W_2`,
    /// `k ∈ {16, 64, 256}`. Reported only, for the same reason.
    pub fn gaussian_iid_trend(&self) -> Result<CheckResult> {
        let mut res = CheckResult::info("gaussian.iid_trend", "W2(rescaled Rademacher walk, BM) at m = 256");
        for k in [16usize, 64, 256] {
            let walk = iid_partial_sum_ensemble(StepLaw::Rademacher, 1, k, 256, self.seed("gaussian.walk"), Exec::default())?;
            let walk = scale_ensemble(&walk, (k as f64).sqrt().recip())?;
            let spec = BrownianSpec { covariance: CovMatrix::identity(1), n: k, m: 256, seed: self.seed("gaussian.brownian") };
            res = res.metric(&format!("w2_k{k}"), wasserstein_paths(&walk, &sample_brownian(&spec, Exec::default())?, 2.0)?);
        }
        Ok(res)
    }

    // ---------------------------------------------------------- reports

    /// Two runs of `rates` and of a small `convergence` serialise to
    /// identical bytes.
    pub fn reports_reproducible(&self) -> Result<CheckResult> {
        let overrides = Overrides { seed: Some(self.seed), ..Overrides::default() };
        let rates_cfg = ExperimentConfig::from_toml("[system]\nkind = \"flowers\"\n[rates]\ntable = [2, 3]\n", &overrides)?;
        let conv_cfg = ExperimentConfig::from_toml(
            "[grid]\nn = [16, 32, 64]\nm = 32\nbootstrap = 3\n[sigma]\nn = 64\nm = 500\n[blocks]\nvariance_m = 2000\nm = 50\n",
            &overrides,
        )?;
        let rates = |c| -> Result<String> { Ok(serde_json::to_string(&run_rates(c)?)?) };
        let conv = |c| -> Result<String> { Ok(serde_json::to_string(&run_convergence(c)?)?) };
        let ok = rates(&rates_cfg)? == rates(&rates_cfg)? && conv(&conv_cfg)? == conv(&conv_cfg)?;
        Ok(CheckResult::new("reports.reproducible", ok, "rates and convergence reports byte-identical across reruns"))
    }
}
