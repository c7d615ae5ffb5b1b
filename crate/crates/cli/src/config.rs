//! Experiment configuration: a TOML file, optionally overridden by flags,
//! validated in full before any computation.

use std::path::{Path, PathBuf};

use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use wiplab_core::dynamics::{DynSystem, Observable, DEFAULT_ENSEMBLE_BUDGET};
use wiplab_core::numeric::{parse_rational, rational_from_f64, rational_to_f64};
use wiplab_core::rates::{gamma_for_system, optimal_exponents, parse_alpha, ExponentPair, RateParams, SystemCatalogEntry};
use wiplab_core::transport::EXACT_SOLVER_LIMIT;

use crate::error::{CliError, Result};

/// A number written either as a TOML number or as a string such as
/// `"1/3"`. Strings are parsed exactly; floats are taken at their binary
/// value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Number {
    Int(i64),
    Float(f64),
    Text(String),
}

impl Number {
    fn rational(&self, path: &str) -> Result<BigRational> {
        match self {
            Number::Int(i) => Ok(BigRational::from_integer((*i).into())),
            Number::Float(x) => rational_from_f64(*x).map_err(|e| CliError::invalid(path, e)),
            Number::Text(s) => parse_rational(s).map_err(|e| CliError::invalid(path, e)),
        }
    }

    fn text(&self) -> String {
        match self {
            Number::Int(i) => i.to_string(),
            Number::Float(x) => x.to_string(),
            Number::Text(s) => s.clone(),
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub seed: Option<u64>,
    /// Left out of report provenance so outputs do not depend on where
    /// they are written.
    #[serde(skip_serializing)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub system: SystemSection,
    #[serde(default)]
    pub observable: ObservableSection,
    #[serde(default)]
    pub rates: RatesSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub blocks: BlocksSection,
    #[serde(default)]
    pub sigma: SigmaSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub limits: LimitsSection,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemSection {
    pub kind: String,
    pub alpha: Option<Number>,
    pub proxy_gamma: Option<Number>,
}

impl Default for SystemSection {
    fn default() -> Self {
        Self { kind: "doubling".into(), alpha: None, proxy_gamma: None }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObservableSection {
    pub components: Vec<String>,
    pub centering: Option<Vec<f64>>,
    pub burn_in: Option<usize>,
}

impl Default for ObservableSection {
    fn default() -> Self {
        Self { components: vec!["cos(x)".into()], centering: None, burn_in: None }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RatesSection {
    pub gamma: Option<Number>,
    pub r: Number,
    /// Extra `r` values tabulated by `rates`.
    #[serde(default)]
    pub table: Vec<Number>,
}

impl Default for RatesSection {
    fn default() -> Self {
        Self { gamma: None, r: Number::Int(1), table: Vec::new() }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub n: Vec<usize>,
    pub m: usize,
    pub bootstrap: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        Self { n: vec![64, 256, 1024, 4096], m: 256, bootstrap: 20 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlocksSection {
    /// `"optimal"` or a value in `(0, 1)`.
    pub a: Number,
    pub b: Number,
    /// Orbits for the per-`n` block diagnostics.
    pub m: usize,
    /// Samples of `X̂_1` behind each `V_n`.
    pub variance_m: usize,
}

impl Default for BlocksSection {
    fn default() -> Self {
        Self { a: Number::Text("optimal".into()), b: Number::Text("optimal".into()), m: 2000, variance_m: 100_000 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SigmaSection {
    pub n: usize,
    pub m: usize,
}

impl Default for SigmaSection {
    fn default() -> Self {
        Self { n: 4096, m: 10_000 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    Exact,
    Sinkhorn,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub kind: SolverKind,
    /// Sinkhorn regularisation as a multiple of the median cost.
    pub eps: f64,
    pub max_iter: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        Self { kind: SolverKind::Exact, eps: 0.01, max_iter: 20_000 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LimitsSection {
    /// Largest `n·m·d` held in memory at once.
    pub max_values: usize,
    /// Wall-clock budget for `check`, in seconds.
    pub check_seconds: f64,
    pub check_scale: CheckScale,
}

impl Default for LimitsSection {
    fn default() -> Self {
        Self { max_values: DEFAULT_ENSEMBLE_BUDGET, check_seconds: 600.0, check_scale: CheckScale::Full }
    }
}

/// Sample sizes used by `check`: `full` runs every statistical check at
/// its acceptance size, `quick` shrinks the Monte Carlo work roughly
/// tenfold for smoke runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckScale {
    Full,
    Quick,
}

/// Command-line values that take precedence over the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub solver: Option<SolverKind>,
    pub eps: Option<f64>,
    pub m: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Solver {
    Exact,
    Sinkhorn { eps_rel: f64, max_iter: usize },
}

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub out: PathBuf,
    pub catalog: SystemCatalogEntry,
    /// `None` for catalog entries without a simulator (flowers).
    pub system: Option<DynSystem>,
    pub observable: Observable,
    pub centering: Option<Vec<f64>>,
    pub burn_in: Option<usize>,
    pub params: RateParams,
    pub r_table: Vec<RateParams>,
    pub grid: Vec<usize>,
    pub m: usize,
    pub bootstrap: usize,
    /// `None` when the exponents are "optimal" and `r = 2γ`.
    pub exponents: Option<ExponentPair>,
    pub block_m: usize,
    pub variance_m: usize,
    pub sigma_n: usize,
    pub sigma_m: usize,
    pub solver: Solver,
    pub max_values: usize,
    pub check_seconds: f64,
    pub check_scale: CheckScale,
    /// The file as read, after overrides, for report provenance.
    pub raw: RawConfig,
}

pub const DEFAULT_SEED: u64 = 20_240_601;

impl RawConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::invalid("--config", format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn apply(mut self, o: &Overrides) -> Self {
        if o.seed.is_some() {
            self.seed = o.seed;
        }
        if o.out.is_some() {
            self.out = o.out.clone();
        }
        if let Some(kind) = o.solver {
            self.solver.kind = kind;
        }
        if let Some(eps) = o.eps {
            self.solver.eps = eps;
        }
        if let Some(m) = o.m {
            self.grid.m = m;
        }
        self
    }

    pub fn validate(self) -> Result<ExperimentConfig> {
        let sys = &self.system;
        let text = |n: &Option<Number>| n.as_ref().map(Number::text);
        let catalog = match sys.kind.as_str() {
            "lsv" | "baker" => {
                let alpha = text(&sys.alpha).ok_or_else(|| CliError::invalid("system.alpha", "required for lsv and baker"))?;
                parse_alpha(&alpha).map_err(|e| CliError::invalid("system.alpha", e))?;
                if sys.kind == "lsv" {
                    SystemCatalogEntry::Lsv { alpha }
                } else {
                    SystemCatalogEntry::Baker { alpha }
                }
            }
            "doubling" => SystemCatalogEntry::Doubling { proxy_gamma: text(&sys.proxy_gamma) },
            "flowers" => SystemCatalogEntry::Flowers,
            other => {
                return Err(CliError::invalid(
                    "system.kind",
                    format!("unknown system {other:?}; expected lsv, baker, doubling or flowers"),
                ))
            }
        };
        if sys.alpha.is_some() && !matches!(catalog, SystemCatalogEntry::Lsv { .. } | SystemCatalogEntry::Baker { .. }) {
            return Err(CliError::invalid("system.alpha", format!("not used by {}", catalog.name())));
        }
        if sys.proxy_gamma.is_some() && !matches!(catalog, SystemCatalogEntry::Doubling { .. }) {
            return Err(CliError::invalid("system.proxy_gamma", "only the doubling map takes a proxy gamma"));
        }
        let system_gamma = gamma_for_system(&catalog).map_err(|e| CliError::invalid("system.proxy_gamma", e))?;
        let system = match &catalog {
            SystemCatalogEntry::Lsv { alpha } => Some(DynSystem::lsv(rational_to_f64(&parse_rational(alpha).expect("checked")))),
            SystemCatalogEntry::Baker { alpha } => {
                Some(DynSystem::baker(rational_to_f64(&parse_rational(alpha).expect("checked"))))
            }
            SystemCatalogEntry::Doubling { .. } => Some(Ok(DynSystem::doubling())),
            SystemCatalogEntry::Flowers => None,
        }
        .transpose()
        .map_err(|e| CliError::invalid("system.alpha", e))?;

        let gamma = match &self.rates.gamma {
            Some(g) => g.rational("rates.gamma")?,
            None => system_gamma,
        };
        let make = |r: &Number, path: &str| -> Result<RateParams> {
            RateParams::from_ratios(gamma.clone(), r.rational(path)?).map_err(|e| CliError::invalid(path, e))
        };
        let params = make(&self.rates.r, "rates.r")?;
        let mut r_table = vec![params.clone()];
        for (i, r) in self.rates.table.iter().enumerate() {
            r_table.push(make(r, &format!("rates.table[{i}]"))?);
        }

        let obs = &self.observable;
        let mut observable = Observable::parse(&obs.components).map_err(|e| CliError::invalid("observable.components", e))?;
        if let Some(sys) = &system {
            observable.check_system(sys).map_err(|e| CliError::invalid("observable.components", e))?;
        }
        if let Some(c) = &obs.centering {
            observable = observable.with_centering(c.clone()).map_err(|e| CliError::invalid("observable.centering", e))?;
        }

        let grid = &self.grid;
        if grid.n.is_empty() {
            return Err(CliError::invalid("grid.n", "needs at least one grid size"));
        }
        for (i, &n) in grid.n.iter().enumerate() {
            if n < 4 {
                return Err(CliError::invalid(format!("grid.n[{i}]"), format!("grid sizes must be at least 4, got {n}")));
            }
        }
        if grid.n.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CliError::invalid("grid.n", "grid sizes must be strictly increasing"));
        }
        if grid.m < 2 {
            return Err(CliError::invalid("grid.m", "ensembles need at least 2 paths"));
        }

        let solver = match self.solver.kind {
            SolverKind::Exact => Solver::Exact,
            SolverKind::Sinkhorn => {
                if !(self.solver.eps > 0.0 && self.solver.eps.is_finite()) {
                    return Err(CliError::invalid("solver.eps", format!("must be positive, got {}", self.solver.eps)));
                }
                if self.solver.max_iter == 0 {
                    return Err(CliError::invalid("solver.max_iter", "must be positive"));
                }
                Solver::Sinkhorn { eps_rel: self.solver.eps, max_iter: self.solver.max_iter }
            }
        };

        fn exponent(n: &Number) -> Option<&Number> {
            match n {
                Number::Text(s) if s == "optimal" => None,
                other => Some(other),
            }
        }
        let exponents = match (exponent(&self.blocks.a), exponent(&self.blocks.b)) {
            (None, None) => optimal_exponents(&params).ok(),
            (Some(a), Some(b)) => Some(
                ExponentPair::new(a.rational("blocks.a")?, b.rational("blocks.b")?)
                    .map_err(|e| CliError::invalid("blocks", e))?,
            ),
            _ => return Err(CliError::invalid("blocks", "set both a and b, or neither to \"optimal\"")),
        };
        if let Some(e) = &exponents {
            for (i, &n) in grid.n.iter().enumerate() {
                wiplab_core::blocks::make_scheme(n, e.a_f64(), e.b_f64())
                    .map_err(|err| CliError::invalid(format!("grid.n[{i}]"), err))?;
            }
        }
        if self.blocks.m < 2 {
            return Err(CliError::invalid("blocks.m", "needs at least 2 orbits"));
        }
        if self.blocks.variance_m < 2 {
            return Err(CliError::invalid("blocks.variance_m", "needs at least 2 samples"));
        }
        if self.sigma.n == 0 {
            return Err(CliError::invalid("sigma.n", "must be positive"));
        }
        if self.sigma.m < 2 {
            return Err(CliError::invalid("sigma.m", "needs at least 2 orbits"));
        }
        if self.limits.max_values == 0 {
            return Err(CliError::invalid("limits.max_values", "must be positive"));
        }
        if !(self.limits.check_seconds > 0.0) {
            return Err(CliError::invalid("limits.check_seconds", "must be positive"));
        }

        Ok(ExperimentConfig {
            seed: self.seed.unwrap_or(DEFAULT_SEED),
            out: self.out.clone().unwrap_or_else(|| PathBuf::from("out")),
            catalog,
            system,
            observable,
            centering: obs.centering.clone(),
            burn_in: obs.burn_in,
            params,
            r_table,
            grid: grid.n.clone(),
            m: grid.m,
            bootstrap: grid.bootstrap,
            exponents,
            block_m: self.blocks.m,
            variance_m: self.blocks.variance_m,
            sigma_n: self.sigma.n,
            sigma_m: self.sigma.m,
            solver,
            max_values: self.limits.max_values,
            check_seconds: self.limits.check_seconds,
            check_scale: self.limits.check_scale,
            raw: self,
        })
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str, overrides: &Overrides) -> Result<Self> {
        RawConfig::from_toml(text)?.apply(overrides).validate()
    }

    /// The simulated system, or a validation error naming `system.kind`.
    pub fn simulated(&self) -> Result<DynSystem> {
        self.system.ok_or_else(|| {
            CliError::invalid("system.kind", format!("{} has no simulator; only `rates` accepts it", self.catalog.name()))
        })
    }

    pub fn require_exponents(&self) -> Result<&ExponentPair> {
        self.exponents
            .as_ref()
            .ok_or_else(|| CliError::invalid("blocks", "optimal exponents do not exist at r = 2 gamma"))
    }

    /// Fails with a resource-limit error when the exact solver cannot take
    /// `m` paths.
    pub fn check_solver_limit(&self) -> Result<()> {
        if self.solver == Solver::Exact && self.m > EXACT_SOLVER_LIMIT {
            return Err(CliError::ResourceLimit(format!(
                "grid.m = {} exceeds the exact solver limit {EXACT_SOLVER_LIMIT}; use --solver sinkhorn",
                self.m
            )));
        }
        Ok(())
    }
}
