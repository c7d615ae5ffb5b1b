//! Seeded simulation of the example maps and of the observable catalog.
//!
//! States are points of `[0,1]^2`; one-dimensional systems ignore the
//! second coordinate. Orbits start from a uniform draw followed by a
//! burn-in, which approximates the invariant measure.
//!
//! The doubling map needs care in floating point: every double is dyadic,
//! so a naive orbit of `2x mod 1` reaches 0 within 53 steps. Doubling
//! orbits are therefore generated by shifting an infinite random binary
//! expansion, `x_i = 0.b_i b_{i+1} … b_{i+52}`, which is the exact orbit of
//! a Lebesgue-distributed point truncated to 53 bits at each evaluation.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{indexed_rng, pairwise_mean, Exec};

pub type State = [f64; 2];

pub const DEFAULT_BURN_IN: usize = 1000;
pub const G_INVERSE_ITERATIONS: usize = 50;
/// Default cap on `n·m·d` for materialised ensembles (1 GiB of `f64`).
pub const DEFAULT_ENSEMBLE_BUDGET: usize = 1 << 27;

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 0.5 {
        Ok(())
    } else {
        Err(Error::domain(format!("alpha must lie in (0, 1/2), got {alpha}")))
    }
}

fn check_unit(x: f64, what: &str) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::domain(format!("{what} must lie in [0, 1], got {x}")))
    }
}

/// Left branch `g(x) = x(1 + 2^α x^α)` of the LSV map.
#[inline]
pub fn lsv_g(alpha: f64, x: f64) -> f64 {
    x * (1.0 + (2.0 * x).powf(alpha))
}

#[inline]
fn lsv_unchecked(alpha: f64, x: f64) -> f64 {
    if x < 0.5 {
        lsv_g(alpha, x).min(1.0)
    } else {
        2.0 * x - 1.0
    }
}

pub fn lsv_step(alpha: f64, x: f64) -> Result<f64> {
    check_unit(x, "x")?;
    Ok(lsv_unchecked(alpha, x))
}

#[inline]
fn g_inverse_unchecked(alpha: f64, y: f64) -> f64 {
    let (mut lo, mut hi) = (0.0_f64, 0.5_f64);
    for _ in 0..G_INVERSE_ITERATIONS {
        let mid = 0.5 * (lo + hi);
        if lsv_g(alpha, mid) < y {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Inverse of the left branch on `[0,1)`, by bisection on `[0, 1/2]`.
pub fn g_inverse(alpha: f64, y: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&y) {
        return Err(Error::domain(format!("g_inverse needs y in [0, 1), got {y}")));
    }
    if y == 0.0 {
        return Ok(0.0);
    }
    let x = g_inverse_unchecked(alpha, y);
    if (lsv_g(alpha, x) - y).abs() > 1e-13 {
        return Err(Error::Convergence(format!("g_inverse({alpha}, {y})")));
    }
    Ok(x)
}

#[inline]
fn baker_unchecked(alpha: f64, [x, y]: State) -> State {
    if x < 0.5 {
        let y = if y >= 1.0 { 0.5 } else { g_inverse_unchecked(alpha, y) };
        [lsv_unchecked(alpha, x), y]
    } else {
        [2.0 * x - 1.0, 0.5 * (y + 1.0)]
    }
}

/// Intermittent baker's map: LSV on `x`, `g^{-1}` or `(y+1)/2` on `y`.
pub fn baker_step(alpha: f64, state: State) -> Result<State> {
    check_unit(state[0], "x")?;
    check_unit(state[1], "y")?;
    if state[0] < 0.5 && state[1] < 1.0 {
        Ok([lsv_unchecked(alpha, state[0]), g_inverse(alpha, state[1])?])
    } else {
        Ok(baker_unchecked(alpha, state))
    }
}

/// `2x mod 1`.
#[inline]
pub fn doubling_step(x: f64) -> f64 {
    let y = 2.0 * x;
    if y >= 1.0 {
        y - 1.0
    } else {
        y
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DynSystem {
    Lsv { alpha: f64 },
    Baker { alpha: f64 },
    Doubling,
}

impl DynSystem {
    pub fn lsv(alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(DynSystem::Lsv { alpha })
    }

    pub fn baker(alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(DynSystem::Baker { alpha })
    }

    pub fn doubling() -> Self {
        DynSystem::Doubling
    }

    pub fn state_dim(&self) -> usize {
        match self {
            DynSystem::Baker { .. } => 2,
            _ => 1,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            DynSystem::Lsv { .. } => "lsv",
            DynSystem::Baker { .. } => "baker",
            DynSystem::Doubling => "doubling",
        }
    }

    /// Burn-in used when none is configured. Lebesgue measure is invariant
    /// for the doubling map, so it needs none.
    pub fn default_burn_in(&self) -> usize {
        match self {
            DynSystem::Doubling => 0,
            _ => DEFAULT_BURN_IN,
        }
    }

    /// One application of the map in plain `f64` arithmetic.
    #[inline]
    pub fn step(&self, s: State) -> State {
        match *self {
            DynSystem::Lsv { alpha } => [lsv_unchecked(alpha, s[0]), 0.0],
            DynSystem::Baker { alpha } => baker_unchecked(alpha, s),
            DynSystem::Doubling => [doubling_step(s[0]), 0.0],
        }
    }

    fn uniform_state(&self, rng: &mut ChaCha8Rng) -> State {
        match self {
            DynSystem::Baker { .. } => [rng.random(), rng.random()],
            _ => [rng.random(), 0.0],
        }
    }
}

impl fmt::Display for DynSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DynSystem::Lsv { alpha } => write!(f, "lsv(alpha={alpha})"),
            DynSystem::Baker { alpha } => write!(f, "baker(alpha={alpha})"),
            DynSystem::Doubling => write!(f, "doubling"),
        }
    }
}

/// Walks one orbit from an approximate invariant-measure draw.
pub struct Walker {
    inner: WalkerKind,
}

enum WalkerKind {
    Map { system: DynSystem, state: State },
    Bits { window: u64, pool: u64, left: u32, rng: ChaCha8Rng },
}

impl Walker {
    /// Uniform draw followed by `burn_in` steps.
    pub fn start(system: DynSystem, mut rng: ChaCha8Rng, burn_in: usize) -> Self {
        let inner = match system {
            DynSystem::Doubling => {
                let window = rng.next_u64();
                let mut w = WalkerKind::Bits { window, pool: 0, left: 0, rng };
                for _ in 0..burn_in {
                    w.advance();
                }
                w
            }
            _ => {
                let mut state = system.uniform_state(&mut rng);
                for _ in 0..burn_in {
                    state = system.step(state);
                }
                WalkerKind::Map { system, state }
            }
        };
        Walker { inner }
    }

    #[inline]
    pub fn state(&self) -> State {
        match &self.inner {
            WalkerKind::Map { state, .. } => *state,
            WalkerKind::Bits { window, .. } => [(window >> 11) as f64 * (1.0 / (1u64 << 53) as f64), 0.0],
        }
    }

    #[inline]
    pub fn advance(&mut self) {
        self.inner.advance();
    }
}

impl WalkerKind {
    #[inline]
    fn advance(&mut self) {
        match self {
            WalkerKind::Map { system, state } => *state = system.step(*state),
            WalkerKind::Bits { window, pool, left, rng } => {
                if *left == 0 {
                    *pool = rng.next_u64();
                    *left = 64;
                }
                *window = (*window << 1) | (*pool >> 63);
                *pool <<= 1;
                *left -= 1;
            }
        }
    }
}

/// An approximate draw from the invariant measure: uniform initial state
/// plus `burn_in` iterations. Deterministic in `seed`.
pub fn sample_invariant(system: DynSystem, seed: u64, burn_in: usize) -> State {
    Walker::start(system, indexed_rng(seed, 0), burn_in).state()
}

/// A deterministic orbit computed with [`DynSystem::step`].
#[derive(Clone, Debug, PartialEq)]
pub struct Orbit {
    pub system: DynSystem,
    pub states: Vec<State>,
}

impl Orbit {
    /// `n` states starting at `initial`; `states[i+1] = step(states[i])`.
    pub fn from_state(system: DynSystem, initial: State, n: usize) -> Self {
        let mut states = Vec::with_capacity(n);
        let mut s = initial;
        for _ in 0..n {
            states.push(s);
            s = system.step(s);
        }
        Orbit { system, states }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Observable values along the orbit, row-major `n × d`.
    pub fn observe(&self, obs: &Observable) -> Vec<f64> {
        let d = obs.dim();
        let mut out = vec![0.0; self.states.len() * d];
        for (s, row) in self.states.iter().zip(out.chunks_exact_mut(d)) {
            obs.eval_into(s, row);
        }
        out
    }
}

/// One scalar function in the observable catalog. Trigonometric entries
/// are `cos(2πk·u)` / `sin(2πk·u)` in a state coordinate `u`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Component {
    Cos { coord: usize, freq: u32 },
    Sin { coord: usize, freq: u32 },
    Coord(usize),
    Const(f64),
    Product(Box<Component>, Box<Component>),
}

impl Component {
    #[inline]
    pub fn eval(&self, s: &State) -> f64 {
        match self {
            Component::Cos { coord, freq } => (TAU * f64::from(*freq) * s[*coord]).cos(),
            Component::Sin { coord, freq } => (TAU * f64::from(*freq) * s[*coord]).sin(),
            Component::Coord(c) => s[*c],
            Component::Const(c) => *c,
            Component::Product(a, b) => a.eval(s) * b.eval(s),
        }
    }

    pub fn sup_norm(&self) -> f64 {
        match self {
            Component::Product(a, b) => a.sup_norm() * b.sup_norm(),
            Component::Const(c) => c.abs(),
            _ => 1.0,
        }
    }

    /// Lipschitz constant with respect to the max-coordinate metric.
    pub fn lipschitz(&self) -> f64 {
        match self {
            Component::Cos { freq, .. } | Component::Sin { freq, .. } => TAU * f64::from(*freq),
            Component::Coord(_) => 1.0,
            Component::Const(_) => 0.0,
            Component::Product(a, b) => a.sup_norm() * b.lipschitz() + b.sup_norm() * a.lipschitz(),
        }
    }

    fn max_coord(&self) -> usize {
        match self {
            Component::Cos { coord, .. } | Component::Sin { coord, .. } | Component::Coord(coord) => *coord,
            Component::Const(_) => 0,
            Component::Product(a, b) => a.max_coord().max(b.max_coord()),
        }
    }

    /// The mean under Lebesgue measure on `[0,1]`, when `x` is the only
    /// coordinate involved and the integral is elementary.
    fn lebesgue_mean(&self) -> Option<f64> {
        match self {
            Component::Cos { coord: 0, freq } | Component::Sin { coord: 0, freq } if *freq > 0 => Some(0.0),
            Component::Coord(0) => Some(0.5),
            Component::Const(c) => Some(*c),
            Component::Product(a, b) => match (a.as_ref(), b.as_ref()) {
                (Component::Cos { coord: 0, freq: j }, Component::Cos { coord: 0, freq: k })
                | (Component::Sin { coord: 0, freq: j }, Component::Sin { coord: 0, freq: k })
                    if *j > 0 && *k > 0 =>
                {
                    Some(if j == k { 0.5 } else { 0.0 })
                }
                (Component::Cos { coord: 0, freq: j }, Component::Sin { coord: 0, freq: k })
                | (Component::Sin { coord: 0, freq: k }, Component::Cos { coord: 0, freq: j })
                    if *j > 0 && *k > 0 =>
                {
                    Some(0.0)
                }
                _ => None,
            },
            _ => None,
        }
    }
}

fn coord_name(c: usize) -> &'static str {
    if c == 0 {
        "x"
    } else {
        "y"
    }
}

impl fmt::Display for Component {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let trig = |f: &mut fmt::Formatter<'_>, name: &str, coord: usize, freq: u32| {
            if freq == 1 {
                write!(f, "{name}({})", coord_name(coord))
            } else {
                write!(f, "{name}({freq}{})", coord_name(coord))
            }
        };
        match self {
            Component::Cos { coord, freq } => trig(f, "cos", *coord, *freq),
            Component::Sin { coord, freq } => trig(f, "sin", *coord, *freq),
            Component::Coord(c) => f.write_str(coord_name(*c)),
            Component::Const(c) => write!(f, "{c}"),
            Component::Product(a, b) => write!(f, "{a}*{b}"),
        }
    }
}

impl FromStr for Component {
    type Err = Error;

    /// Parses `x`, `y`, `cos(x)`, `sin(3y)`, constants and `*`-products.
    fn from_str(s: &str) -> Result<Self> {
        let s: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        let bad = || Error::Format(format!("unknown observable component {s:?}"));
        let mut factors = s.split('*').map(|tok| -> Result<Component> {
            let coord = |c: &str| match c {
                "x" => Ok(0),
                "y" => Ok(1),
                _ => Err(bad()),
            };
            if let Some(arg) = tok.strip_prefix("cos(").or_else(|| tok.strip_prefix("sin(")) {
                let arg = arg.strip_suffix(')').ok_or_else(bad)?;
                let split = arg.len().checked_sub(1).ok_or_else(bad)?;
                let (k, c) = arg.split_at(split);
                let freq = if k.is_empty() { 1 } else { k.parse().map_err(|_| bad())? };
                let coord = coord(c)?;
                return Ok(if tok.starts_with("cos") {
                    Component::Cos { coord, freq }
                } else {
                    Component::Sin { coord, freq }
                });
            }
            if let Ok(c) = tok.parse::<f64>() {
                if c.is_finite() {
                    return Ok(Component::Const(c));
                }
            }
            Ok(Component::Coord(coord(tok)?))
        });
        let first = factors.next().ok_or_else(bad)??;
        factors.try_fold(first, |acc, f| Ok(Component::Product(Box::new(acc), Box::new(f?))))
    }
}

/// An `R^d`-valued Lipschitz observable with stored centering constants.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observable {
    components: Vec<Component>,
    centering: Vec<f64>,
    holder_exponent: f64,
}

impl Observable {
    /// An uncentered observable.
    pub fn new(components: Vec<Component>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::Empty("observable components"));
        }
        let d = components.len();
        Ok(Self { components, centering: vec![0.0; d], holder_exponent: 1.0 })
    }

    pub fn parse<S: AsRef<str>>(ids: &[S]) -> Result<Self> {
        Self::new(ids.iter().map(|s| s.as_ref().parse()).collect::<Result<_>>()?)
    }

    pub fn with_centering(mut self, centering: Vec<f64>) -> Result<Self> {
        if centering.len() != self.dim() {
            return Err(Error::SizeMismatch { left: centering.len(), right: self.dim() });
        }
        self.centering = centering;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn centering(&self) -> &[f64] {
        &self.centering
    }

    pub fn holder_exponent(&self) -> f64 {
        self.holder_exponent
    }

    /// Lipschitz constant of `v` for the L1 norm on `R^d`.
    pub fn lipschitz(&self) -> f64 {
        self.components.iter().map(Component::lipschitz).sum()
    }

    /// Checks that every component refers to a coordinate of `system`.
    pub fn check_system(&self, system: &DynSystem) -> Result<()> {
        for c in &self.components {
            if c.max_coord() >= system.state_dim() {
                return Err(Error::domain(format!(
                    "observable component {c} uses a coordinate {system} does not have"
                )));
            }
        }
        Ok(())
    }

    /// Writes the centered value `v(s) - c` into `out`.
    #[inline]
    pub fn eval_into(&self, s: &State, out: &mut [f64]) {
        for ((o, comp), c) in out.iter_mut().zip(&self.components).zip(&self.centering) {
            *o = comp.eval(s) - c;
        }
    }

    pub fn eval(&self, s: &State) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.eval_into(s, &mut out);
        out
    }

    /// Means known in closed form: all components elementary under the
    /// Lebesgue-invariant doubling map.
    pub fn analytic_mean(&self, system: &DynSystem) -> Option<Vec<f64>> {
        match system {
            DynSystem::Doubling => self.components.iter().map(Component::lebesgue_mean).collect(),
            _ => None,
        }
    }

    pub fn display_ids(&self) -> Vec<String> {
        self.components.iter().map(ToString::to_string).collect()
    }
}

/// Orbit count and length for empirical centering.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CenteringBudget {
    pub orbits: usize,
    pub length: usize,
}

impl Default for CenteringBudget {
    /// `10^3` orbits of `10^4` post-burn-in points.
    fn default() -> Self {
        Self { orbits: 1000, length: 10_000 }
    }
}

/// Simulates centered observable values along invariant-measure orbits.
///
/// Orbit `i` under seed `s` always uses the random stream `(s, i)`, so
/// results are bitwise reproducible whatever the execution policy.
#[derive(Clone, Debug)]
pub struct Sampler {
    system: DynSystem,
    observable: Observable,
    burn_in: usize,
    exec: Exec,
    budget: usize,
}

impl Sampler {
    pub fn new(system: DynSystem, observable: Observable) -> Result<Self> {
        observable.check_system(&system)?;
        Ok(Self {
            burn_in: system.default_burn_in(),
            system,
            observable,
            exec: Exec::default(),
            budget: DEFAULT_ENSEMBLE_BUDGET,
        })
    }

    /// Replaces the observable's centering by the analytic mean when known,
    /// otherwise by an ergodic average over `budget`.
    pub fn centered(mut self, budget: CenteringBudget, seed: u64) -> Result<Self> {
        let mean = match self.observable.analytic_mean(&self.system) {
            Some(m) => m,
            None => {
                let raw = Sampler { observable: self.observable.clone().with_centering(vec![0.0; self.dim()])?, ..self.clone() };
                raw.ergodic_mean(budget, seed)?
            }
        };
        self.observable = self.observable.with_centering(mean)?;
        Ok(self)
    }

    pub fn burn_in(mut self, burn_in: usize) -> Self {
        self.burn_in = burn_in;
        self
    }

    pub fn exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }

    pub fn budget(mut self, values: usize) -> Self {
        self.budget = values;
        self
    }

    pub fn system(&self) -> &DynSystem {
        &self.system
    }

    pub fn observable(&self) -> &Observable {
        &self.observable
    }

    pub fn burn_in_steps(&self) -> usize {
        self.burn_in
    }

    pub fn execution(&self) -> Exec {
        self.exec
    }

    pub fn dim(&self) -> usize {
        self.observable.dim()
    }

    pub fn walker(&self, seed: u64, index: u64) -> Walker {
        Walker::start(self.system, indexed_rng(seed, index), self.burn_in)
    }

    /// Fills `out` (resized to `n·d`) with the centered observable along
    /// orbit `index`.
    pub fn orbit_values_into(&self, seed: u64, index: u64, n: usize, out: &mut Vec<f64>) {
        let d = self.dim();
        out.clear();
        out.resize(n * d, 0.0);
        let mut w = self.walker(seed, index);
        for row in out.chunks_exact_mut(d) {
            self.observable.eval_into(&w.state(), row);
            w.advance();
        }
    }

    pub fn orbit_values(&self, seed: u64, index: u64, n: usize) -> Vec<f64> {
        let mut out = Vec::new();
        self.orbit_values_into(seed, index, n, &mut out);
        out
    }

    /// Applies `f` to each of `m` independent orbits of length `n` without
    /// materialising the ensemble. Results are in orbit order.
    pub fn map_orbits<T, F>(&self, n: usize, m: usize, seed: u64, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(&[f64]) -> T + Sync + Send,
    {
        if n == 0 || m == 0 {
            return Err(Error::domain("orbit length and count must be positive"));
        }
        Ok(self.exec.map_indexed_with(m, Vec::new, |buf, i| {
            self.orbit_values_into(seed, i as u64, n, buf);
            f(buf)
        }))
    }

    /// `m` independent orbits of length `n`, mapped through the observable.
    pub fn ensemble(&self, n: usize, m: usize, seed: u64) -> Result<Ensemble> {
        let d = self.dim();
        let total = n.checked_mul(m).and_then(|x| x.checked_mul(d));
        match total {
            Some(t) if t <= self.budget => {}
            _ => {
                return Err(Error::ResourceLimit(format!(
                    "ensemble n*m*d = {n}*{m}*{d} exceeds budget {}",
                    self.budget
                )))
            }
        }
        let rows = self.map_orbits(n, m, seed, <[f64]>::to_vec)?;
        Ok(Ensemble { n, m, d, data: rows.concat() })
    }

    /// Time average of the observable over `budget.orbits` orbits.
    pub fn ergodic_mean(&self, budget: CenteringBudget, seed: u64) -> Result<Vec<f64>> {
        let d = self.dim();
        let per_orbit = self.map_orbits(budget.length, budget.orbits, seed, |v| {
            (0..d)
                .map(|c| v.iter().skip(c).step_by(d).sum::<f64>() / budget.length as f64)
                .collect::<Vec<_>>()
        })?;
        Ok((0..d)
            .map(|c| pairwise_mean(&per_orbit.iter().map(|row| row[c]).collect::<Vec<_>>()))
            .collect())
    }
}

/// `m` orbits of `n` observable values in `R^d`, row-major
/// `(orbit, time, coordinate)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Ensemble {
    pub n: usize,
    pub m: usize,
    pub d: usize,
    pub data: Vec<f64>,
}

impl Ensemble {
    pub fn new(n: usize, m: usize, d: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * m * d {
            return Err(Error::SizeMismatch { left: data.len(), right: n * m * d });
        }
        Ok(Self { n, m, d, data })
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.n * self.d;
        &self.data[i * w..(i + 1) * w]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact((self.n * self.d).max(1)).take(self.m)
    }

    pub fn value(&self, orbit: usize, time: usize) -> &[f64] {
        let start = (orbit * self.n + time) * self.d;
        &self.data[start..start + self.d]
    }
}
