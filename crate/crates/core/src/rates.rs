//! Closed-form convergence exponents for the weak invariance principle
//! under a functional correlation bound with polynomial rate `n^{-γ}`.
//!
//! Everything here is evaluated in exact rational arithmetic. Binary
//! doubles convert exactly, so `f64` inputs lose nothing; use
//! [`crate::numeric::parse_rational`] to enter decimal or fractional
//! values such as `1/3` without binary rounding.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{rational_from_f64, rational_to_f64};

fn int(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

/// Decay exponent `γ > 1` together with a Wasserstein order `r ∈ [1, 2γ]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RateParams {
    gamma: BigRational,
    r: BigRational,
}

impl RateParams {
    pub fn from_ratios(gamma: BigRational, r: BigRational) -> Result<Self> {
        if gamma <= BigRational::one() {
            return Err(Error::domain(format!(
                "gamma must exceed 1, got {}",
                rational_to_f64(&gamma)
            )));
        }
        if r < BigRational::one() || r > int(2) * &gamma {
            return Err(Error::domain(format!(
                "r must lie in [1, 2*gamma] = [1, {}], got {}",
                rational_to_f64(&(int(2) * &gamma)),
                rational_to_f64(&r)
            )));
        }
        Ok(Self { gamma, r })
    }

    /// Builds parameters from the exact values of two doubles.
    pub fn new(gamma: f64, r: f64) -> Result<Self> {
        Self::from_ratios(rational_from_f64(gamma)?, rational_from_f64(r)?)
    }

    pub fn gamma(&self) -> &BigRational {
        &self.gamma
    }

    pub fn r(&self) -> &BigRational {
        &self.r
    }

    pub fn gamma_f64(&self) -> f64 {
        rational_to_f64(&self.gamma)
    }

    pub fn r_f64(&self) -> f64 {
        rational_to_f64(&self.r)
    }

    /// `r = 2γ`: the rate vanishes and the block exponents are unconstrained.
    pub fn is_degenerate(&self) -> bool {
        self.r == int(2) * &self.gamma
    }

    /// `8γ³ − r(2γ² + 3γ − 1)`, the common denominator of κ and `a*`.
    fn denominator(&self) -> BigRational {
        let g = &self.gamma;
        let g2 = g * g;
        int(8) * &g2 * g - &self.r * (int(2) * &g2 + int(3) * g - int(1))
    }
}

impl fmt::Display for RateParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(gamma={}, r={})", self.gamma, self.r)
    }
}

/// Big-block exponent `a` and small-block exponent `b`, `0 < b < a < 1`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExponentPair {
    a: BigRational,
    b: BigRational,
}

impl ExponentPair {
    pub fn new(a: BigRational, b: BigRational) -> Result<Self> {
        if !(b.is_positive() && b < a && a < BigRational::one()) {
            return Err(Error::domain(format!(
                "block exponents need 0 < b < a < 1, got a={}, b={}",
                rational_to_f64(&a),
                rational_to_f64(&b)
            )));
        }
        Ok(Self { a, b })
    }

    pub fn from_f64(a: f64, b: f64) -> Result<Self> {
        Self::new(rational_from_f64(a)?, rational_from_f64(b)?)
    }

    pub fn a(&self) -> &BigRational {
        &self.a
    }

    pub fn b(&self) -> &BigRational {
        &self.b
    }

    pub fn a_f64(&self) -> f64 {
        rational_to_f64(&self.a)
    }

    pub fn b_f64(&self) -> f64 {
        rational_to_f64(&self.b)
    }
}

/// The rate exponent
/// `κ(γ,r) = (2γ−r)(2γ−1)(γ−1) / (2(8γ³ − r(2γ² + 3γ − 1)))`.
///
/// Zero when `r = 2γ`, strictly positive otherwise.
pub fn kappa(params: &RateParams) -> BigRational {
    let g = &params.gamma;
    let numer = (int(2) * g - &params.r) * (int(2) * g - int(1)) * (g - int(1));
    numer / (int(2) * params.denominator())
}

pub fn kappa_f64(params: &RateParams) -> f64 {
    rational_to_f64(&kappa(params))
}

/// The Wasserstein-1 exponent `(γ−1)(2γ−1) / (2(4γ² + γ − 1))`.
///
/// Coincides with `kappa(γ, 1)`: at `r = 1` the denominator of κ factors
/// as `(2γ−1)(4γ²+γ−1)`.
pub fn kappa_w1(gamma: &BigRational) -> Result<BigRational> {
    if *gamma <= BigRational::one() {
        return Err(Error::domain("gamma must exceed 1"));
    }
    let g = gamma;
    let numer = (g - int(1)) * (int(2) * g - int(1));
    Ok(numer / (int(2) * (int(4) * g * g + g - int(1))))
}

/// `b` making the blocking error equal the interpolated dependence error.
pub fn b_matching_dependence_term(params: &RateParams, a: &BigRational) -> BigRational {
    let g = &params.gamma;
    let r = &params.r;
    let slope = r * (int(2) * g + int(1)) - int(4) * g;
    (a * slope + int(6) * g - int(3) * r) / (int(4) * g * g - r)
}

/// `b` making the blocking error equal the small-block error.
pub fn b_matching_small_block_term(params: &RateParams, a: &BigRational) -> BigRational {
    let g = &params.gamma;
    (a * (int(2) * g - int(1)) - g + int(1)) / g
}

/// The block exponents that balance the blocking, dependence and
/// small-block error terms, giving exactly [`kappa`].
pub fn optimal_exponents(params: &RateParams) -> Result<ExponentPair> {
    if params.is_degenerate() {
        return Err(Error::domain(
            "r = 2*gamma: kappa vanishes and the block exponents are unconstrained",
        ));
    }
    let g = &params.gamma;
    let r = &params.r;
    let a = (int(4) * g * g * g + int(2) * g * g - int(4) * r * g + r) / params.denominator();
    let b = b_matching_small_block_term(params, &a);
    ExponentPair::new(a, b)
}

/// The four competing exponents in the block decomposition bound.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExponentTerms {
    /// `(1−a)(γ−1)/(2γ)`: replacing `W_n` by big plus small blocks.
    pub blocking: BigRational,
    /// `(2γ−r)(a+bγ−3/2) / (r(2γ−1))`: dependence between big blocks,
    /// interpolated from `W_1` to `W_r`.
    pub dependence: BigRational,
    /// `(a−b)/2`: dropping the small blocks.
    pub small_blocks: BigRational,
    /// `a(γ−1)/2`: covariance error of the independent-block surrogate.
    pub covariance: BigRational,
}

impl ExponentTerms {
    pub fn min(&self) -> &BigRational {
        [&self.dependence, &self.small_blocks, &self.covariance]
            .into_iter()
            .fold(&self.blocking, |m, x| if x < m { x } else { m })
    }

    pub fn as_array(&self) -> [&BigRational; 4] {
        [&self.blocking, &self.dependence, &self.small_blocks, &self.covariance]
    }
}

pub fn exponent_terms(params: &RateParams, exps: &ExponentPair) -> ExponentTerms {
    let g = &params.gamma;
    let r = &params.r;
    let (a, b) = (&exps.a, &exps.b);
    let half = BigRational::new(BigInt::from(1), BigInt::from(2));
    let three_halves = BigRational::new(BigInt::from(3), BigInt::from(2));
    ExponentTerms {
        blocking: (int(1) - a) * (g - int(1)) / (int(2) * g),
        dependence: (int(2) * g - r) * (a + b * g - three_halves) / (r * (int(2) * g - int(1))),
        small_blocks: (a - b) * &half,
        covariance: a * (g - int(1)) * half,
    }
}

/// The rate exponent achieved by block exponents `(a, b)`: the minimum of
/// the four competing terms.
pub fn kappa_from_exponents(params: &RateParams, exps: &ExponentPair) -> BigRational {
    exponent_terms(params, exps).min().clone()
}

/// Prokhorov-metric exponent `κ(γ,r)·r/(r+1)`.
pub fn prokhorov_exponent(params: &RateParams) -> BigRational {
    kappa(params) * &params.r / (&params.r + int(1))
}

pub const DEFAULT_DOUBLING_PROXY_GAMMA: i64 = 50;

/// Systems with a known correlation decay exponent.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SystemCatalogEntry {
    /// Intermittent interval map with parameter `α ∈ (0, 1/2)`.
    Lsv { alpha: String },
    /// Intermittent baker's map with parameter `α ∈ (0, 1/2)`.
    Baker { alpha: String },
    /// Bunimovich flowers: Young tower tails `O(n^{-3})`.
    Flowers,
    /// Uniformly expanding; exponential mixing stands in as a large `γ`.
    Doubling { proxy_gamma: Option<String> },
}

impl SystemCatalogEntry {
    pub fn name(&self) -> &'static str {
        match self {
            SystemCatalogEntry::Lsv { .. } => "lsv",
            SystemCatalogEntry::Baker { .. } => "baker",
            SystemCatalogEntry::Flowers => "flowers",
            SystemCatalogEntry::Doubling { .. } => "doubling",
        }
    }

    pub fn source_note(&self) -> &'static str {
        match self {
            SystemCatalogEntry::Lsv { .. } | SystemCatalogEntry::Baker { .. } => {
                "gamma = 1/alpha - 1 (Young tower tails O(n^{-1/alpha}))"
            }
            SystemCatalogEntry::Flowers => "gamma = 2 (Young tower tails O(n^{-3}))",
            SystemCatalogEntry::Doubling { .. } => "exponential mixing baseline",
        }
    }
}

/// Parses and validates an intermittency parameter `α ∈ (0, 1/2)`.
pub fn parse_alpha(alpha: &str) -> Result<BigRational> {
    let a = crate::numeric::parse_rational(alpha)?;
    if !a.is_positive() || a >= BigRational::new(1.into(), 2.into()) {
        return Err(Error::domain(format!("alpha must lie in (0, 1/2), got {alpha}")));
    }
    Ok(a)
}

/// The decay exponent `γ` of a catalog system.
pub fn gamma_for_system(entry: &SystemCatalogEntry) -> Result<BigRational> {
    match entry {
        SystemCatalogEntry::Lsv { alpha } | SystemCatalogEntry::Baker { alpha } => {
            let a = parse_alpha(alpha)?;
            Ok(a.recip() - int(1))
        }
        SystemCatalogEntry::Flowers => Ok(int(2)),
        SystemCatalogEntry::Doubling { proxy_gamma } => {
            let g = match proxy_gamma {
                Some(s) => crate::numeric::parse_rational(s)?,
                None => int(DEFAULT_DOUBLING_PROXY_GAMMA),
            };
            if g <= BigRational::one() {
                return Err(Error::domain("proxy gamma must exceed 1"));
            }
            Ok(g)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::Zero;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    fn params(g: BigRational, r: BigRational) -> RateParams {
        RateParams::from_ratios(g, r).unwrap()
    }

    #[test]
    fn kappa_flowers_is_three_over_thirty_four() {
        assert_eq!(kappa(&params(int(2), int(1))), q(3, 34));
    }

    #[test]
    fn kappa_gamma_three() {
        assert_eq!(kappa(&params(int(3), int(1))), q(5, 38));
    }

    #[test]
    fn kappa_vanishes_at_r_equals_two_gamma() {
        let p = params(q(7, 2), int(7));
        assert!(p.is_degenerate());
        assert!(kappa(&p).is_zero());
        assert!(prokhorov_exponent(&p).is_zero());
        assert!(optimal_exponents(&p).is_err());
    }

    #[test]
    fn kappa_large_gamma_near_quarter() {
        let k = kappa_f64(&RateParams::new(1e6, 2.0).unwrap());
        assert!((k - 0.25).abs() < 1e-3, "{k}");
    }

    #[test]
    fn domain_errors() {
        assert!(RateParams::new(1.0, 1.0).is_err());
        assert!(RateParams::new(0.5, 1.0).is_err());
        assert!(RateParams::new(2.0, 0.5).is_err());
        assert!(RateParams::new(2.0, 4.5).is_err());
        assert!(RateParams::new(2.0, 4.0).is_ok());
        assert!(kappa_w1(&int(1)).is_err());
    }

    #[test]
    fn kappa_w1_values() {
        assert_eq!(kappa_w1(&int(2)).unwrap(), q(3, 34));
        assert_eq!(kappa_w1(&int(5)).unwrap(), q(9, 52));
        assert_eq!(kappa_w1(&int(5)).unwrap(), kappa(&params(int(5), int(1))));
        let near_one = kappa_w1(&q(1_000_001, 1_000_000)).unwrap();
        assert!(rational_to_f64(&near_one) < 1e-6);
    }

    #[test]
    fn optimal_exponents_flowers() {
        let p = params(int(2), int(1));
        let e = optimal_exponents(&p).unwrap();
        assert_eq!(e.a, q(11, 17));
        assert_eq!(e.b, q(8, 17));
        assert_eq!(b_matching_dependence_term(&p, &e.a), e.b);
        let t = exponent_terms(&p, &e);
        assert_eq!(t.blocking, q(3, 34));
        assert_eq!(t.dependence, q(3, 34));
        assert_eq!(t.small_blocks, q(3, 34));
        assert_eq!(t.covariance, q(11, 34));
        assert_eq!(kappa_from_exponents(&p, &e), q(3, 34));
    }

    #[test]
    fn suboptimal_exponents_are_limited_by_blocking_term() {
        let p = params(int(2), int(1));
        let e = ExponentPair::from_f64(0.9, 0.1).unwrap();
        let t = exponent_terms(&p, &e);
        assert!((rational_to_f64(&t.blocking) - 0.025).abs() < 1e-15);
        assert!(kappa_from_exponents(&p, &e) <= t.blocking);
    }

    #[test]
    fn equal_exponents_give_zero_small_block_term() {
        let p = params(int(2), int(1));
        let e = ExponentPair { a: q(1, 2), b: q(1, 2) };
        assert!(exponent_terms(&p, &e).small_blocks.is_zero());
        assert!(!kappa_from_exponents(&p, &e).is_positive());
        assert!(ExponentPair::new(q(1, 2), q(1, 2)).is_err());
    }

    #[test]
    fn prokhorov_values() {
        assert_eq!(prokhorov_exponent(&params(int(2), int(1))), q(3, 68));
        assert_eq!(prokhorov_exponent(&params(int(3), int(1))), q(5, 76));
    }

    #[test]
    fn catalog_gammas() {
        let lsv = SystemCatalogEntry::Lsv { alpha: "1/3".into() };
        assert_eq!(gamma_for_system(&lsv).unwrap(), int(2));
        let lsv4 = SystemCatalogEntry::Lsv { alpha: "0.25".into() };
        assert_eq!(gamma_for_system(&lsv4).unwrap(), int(3));
        assert_eq!(gamma_for_system(&SystemCatalogEntry::Flowers).unwrap(), int(2));
        let dbl = SystemCatalogEntry::Doubling { proxy_gamma: None };
        assert_eq!(gamma_for_system(&dbl).unwrap(), int(50));
        assert_eq!(dbl.source_note(), "exponential mixing baseline");
        for bad in ["0", "1/2", "0.7", "-0.1"] {
            let e = SystemCatalogEntry::Baker { alpha: bad.into() };
            assert!(gamma_for_system(&e).is_err(), "{bad}");
        }
    }
}
