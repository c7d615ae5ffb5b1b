//! 1-Lipschitz functionals on path space (sup norm, L1 on `R^d`). Any of
//! them gives the lower bound `|E_A f − E_B f| ≤ W_1(A, B)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::paths::{PathEnsemble, StepPath};

/// Lipschitz maps `R → R`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum ScalarMap {
    Identity,
    Abs,
    Clip { lo: f64, hi: f64 },
    Scale(f64),
    /// `max(x, 0)`.
    PositivePart,
}

impl ScalarMap {
    pub fn lipschitz(&self) -> f64 {
        match self {
            ScalarMap::Scale(c) => c.abs(),
            _ => 1.0,
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            ScalarMap::Clip { lo, hi } if !(lo <= hi) => Err(Error::domain(format!("clip bounds {lo} > {hi}"))),
            ScalarMap::Scale(c) if !c.is_finite() => Err(Error::domain("non-finite scale")),
            _ => Ok(()),
        }
    }

    #[inline]
    pub fn apply(&self, x: f64) -> f64 {
        match self {
            ScalarMap::Identity => x,
            ScalarMap::Abs => x.abs(),
            ScalarMap::Clip { lo, hi } => x.clamp(*lo, *hi),
            ScalarMap::Scale(c) => c * x,
            ScalarMap::PositivePart => x.max(0.0),
        }
    }
}

/// Catalog of path functionals with known Lipschitz constants.
#[derive(Clone, Debug, PartialEq)]
pub enum PathFunctional {
    Constant(f64),
    /// `φ(x_c(t))`.
    Eval { t: f64, coord: usize, map: ScalarMap },
    /// `φ(Σ_c w_c x_c(t))` with `max |w_c| ≤ 1`.
    EvalLinear { t: f64, weights: Vec<f64>, map: ScalarMap },
    /// `φ(sup_t |x(t)|)`.
    SupNorm(ScalarMap),
    /// `sup_t x_c(t)`.
    SupCoord(usize),
    /// `inf_t x_c(t)`.
    InfCoord(usize),
    /// `‖x − y‖_∞` for a fixed path `y`.
    DistanceTo(StepPath),
}

impl PathFunctional {
    pub fn lipschitz(&self) -> f64 {
        match self {
            PathFunctional::Constant(_) => 0.0,
            PathFunctional::Eval { map, .. } | PathFunctional::SupNorm(map) => map.lipschitz(),
            PathFunctional::EvalLinear { weights, map, .. } => {
                weights.iter().fold(0.0_f64, |m, w| m.max(w.abs())) * map.lipschitz()
            }
            PathFunctional::SupCoord(_) | PathFunctional::InfCoord(_) | PathFunctional::DistanceTo(_) => 1.0,
        }
    }

    /// Checks the functional belongs to the catalog with `Lip ≤ 1` and fits
    /// paths with `n` jumps in `R^d`.
    pub fn validate(&self, n: usize, d: usize) -> Result<()> {
        let lip = self.lipschitz();
        if !(lip <= 1.0) {
            return Err(Error::NotLipschitz(lip));
        }
        let bad_t = |t: &f64| !(0.0..=1.0).contains(t);
        let coord_err = |c: usize| Err(Error::domain(format!("coordinate {c} out of range for d = {d}")));
        match self {
            PathFunctional::Constant(c) if !c.is_finite() => Err(Error::domain("non-finite constant")),
            PathFunctional::Eval { t, .. } | PathFunctional::EvalLinear { t, .. } if bad_t(t) => {
                Err(Error::domain(format!("evaluation time {t} outside [0, 1]")))
            }
            PathFunctional::Eval { coord, map, .. } => {
                if *coord >= d {
                    return coord_err(*coord);
                }
                map.validate()
            }
            PathFunctional::EvalLinear { weights, map, .. } => {
                if weights.len() != d {
                    return Err(Error::SizeMismatch { left: weights.len(), right: d });
                }
                map.validate()
            }
            PathFunctional::SupNorm(map) => map.validate(),
            PathFunctional::SupCoord(c) | PathFunctional::InfCoord(c) if *c >= d => coord_err(*c),
            PathFunctional::DistanceTo(y) if y.n() != n || y.d() != d => Err(Error::GridMismatch {
                n_left: n,
                d_left: d,
                n_right: y.n(),
                d_right: y.d(),
            }),
            _ => Ok(()),
        }
    }

    pub fn eval(&self, x: &StepPath) -> f64 {
        let d = x.d();
        match self {
            PathFunctional::Constant(c) => *c,
            PathFunctional::Eval { t, coord, map } => map.apply(x.eval(*t)[*coord]),
            PathFunctional::EvalLinear { t, weights, map } => {
                map.apply(x.eval(*t).iter().zip(weights).map(|(a, w)| a * w).sum())
            }
            PathFunctional::SupNorm(map) => map.apply(x.sup_norm()),
            PathFunctional::SupCoord(c) => (0..=x.n()).map(|j| x.value(j)[*c]).fold(f64::NEG_INFINITY, f64::max),
            PathFunctional::InfCoord(c) => (0..=x.n()).map(|j| x.value(j)[*c]).fold(f64::INFINITY, f64::min),
            PathFunctional::DistanceTo(y) => {
                debug_assert_eq!(y.d(), d);
                crate::paths::sup_distance_unchecked(x, y)
            }
        }
    }
}

/// The standard catalog for paths shaped like `reference`: evaluations at
/// a few times under each scalar map, averages over coordinates, sup and
/// inf functionals, and distance to `reference`.
pub fn lipschitz_catalog(reference: &StepPath) -> Vec<PathFunctional> {
    let d = reference.d();
    let maps = [
        ScalarMap::Identity,
        ScalarMap::Abs,
        ScalarMap::PositivePart,
        ScalarMap::Clip { lo: -0.5, hi: 0.5 },
        ScalarMap::Scale(-1.0),
    ];
    let mut out = vec![PathFunctional::Constant(1.0)];
    for t in [0.25, 0.5, 1.0] {
        for coord in 0..d {
            out.extend(maps.iter().map(|&map| PathFunctional::Eval { t, coord, map }));
        }
        let weights: Vec<f64> = (0..d).map(|c| if c % 2 == 0 { 1.0 } else { -1.0 }).collect();
        out.push(PathFunctional::EvalLinear { t, weights, map: ScalarMap::Identity });
    }
    out.push(PathFunctional::SupNorm(ScalarMap::Identity));
    out.push(PathFunctional::SupNorm(ScalarMap::Clip { lo: 0.0, hi: 1.0 }));
    for c in 0..d {
        out.push(PathFunctional::SupCoord(c));
        out.push(PathFunctional::InfCoord(c));
    }
    out.push(PathFunctional::DistanceTo(reference.clone()));
    out
}

/// `|mean_A f − mean_B f|` for a catalog functional with `Lip(f) ≤ 1`.
pub fn kr_dual_lower_bound(a: &PathEnsemble, b: &PathEnsemble, f: &PathFunctional) -> Result<f64> {
    a.same_grid(b)?;
    f.validate(a.n(), a.d())?;
    let mean = |e: &PathEnsemble| {
        let v: Vec<f64> = e.paths().iter().map(|p| f.eval(p)).collect();
        crate::exec::pairwise_mean(&v)
    };
    Ok((mean(a) - mean(b)).abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ens(levels: &[f64]) -> PathEnsemble {
        PathEnsemble::new(levels.iter().map(|&l| StepPath::constant(2, &[l])).collect(), "").unwrap()
    }

    #[test]
    fn rejects_non_catalog_constants() {
        let a = ens(&[0.0, 1.0]);
        let f = PathFunctional::Eval { t: 1.0, coord: 0, map: ScalarMap::Scale(2.0) };
        assert!(matches!(kr_dual_lower_bound(&a, &a, &f), Err(Error::NotLipschitz(_))));
        let f = PathFunctional::Eval { t: 1.5, coord: 0, map: ScalarMap::Identity };
        assert!(kr_dual_lower_bound(&a, &a, &f).is_err());
        let f = PathFunctional::SupCoord(3);
        assert!(kr_dual_lower_bound(&a, &a, &f).is_err());
        let f = PathFunctional::Eval { t: 0.5, coord: 0, map: ScalarMap::Clip { lo: 1.0, hi: 0.0 } };
        assert!(kr_dual_lower_bound(&a, &a, &f).is_err());
    }

    #[test]
    fn trivial_bounds() {
        let a = ens(&[0.0, 3.0]);
        let b = ens(&[1.0, 5.0]);
        let clip = PathFunctional::Eval { t: 1.0, coord: 0, map: ScalarMap::Clip { lo: -1.0, hi: 1.0 } };
        assert_eq!(kr_dual_lower_bound(&a, &a, &clip).unwrap(), 0.0);
        assert_eq!(kr_dual_lower_bound(&a, &b, &PathFunctional::Constant(4.0)).unwrap(), 0.0);
        let id = PathFunctional::Eval { t: 1.0, coord: 0, map: ScalarMap::Identity };
        assert_eq!(kr_dual_lower_bound(&a, &b, &id).unwrap(), 1.5);
    }
}
