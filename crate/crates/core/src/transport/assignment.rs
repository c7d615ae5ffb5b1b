//! Dense linear assignment by shortest augmenting paths with dual
//! potentials (Hungarian method, Jonker–Volgenant form). `O(m³)`.

use std::io::Write;

use crate::numeric::ExactSum;
use crate::error::{Error, Result};

/// A square cost matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct CostMatrix {
    m: usize,
    data: Vec<f64>,
    /// Ground-cost exponent `p` the entries were raised to.
    pub exponent: f64,
}

impl CostMatrix {
    pub fn new(m: usize, data: Vec<f64>, exponent: f64) -> Result<Self> {
        if data.len() != m * m {
            return Err(Error::SizeMismatch { left: data.len(), right: m * m });
        }
        if let Some(bad) = data.iter().find(|c| !(c.is_finite() && **c >= 0.0)) {
            return Err(Error::domain(format!("cost entries must be finite and non-negative, got {bad}")));
        }
        Ok(Self { m, data, exponent })
    }

    pub fn size(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.m + j]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Average cost of the independent (product) coupling.
    pub fn mean(&self) -> f64 {
        crate::exec::pairwise_mean(&self.data)
    }

    pub fn median(&self) -> f64 {
        let mut v = self.data.clone();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        if n % 2 == 1 {
            v[n / 2]
        } else {
            0.5 * (v[n / 2 - 1] + v[n / 2])
        }
    }

    /// `row,col,cost` lines with a header.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "row,col,cost")?;
        for i in 0..self.m {
            for j in 0..self.m {
                writeln!(w, "{i},{j},{:e}", self.get(i, j))?;
            }
        }
        Ok(())
    }
}

/// An optimal permutation: row `i` is sent to column `cols[i]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Assignment {
    pub cols: Vec<usize>,
    /// `(1/m) Σ_i C[i, cols[i]]`.
    pub mean_cost: f64,
}

impl Assignment {
    pub fn from_permutation(cost: &CostMatrix, cols: Vec<usize>) -> Self {
        // Exactly rounded, so the value depends only on the matched costs
        // and not their order (W(A,B) = W(B,A) bitwise).
        let mut total = ExactSum::new();
        total.extend(cols.iter().enumerate().map(|(i, &j)| cost.get(i, j)));
        let total = total.value();
        let mean_cost = total / cols.len() as f64;
        Self { cols, mean_cost }
    }

    /// The transport plan as `row,col,mass,cost` lines; each matched pair
    /// carries mass `1/m`.
    pub fn write_csv<W: Write>(&self, cost: &CostMatrix, mut w: W) -> Result<()> {
        let mass = 1.0 / self.cols.len() as f64;
        writeln!(w, "row,col,mass,cost")?;
        for (i, &j) in self.cols.iter().enumerate() {
            writeln!(w, "{i},{j},{mass:e},{:e}", cost.get(i, j))?;
        }
        Ok(())
    }
}

pub fn solve_assignment(cost: &CostMatrix) -> Assignment {
    let m = cost.size();
    // 1-based potentials; column 0 is a virtual source.
    let mut u = vec![0.0_f64; m + 1];
    let mut v = vec![0.0_f64; m + 1];
    let mut owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    let mut minv = vec![0.0_f64; m + 1];
    let mut used = vec![false; m + 1];
    for row in 1..=m {
        owner[0] = row;
        let mut j0 = 0;
        minv.fill(f64::INFINITY);
        used.fill(false);
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let reduced = cost.get(i0 - 1, j - 1) - u[i0] - v[j];
                if reduced < minv[j] {
                    minv[j] = reduced;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut cols = vec![0; m];
    for j in 1..=m {
        cols[owner[j] - 1] = j - 1;
    }
    Assignment::from_permutation(cost, cols)
}
