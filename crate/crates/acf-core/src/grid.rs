//! Piecewise-constant functions on a uniform grid over `I_α = [α−1, α]`.
//!
//! `I_α` always has unit length, so a grid of `n` cells has spacing
//! `h = 1/n` exactly and translated comparisons across different `α`
//! (both domains shifted to `[0,1]`) are cell-aligned for free.
//!
//! Integrals against the logarithmic weights that appear in entropy and
//! variance formulas are computed with closed-form antiderivatives per
//! cell, so the singular cell at 0 needs no special quadrature.

use crate::map::AlphaMap;
use crate::{Error, Result};
use std::io::{self, Write};

#[derive(Clone, Debug)]
pub struct GridFunction {
    map: AlphaMap,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn from_values(map: AlphaMap, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidParam("grid needs at least one cell".into()));
        }
        Ok(GridFunction { map, values })
    }

    pub fn constant(map: AlphaMap, n_cells: usize, c: f64) -> Self {
        GridFunction {
            map,
            values: vec![c; n_cells],
        }
    }

    /// Builds the grid from exact cell means, `mean(a, b) = (1/h)∫_a^b f`.
    pub fn from_cell_means(map: AlphaMap, n_cells: usize, mean: impl Fn(f64, f64) -> f64) -> Self {
        let h = 1.0 / n_cells as f64;
        let values = (0..n_cells)
            .map(|i| {
                let a = map.left() + i as f64 * h;
                mean(a, a + h)
            })
            .collect();
        GridFunction { map, values }
    }

    /// Builds the grid by sampling `f` at cell centers.
    pub fn from_fn(map: AlphaMap, n_cells: usize, f: impl Fn(f64) -> f64) -> Self {
        Self::from_cell_means(map, n_cells, |a, b| f(0.5 * (a + b)))
    }

    pub fn map(&self) -> AlphaMap {
        self.map
    }

    pub fn n_cells(&self) -> usize {
        self.values.len()
    }

    pub fn h(&self) -> f64 {
        1.0 / self.values.len() as f64
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn cell_bounds(&self, i: usize) -> (f64, f64) {
        let h = self.h();
        let a = self.map.left() + i as f64 * h;
        (a, a + h)
    }

    pub fn cell_center(&self, i: usize) -> f64 {
        let (a, b) = self.cell_bounds(i);
        0.5 * (a + b)
    }

    /// Index of the cell containing `x`, clamped to the grid.
    pub fn cell_index(&self, x: f64) -> usize {
        let i = ((x - self.map.left()) / self.h()).floor();
        (i.max(0.0) as usize).min(self.values.len() - 1)
    }

    pub fn value_at(&self, x: f64) -> f64 {
        self.values[self.cell_index(x)]
    }

    /// `∫ f = Σ vᵢ·h`.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.h()
    }

    pub fn l1_norm(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum::<f64>() * self.h()
    }

    pub fn l1_distance(&self, other: &GridFunction) -> f64 {
        assert_eq!(self.n_cells(), other.n_cells(), "grid size mismatch");
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            * self.h()
    }

    /// Total variation over the cells meeting `sub` (the whole interval
    /// when `None`): the sum of absolute consecutive cell differences,
    /// the minimal-variation convention for a step function.
    pub fn total_variation(&self, sub: Option<(f64, f64)>) -> f64 {
        let (i0, i1) = match sub {
            None => (0, self.values.len() - 1),
            Some((lo, hi)) => {
                if hi <= lo {
                    return 0.0;
                }
                // cells whose interior meets (lo, hi)
                let eps = 1e-12 * self.h();
                (self.cell_index(lo + eps), self.cell_index(hi - eps))
            }
        };
        self.values[i0..=i1]
            .windows(2)
            .map(|w| (w[1] - w[0]).abs())
            .sum()
    }

    pub fn sup_abs(&self, sub: Option<(f64, f64)>) -> f64 {
        let (i0, i1) = match sub {
            None => (0, self.values.len() - 1),
            Some((lo, hi)) => {
                if hi <= lo {
                    return 0.0;
                }
                let eps = 1e-12 * self.h();
                (self.cell_index(lo + eps), self.cell_index(hi - eps))
            }
        };
        self.values[i0..=i1].iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Exact integral of the step function over an arbitrary
    /// `[lo, hi] ⊆ I_α` (partial cells weighted by overlap length).
    pub fn integral_exact(&self, lo: f64, hi: f64) -> f64 {
        if hi <= lo {
            return 0.0;
        }
        let h = self.h();
        let i0 = self.cell_index(lo);
        let i1 = self.cell_index(hi);
        if i0 == i1 {
            return self.values[i0] * (hi - lo);
        }
        let mut acc = self.values[i0] * (self.cell_bounds(i0).1 - lo);
        for i in i0 + 1..i1 {
            acc += self.values[i] * h;
        }
        acc + self.values[i1] * (hi - self.cell_bounds(i1).0)
    }

    /// Restricts integration to `sub` (whole cells).
    pub fn integral_abs_over(&self, sub: (f64, f64)) -> f64 {
        if sub.1 <= sub.0 {
            return 0.0;
        }
        let eps = 1e-12 * self.h();
        let (i0, i1) = (self.cell_index(sub.0 + eps), self.cell_index(sub.1 - eps));
        self.values[i0..=i1].iter().map(|v| v.abs()).sum::<f64>() * self.h()
    }

    /// `Σ vᵢ·w(aᵢ, bᵢ)` for a per-cell integral `w` of some weight; used
    /// with the closed-form log integrals below.
    pub fn integral_against(&self, cell_integral: impl Fn(f64, f64) -> f64) -> f64 {
        self.values
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let (a, b) = self.cell_bounds(i);
                v * cell_integral(a, b)
            })
            .sum()
    }

    /// Scales to unit integral, returning the previous integral.
    pub fn normalize_l1(&mut self) -> Result<f64> {
        let s = self.integral();
        if s.abs() < 1e-300 {
            return Err(Error::DegenerateSample("integral is zero".into()));
        }
        for v in &mut self.values {
            *v /= s;
        }
        Ok(s)
    }

    /// CSV serialization: `cell_left,cell_right,value`.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> io::Result<()> {
        writeln!(w, "cell_left,cell_right,value")?;
        for (i, v) in self.values.iter().enumerate() {
            let (a, b) = self.cell_bounds(i);
            writeln!(w, "{a},{b},{v}")?;
        }
        Ok(())
    }
}

/// `∫_a^b ln|x| dx` via the antiderivative `x ln|x| − x` (0 at 0), valid
/// across the singular cell.
pub fn integral_ln_abs(a: f64, b: f64) -> f64 {
    fn anti(t: f64) -> f64 {
        if t == 0.0 {
            0.0
        } else {
            t * t.abs().ln() - t
        }
    }
    anti(b) - anti(a)
}

/// `∫_a^b ln²|x| dx` via `x(ln²|x| − 2 ln|x| + 2)`.
pub fn integral_ln_abs_sq(a: f64, b: f64) -> f64 {
    fn anti(t: f64) -> f64 {
        if t == 0.0 {
            0.0
        } else {
            let l = t.abs().ln();
            t * (l * l - 2.0 * l + 2.0)
        }
    }
    anti(b) - anti(a)
}

/// `∫_a^b |x|^p dx` for `p > −1`, again valid across 0.
pub fn integral_abs_pow(a: f64, b: f64, p: f64) -> f64 {
    assert!(p > -1.0, "|x|^p not integrable across 0 for p <= -1");
    fn anti(t: f64, p: f64) -> f64 {
        if t == 0.0 {
            0.0
        } else {
            t.signum() * t.abs().powf(p + 1.0) / (p + 1.0)
        }
    }
    anti(b, p) - anti(a, p)
}
