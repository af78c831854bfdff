//! Uniform B-spline bases on extended knot grids.
//!
//! A grid with `G` intervals over `[lo, hi]` and degree `k` carries
//! `G + 2k + 1` uniformly spaced knots: the `G + 1` domain knots plus `k`
//! extension knots on each side. That gives `G + k` basis functions, which sum
//! to one everywhere on `[lo, hi]`.
//!
//! Inputs outside the domain are not clamped. They are evaluated by the same
//! recursion and fade to zero past the extension knots.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

pub const DEFAULT_DEGREE: usize = 3;
pub const DEFAULT_INTERVALS: usize = 5;
pub const MAX_DEGREE: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnotGrid {
    degree: usize,
    intervals: usize,
    domain_lo: f64,
    domain_hi: f64,
    knots: Vec<f64>,
}

/// Builds a uniform extended grid over `[lo, hi]`.
pub fn make_grid(lo: f64, hi: f64, intervals: usize, degree: usize) -> Result<KnotGrid> {
    if !lo.is_finite() || !hi.is_finite() || lo >= hi {
        return Err(Error::InvalidDomain { lo, hi });
    }
    if intervals == 0 {
        return Err(Error::InvalidSize("grid needs at least one interval".into()));
    }
    if degree > MAX_DEGREE {
        return Err(Error::InvalidSize(format!(
            "degree {degree} exceeds maximum {MAX_DEGREE}"
        )));
    }
    let step = (hi - lo) / intervals as f64;
    let n_knots = intervals + 2 * degree + 1;
    let mut knots: Vec<f64> = (0..n_knots)
        .map(|i| lo + (i as f64 - degree as f64) * step)
        .collect();
    // Pin the domain ends so knots[k] and knots[G + k] are exact.
    knots[degree] = lo;
    knots[degree + intervals] = hi;
    Ok(KnotGrid {
        degree,
        intervals,
        domain_lo: lo,
        domain_hi: hi,
        knots,
    })
}

impl KnotGrid {
    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn intervals(&self) -> usize {
        self.intervals
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.domain_lo, self.domain_hi)
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn basis_count(&self) -> usize {
        self.intervals + self.degree
    }

    pub fn step(&self) -> f64 {
        (self.domain_hi - self.domain_lo) / self.intervals as f64
    }

    /// Value of basis function `index` at `x` by direct Cox–de Boor recursion.
    pub fn basis_value(&self, index: usize, x: f64) -> Result<f64> {
        if index >= self.basis_count() {
            return Err(Error::IndexOutOfRange {
                index,
                len: self.basis_count(),
            });
        }
        Ok(cox_de_boor(&self.knots, index, self.degree, x))
    }

    /// All basis values at `x`.
    pub fn basis_row(&self, x: f64) -> Result<Vec<f64>> {
        check_finite(x)?;
        Ok(self.levels(x).0)
    }

    /// Basis values and their derivatives with respect to `x`.
    ///
    /// At a knot the derivative is the right-hand limit.
    pub fn basis_row_with_deriv(&self, x: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        check_finite(x)?;
        let (values, lower) = self.levels(x);
        let k = self.degree;
        let t = &self.knots;
        let deriv = if k == 0 {
            vec![0.0; values.len()]
        } else {
            let kf = k as f64;
            (0..values.len())
                .map(|i| {
                    let left = kf / (t[i + k] - t[i]) * lower[i];
                    let right = kf / (t[i + k + 1] - t[i + 1]) * lower[i + 1];
                    left - right
                })
                .collect()
        };
        Ok((values, deriv))
    }

    /// Evaluates `sum_i coeffs[i] * B_i(x)`.
    pub fn eval_spline(&self, coeffs: &[f64], x: f64) -> Result<f64> {
        if coeffs.len() != self.basis_count() {
            return Err(Error::LengthMismatch {
                expected: self.basis_count(),
                got: coeffs.len(),
            });
        }
        let row = self.basis_row(x)?;
        Ok(row.iter().zip(coeffs).map(|(b, c)| b * c).sum())
    }

    /// Returns the degree-`k` row and the degree-`k - 1` row (the latter has
    /// one more entry; for `k = 0` it is the degree-0 row itself).
    fn levels(&self, x: f64) -> (Vec<f64>, Vec<f64>) {
        let t = &self.knots;
        let last = t.len() - 1;
        let mut level: Vec<f64> = (0..last)
            .map(|i| indicator(t, i, x))
            .collect();
        let mut lower = level.clone();
        for d in 1..=self.degree {
            let next: Vec<f64> = (0..last - d)
                .map(|j| {
                    let left = (x - t[j]) / (t[j + d] - t[j]) * level[j];
                    let right = (t[j + d + 1] - x) / (t[j + d + 1] - t[j + 1]) * level[j + 1];
                    left + right
                })
                .collect();
            lower = std::mem::replace(&mut level, next);
        }
        (level, lower)
    }
}

fn check_finite(x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite(format!("spline input {x}")))
    }
}

/// Degree-0 basis: half-open on `[t_i, t_{i+1})`, with the final interval
/// closed so the last knot is covered.
fn indicator(t: &[f64], i: usize, x: f64) -> f64 {
    let last = t.len() - 1;
    if (t[i] <= x && x < t[i + 1]) || (i + 1 == last && x == t[last]) {
        1.0
    } else {
        0.0
    }
}

fn cox_de_boor(t: &[f64], i: usize, k: usize, x: f64) -> f64 {
    if k == 0 {
        return indicator(t, i, x);
    }
    let left = (x - t[i]) / (t[i + k] - t[i]) * cox_de_boor(t, i, k - 1, x);
    let right = (t[i + k + 1] - x) / (t[i + k + 1] - t[i + 1]) * cox_de_boor(t, i + 1, k - 1, x);
    left + right
}

/// Re-expresses a spline on `new_grid` by least squares against the old
/// spline sampled at `sample_count` uniform points of the new domain.
pub fn refit_grid(
    old_grid: &KnotGrid,
    coeffs: &[f64],
    new_grid: &KnotGrid,
    sample_count: usize,
) -> Result<Vec<f64>> {
    let (old_lo, old_hi) = old_grid.domain();
    let (new_lo, new_hi) = new_grid.domain();
    if new_lo > old_lo || new_hi < old_hi {
        return Err(Error::InvalidDomain {
            lo: new_lo,
            hi: new_hi,
        });
    }
    if sample_count < new_grid.basis_count() || sample_count < 2 {
        return Err(Error::InvalidSize(format!(
            "refit needs at least {} samples, got {sample_count}",
            new_grid.basis_count()
        )));
    }
    let mut rows = Vec::with_capacity(sample_count);
    let mut rhs = Vec::with_capacity(sample_count);
    for s in 0..sample_count {
        let x = new_lo + (new_hi - new_lo) * s as f64 / (sample_count - 1) as f64;
        rows.push(new_grid.basis_row(x)?);
        rhs.push(old_grid.eval_spline(coeffs, x)?);
    }
    linalg::lstsq(&rows, &rhs)
}
