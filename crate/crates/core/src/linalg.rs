//! Small dense least-squares helpers over nalgebra.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative singular-value cutoff below which a design matrix is treated as
/// rank deficient.
pub const RANK_TOL: f64 = 1e-12;

/// Solves `min ||A x - b||` for a row-major design matrix.
///
/// Fails with [`Error::Numerical`] when `A` is rank deficient.
pub fn lstsq(rows: &[Vec<f64>], rhs: &[f64]) -> Result<Vec<f64>> {
    let n_rows = rows.len();
    if n_rows == 0 {
        return Err(Error::InvalidSize("least squares with no rows".into()));
    }
    if rhs.len() != n_rows {
        return Err(Error::DimensionMismatch {
            expected: n_rows,
            got: rhs.len(),
        });
    }
    let n_cols = rows[0].len();
    if n_rows < n_cols {
        return Err(Error::Numerical(format!(
            "underdetermined least squares: {n_rows} rows for {n_cols} unknowns"
        )));
    }
    let a = DMatrix::from_fn(n_rows, n_cols, |r, c| rows[r][c]);
    let b = DVector::from_column_slice(rhs);

    // Column scaling keeps the rank test meaningful when regressors differ
    // in magnitude by orders (e.g. V^2 in kV against a unit column).
    let scales: Vec<f64> = (0..n_cols)
        .map(|c| {
            let norm = a.column(c).norm();
            if norm > 0.0 {
                norm
            } else {
                1.0
            }
        })
        .collect();
    let mut scaled = a.clone();
    for (c, s) in scales.iter().enumerate() {
        scaled.column_mut(c).unscale_mut(*s);
    }

    let svd = scaled.svd(true, true);
    let sv = &svd.singular_values;
    let max_sv = sv.iter().cloned().fold(0.0_f64, f64::max);
    let min_sv = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(max_sv > 0.0) || min_sv <= RANK_TOL * max_sv {
        return Err(Error::Numerical(format!(
            "rank-deficient least squares (singular values {min_sv:e} / {max_sv:e})"
        )));
    }
    let sol = svd
        .solve(&b, 0.0)
        .map_err(|e| Error::Numerical(e.to_string()))?;
    Ok(sol.iter().zip(&scales).map(|(x, s)| x / s).collect())
}
