//! Small dense least-squares and order-statistic helpers shared by the learners.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::types::Coefficients;

/// Relative pivot size below which the QR factor is treated as singular.
const RANK_TOL: f64 = 1e-10;

/// Design matrix with a leading column of ones.
pub(crate) fn design_matrix(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let d = check_rows(rows)?;
    Ok(DMatrix::from_fn(rows.len(), d + 1, |i, j| {
        if j == 0 {
            1.0
        } else {
            rows[i][j - 1]
        }
    }))
}

/// Validates a row set and returns its common dimension.
pub(crate) fn check_rows(rows: &[Vec<f64>]) -> Result<usize> {
    let first = rows.first().ok_or(Error::EmptyInput("design matrix"))?;
    let d = first.len();
    if let Some(bad) = rows.iter().find(|r| r.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: bad.len(),
        });
    }
    Ok(d)
}

/// Solves `min ||sqrt(W)(A b - y)||` by Householder QR. `weights = None` is plain OLS.
pub(crate) fn weighted_lstsq(a: &DMatrix<f64>, y: &[f64], weights: Option<&[f64]>) -> Result<Coefficients> {
    let (n, p) = a.shape();
    if y.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: y.len(),
        });
    }
    if n < p {
        return Err(Error::RankDeficient { rows: n, cols: p });
    }
    let mut aw = a.clone();
    let mut yw = DVector::from_column_slice(y);
    if let Some(w) = weights {
        for i in 0..n {
            let s = w[i].sqrt();
            aw.row_mut(i).scale_mut(s);
            yw[i] *= s;
        }
    }
    let qr = aw.qr();
    let r = qr.r();
    let max_diag = (0..p).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    if max_diag == 0.0 || (0..p).any(|i| r[(i, i)].abs() <= RANK_TOL * max_diag) {
        return Err(Error::RankDeficient { rows: n, cols: p });
    }
    let qty = qr.q().transpose() * yw;
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or(Error::RankDeficient { rows: n, cols: p })?;
    if beta.iter().any(|b| !b.is_finite()) {
        return Err(Error::RankDeficient { rows: n, cols: p });
    }
    Coefficients::from_raw(beta.iter().copied().collect())
}

pub(crate) fn fitted_values(a: &DMatrix<f64>, beta: &Coefficients) -> Vec<f64> {
    let b = DVector::from_column_slice(beta.as_slice());
    (a * b).iter().copied().collect()
}

/// Median of a slice (mean of the two central values for even lengths).
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "median of empty slice");
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Normal-consistent median absolute deviation, `1.4826 * median|v - median(v)|`.
pub fn mad_sigma(values: &[f64]) -> f64 {
    let m = median(values);
    let dev: Vec<f64> = values.iter().map(|v| (v - m).abs()).collect();
    1.4826 * median(&dev)
}
