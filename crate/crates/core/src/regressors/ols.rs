use crate::error::Result;
use crate::linalg::{design_matrix, weighted_lstsq};
use crate::regressors::FitResult;

/// Ordinary least squares with an intercept column, solved by Householder QR.
pub fn fit_ols(rows: &[Vec<f64>], y: &[f64]) -> Result<FitResult> {
    let a = design_matrix(rows)?;
    let beta = weighted_lstsq(&a, y, None)?;
    Ok(FitResult::from_beta(&a, y, beta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::regressors::testutil::random_problem;

    /// Normal equations `(A'A) b = A'y` by Gaussian elimination with partial pivoting.
    fn normal_equations_oracle(rows: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
        let p = rows[0].len() + 1;
        let mut m = vec![vec![0.0; p + 1]; p];
        for (x, &yi) in rows.iter().zip(y) {
            let mut a = vec![1.0];
            a.extend_from_slice(x);
            for i in 0..p {
                for j in 0..p {
                    m[i][j] += a[i] * a[j];
                }
                m[i][p] += a[i] * yi;
            }
        }
        for col in 0..p {
            let piv = (col..p)
                .max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))
                .unwrap();
            m.swap(col, piv);
            for r in 0..p {
                if r != col {
                    let f = m[r][col] / m[col][col];
                    let pivot_row = m[col].clone();
                    for (v, q) in m[r][col..].iter_mut().zip(&pivot_row[col..]) {
                        *v -= f * q;
                    }
                }
            }
        }
        (0..p).map(|i| m[i][p] / m[i][i]).collect()
    }

    #[test]
    fn exact_line() {
        let rows = vec![vec![0.0], vec![1.0], vec![2.0]];
        let fit = fit_ols(&rows, &[1.0, 3.0, 5.0]).unwrap();
        assert!((fit.beta.intercept() - 1.0).abs() < 1e-12);
        assert!((fit.beta.features()[0] - 2.0).abs() < 1e-12);
        assert!(fit.residuals.iter().all(|r| r.abs() < 1e-12));
    }

    #[test]
    fn constant_response() {
        let (rows, _, _) = random_problem(15, 3, 0.0, 4);
        let fit = fit_ols(&rows, &[2.5; 15]).unwrap();
        assert!((fit.beta.intercept() - 2.5).abs() < 1e-10);
        assert!(fit.beta.features().iter().all(|b| b.abs() < 1e-10));
    }

    #[test]
    fn matches_normal_equations_and_orthogonality() {
        let (rows, y, _) = random_problem(20, 3, 0.5, 11);
        let fit = fit_ols(&rows, &y).unwrap();
        let oracle = normal_equations_oracle(&rows, &y);
        for (b, o) in fit.beta.as_slice().iter().zip(&oracle) {
            assert!((b - o).abs() < 1e-8, "{b} vs {o}");
        }
        // A' r = 0
        let mut grad = vec![fit.residuals.iter().sum::<f64>()];
        for j in 0..3 {
            grad.push(rows.iter().zip(&fit.residuals).map(|(x, r)| x[j] * r).sum());
        }
        assert!(grad.iter().all(|g| g.abs() < 1e-8), "{grad:?}");
    }

    #[test]
    fn too_few_rows_is_rank_deficient() {
        let rows = vec![vec![1.0, 2.0], vec![3.0, 1.0]];
        assert!(matches!(fit_ols(&rows, &[1.0, 2.0]), Err(Error::RankDeficient { .. })));
    }
}
