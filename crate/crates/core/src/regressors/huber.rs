use crate::error::{Error, Result};
use crate::linalg::{design_matrix, fitted_values, weighted_lstsq};
use crate::regressors::FitResult;
use crate::types::Coefficients;

const WEIGHT_FLOOR: f64 = 1e-12;

/// Quadratic inside `[-delta, delta]`, `delta|r| - delta^2/2` outside.
pub fn huber_loss(r: f64, delta: f64) -> f64 {
    let a = r.abs();
    if a <= delta {
        0.5 * r * r
    } else {
        delta * a - 0.5 * delta * delta
    }
}

pub fn huber_objective(residuals: &[f64], delta: f64) -> f64 {
    residuals.iter().map(|&r| huber_loss(r, delta)).sum()
}

/// Huber M-estimate by iteratively reweighted least squares, started from OLS.
///
/// Each step minimizes the quadratic majorizer of the Huber objective at the
/// current residuals, so the objective never increases. Stops when the largest
/// coefficient change drops below `tol` or after `max_iter` steps.
pub fn fit_huber(rows: &[Vec<f64>], y: &[f64], delta: f64, max_iter: usize, tol: f64) -> Result<FitResult> {
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::InvalidParameter(format!("huber delta must be > 0, got {delta}")));
    }
    let a = design_matrix(rows)?;
    let mut beta = weighted_lstsq(&a, y, None)?;
    let residuals =
        |beta: &Coefficients| -> Vec<f64> { y.iter().zip(fitted_values(&a, beta)).map(|(y, f)| y - f).collect() };
    let mut r = residuals(&beta);
    let mut trace = vec![huber_objective(&r, delta)];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let weights: Vec<f64> = r
            .iter()
            .map(|ri| {
                let a = ri.abs();
                if a <= delta {
                    1.0
                } else {
                    (delta / a).max(WEIGHT_FLOOR)
                }
            })
            .collect();
        let next = weighted_lstsq(&a, y, Some(&weights))?;
        let change = next.max_abs_diff(&beta);
        beta = next;
        r = residuals(&beta);
        trace.push(huber_objective(&r, delta));
        if change < tol {
            converged = true;
            break;
        }
    }
    let mut fit = FitResult::from_beta(&a, y, beta);
    fit.iterations = iterations;
    fit.converged = converged;
    fit.objective_trace = trace;
    Ok(fit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regressors::fit_ols;
    use crate::regressors::testutil::random_problem;

    #[test]
    fn huge_delta_is_ols() {
        let (rows, y, _) = random_problem(20, 3, 0.5, 11);
        let ols = fit_ols(&rows, &y).unwrap();
        let hub = fit_huber(&rows, &y, 1e9, 100, 1e-8).unwrap();
        assert!(hub.beta.max_abs_diff(&ols.beta) < 1e-6);
    }

    #[test]
    fn quadratic_regime_matches_ols() {
        let (rows, y, _) = random_problem(30, 2, 0.05, 5);
        let ols = fit_ols(&rows, &y).unwrap();
        let max_r = ols.residuals.iter().fold(0.0f64, |m, r| m.max(r.abs()));
        let hub = fit_huber(&rows, &y, 2.0 * max_r, 100, 1e-10).unwrap();
        assert!(hub.beta.max_abs_diff(&ols.beta) < 1e-10);
    }

    /// Brute-force minimization of the Huber objective over (intercept, slope)
    /// by successively refined grids.
    fn grid_minimize(xs: &[f64], ys: &[f64], delta: f64) -> (f64, f64) {
        let obj =
            |b0: f64, b1: f64| -> f64 { xs.iter().zip(ys).map(|(x, y)| huber_loss(y - b0 - b1 * x, delta)).sum() };
        let (mut c0, mut c1, mut half) = (0.0, 0.0, 20.0);
        for _ in 0..12 {
            let mut best = (f64::INFINITY, c0, c1);
            for i in 0..=80 {
                for j in 0..=80 {
                    let b0 = c0 - half + 2.0 * half * i as f64 / 80.0;
                    let b1 = c1 - half + 2.0 * half * j as f64 / 80.0;
                    let v = obj(b0, b1);
                    if v < best.0 {
                        best = (v, b0, b1);
                    }
                }
            }
            c0 = best.1;
            c1 = best.2;
            half /= 8.0;
        }
        (c0, c1)
    }

    #[test]
    fn outlier_fixture_matches_grid_oracle() {
        let xs = [0.0, 1.0, 2.0, 3.0, 1.5];
        let ys = [0.0, 1.0, 2.0, 3.0, 50.0];
        let rows: Vec<Vec<f64>> = xs.iter().map(|&x| vec![x]).collect();
        let fit = fit_huber(&rows, &ys, 1.0, 500, 1e-12).unwrap();
        let (b0, b1) = grid_minimize(&xs, &ys, 1.0);
        let slope = fit.beta.features()[0];
        assert!((slope - 1.0).abs() < 0.05, "slope {slope}");
        assert!((slope - b1).abs() < 1e-3, "irls {slope} vs grid {b1}");
        assert!((fit.beta.intercept() - b0).abs() < 1e-3);
    }

    #[test]
    fn objective_never_increases() {
        for seed in 0..20 {
            let (rows, mut y, _) = random_problem(60, 3, 0.1, seed);
            for i in (0..60).step_by(7) {
                y[i] += 25.0;
            }
            let fit = fit_huber(&rows, &y, 0.15, 200, 1e-12).unwrap();
            for w in fit.objective_trace.windows(2) {
                assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-12, "{:?}", fit.objective_trace);
            }
        }
    }

    #[test]
    fn rejects_non_positive_delta() {
        let (rows, y, _) = random_problem(10, 1, 0.1, 0);
        assert!(fit_huber(&rows, &y, 0.0, 10, 1e-8).is_err());
    }
}
