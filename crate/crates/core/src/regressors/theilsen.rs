use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{check_rows, design_matrix, median, weighted_lstsq};
use crate::regressors::FitResult;
use crate::types::Coefficients;

/// Theil-Sen estimator.
///
/// For one feature: median of all pairwise slopes between points with distinct
/// x, intercept `median(y - slope * x)`. For several features: exact fits on
/// `n_subsets` random (d+1)-subsets and the coordinatewise median of their
/// coefficient vectors (singular subsets are skipped).
pub fn fit_theilsen(rows: &[Vec<f64>], y: &[f64], n_subsets: usize, seed: u64) -> Result<FitResult> {
    let d = check_rows(rows)?;
    if y.len() != rows.len() {
        return Err(Error::DimensionMismatch {
            expected: rows.len(),
            found: y.len(),
        });
    }
    if rows.len() < d + 1 {
        return Err(Error::RankDeficient {
            rows: rows.len(),
            cols: d + 1,
        });
    }
    let a = design_matrix(rows)?;
    let beta = match d {
        0 => Coefficients::new(median(y), &[]),
        1 => {
            let xs: Vec<f64> = rows.iter().map(|r| r[0]).collect();
            pairwise_median_line(&xs, y)?
        }
        _ => subset_median(&a, y, d, n_subsets, seed)?,
    };
    Ok(FitResult::from_beta(&a, y, beta))
}

fn pairwise_median_line(xs: &[f64], ys: &[f64]) -> Result<Coefficients> {
    let n = xs.len();
    let mut slopes = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            let dx = xs[j] - xs[i];
            if dx != 0.0 {
                slopes.push((ys[j] - ys[i]) / dx);
            }
        }
    }
    if slopes.is_empty() {
        return Err(Error::UndefinedSlope);
    }
    let slope = median(&slopes);
    let intercepts: Vec<f64> = xs.iter().zip(ys).map(|(x, y)| y - slope * x).collect();
    Ok(Coefficients::new(median(&intercepts), &[slope]))
}

fn subset_median(a: &nalgebra::DMatrix<f64>, y: &[f64], d: usize, n_subsets: usize, seed: u64) -> Result<Coefficients> {
    let n = y.len();
    let p = d + 1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coefs: Vec<Vec<f64>> = vec![Vec::with_capacity(n_subsets); p];
    for _ in 0..n_subsets {
        let idx = rand::seq::index::sample(&mut rng, n, p).into_vec();
        let sub = a.select_rows(idx.iter());
        let ys: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
        if let Ok(beta) = weighted_lstsq(&sub, &ys, None) {
            for (j, b) in beta.as_slice().iter().enumerate() {
                coefs[j].push(*b);
            }
        }
    }
    if coefs[0].is_empty() {
        return Err(Error::RankDeficient { rows: n, cols: p });
    }
    Coefficients::from_raw(coefs.iter().map(|c| median(c)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regressors::testutil::random_problem;
    use proptest::prelude::*;

    fn rows1(xs: &[f64]) -> Vec<Vec<f64>> {
        xs.iter().map(|&x| vec![x]).collect()
    }

    #[test]
    fn collinear_points() {
        let fit = fit_theilsen(&rows1(&[0.0, 1.0, 2.0]), &[0.0, 1.0, 2.0], 10, 0).unwrap();
        assert_eq!(fit.beta.features()[0], 1.0);
        assert_eq!(fit.beta.intercept(), 0.0);
    }

    #[test]
    fn five_point_outlier_fixture() {
        // Pairwise slopes: six equal to 1, then 25, 33, 49, 97 -> median 1.
        let fit = fit_theilsen(&rows1(&[0.0, 1.0, 2.0, 3.0, 4.0]), &[0.0, 1.0, 2.0, 3.0, 100.0], 10, 0).unwrap();
        assert_eq!(fit.beta.features()[0], 1.0);
    }

    #[test]
    fn duplicate_x_pairs_skipped() {
        let fit = fit_theilsen(&rows1(&[1.0, 1.0, 2.0, 2.0, 3.0]), &[1.0, 1.5, 2.0, 2.5, 3.0], 10, 0).unwrap();
        assert!(fit.beta.as_slice().iter().all(|b| b.is_finite()));
    }

    #[test]
    fn identical_x_is_undefined() {
        assert!(matches!(
            fit_theilsen(&rows1(&[2.0, 2.0, 2.0]), &[1.0, 2.0, 3.0], 10, 0),
            Err(Error::UndefinedSlope)
        ));
    }

    #[test]
    fn multivariate_recovers_clean_plane() {
        let (rows, y, beta) = random_problem(80, 4, 0.0, 3);
        let fit = fit_theilsen(&rows, &y, 300, 9).unwrap();
        for (b, t) in fit.beta.as_slice().iter().zip(&beta) {
            assert!((b - t).abs() < 1e-8);
        }
    }

    #[test]
    fn multivariate_is_deterministic_per_seed() {
        let (rows, y, _) = random_problem(50, 3, 0.2, 1);
        let a = fit_theilsen(&rows, &y, 100, 42).unwrap();
        let b = fit_theilsen(&rows, &y, 100, 42).unwrap();
        assert_eq!(a, b);
    }

    proptest! {
        #[test]
        fn one_gross_outlier_leaves_slope_unchanged(
            n in 5usize..12,
            slope in -3.0..3.0f64,
            icpt in -3.0..3.0f64,
            pos in 0usize..100,
            bump in prop_oneof![-1e4..-10.0f64, 10.0..1e4f64],
        ) {
            // integer x and dyadic coefficients keep the clean slopes exact
            let slope = (slope * 8.0).round() / 8.0;
            let icpt = (icpt * 8.0).round() / 8.0;
            let xs: Vec<f64> = (0..n).map(|i| i as f64).collect();
            let mut ys: Vec<f64> = xs.iter().map(|x| icpt + slope * x).collect();
            ys[pos % n] += bump;
            let fit = fit_theilsen(&rows1(&xs), &ys, 10, 0).unwrap();
            prop_assert_eq!(fit.beta.features()[0], slope);
        }
    }
}
