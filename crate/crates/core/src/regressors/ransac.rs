use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{check_rows, design_matrix, fitted_values, weighted_lstsq};
use crate::regressors::FitResult;

/// Draws the candidate subset for one trial.
pub(crate) fn draw_subset(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<usize> {
    let mut idx = rand::seq::index::sample(rng, n, k).into_vec();
    idx.sort_unstable();
    idx
}

/// RANSAC: fit candidates on random minimal subsets, keep the one with the
/// largest consensus set (ties broken by lower inlier squared error) and return
/// the OLS refit on that consensus set.
///
/// `outlier_support` lists the rows outside the winning consensus set.
pub fn fit_ransac(
    rows: &[Vec<f64>],
    y: &[f64],
    min_samples: usize,
    residual_threshold: f64,
    max_trials: usize,
    seed: u64,
) -> Result<FitResult> {
    let d = check_rows(rows)?;
    let n = rows.len();
    if min_samples < d + 1 || min_samples > n {
        return Err(Error::InvalidParameter(format!(
            "min_samples must lie in [{}, {n}], got {min_samples}",
            d + 1
        )));
    }
    if !(residual_threshold.is_finite() && residual_threshold > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "residual_threshold must be > 0, got {residual_threshold}"
        )));
    }
    let a = design_matrix(rows)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(usize, f64, Vec<usize>)> = None;
    for _ in 0..max_trials {
        let idx = draw_subset(&mut rng, n, min_samples);
        let sub = a.select_rows(idx.iter());
        let ys: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
        let Ok(candidate) = weighted_lstsq(&sub, &ys, None) else {
            continue;
        };
        let fitted = fitted_values(&a, &candidate);
        let mut inliers = Vec::new();
        let mut sse = 0.0;
        for i in 0..n {
            let r = y[i] - fitted[i];
            if r.abs() <= residual_threshold {
                inliers.push(i);
                sse += r * r;
            }
        }
        let better = match &best {
            None => true,
            Some((count, best_sse, _)) => inliers.len() > *count || (inliers.len() == *count && sse < *best_sse),
        };
        if better {
            best = Some((inliers.len(), sse, inliers));
        }
    }
    let (count, _, consensus) = match best {
        Some(b) if b.0 >= min_samples => b,
        _ => {
            return Err(Error::NoConsensus {
                min_samples,
                trials: max_trials,
            })
        }
    };
    let sub = a.select_rows(consensus.iter());
    let ys: Vec<f64> = consensus.iter().map(|&i| y[i]).collect();
    let beta = weighted_lstsq(&sub, &ys, None)?;
    let mut fit = FitResult::from_beta(&a, y, beta);
    let mut is_inlier = vec![false; n];
    for &i in &consensus {
        is_inlier[i] = true;
    }
    fit.outlier_support = Some((0..n).filter(|&i| !is_inlier[i]).collect());
    fit.iterations = max_trials;
    debug_assert_eq!(n - fit.outlier_support.as_ref().map_or(0, Vec::len), count);
    Ok(fit)
}
