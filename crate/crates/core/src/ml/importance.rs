//! Model-agnostic attribution: permutation importance and Monte Carlo
//! sampling Shapley values with the marginal (interventional) value function.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::Predictor;
use crate::bayes::sub_seed;
use crate::error::{Error, Result};

/// Mean MSE increase per variable: average over `n_repeats` seeded
/// permutations of MSE(permuted column) - MSE(intact).
pub fn permutation_importance(
    model: &dyn Predictor,
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    n_repeats: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let n = x.nrows();
    let p = x.ncols();
    if n_repeats == 0 {
        return Err(Error::InvalidConfig("need n_repeats >= 1".into()));
    }
    let rows: Vec<Vec<f64>> = (0..n).map(|i| (0..p).map(|j| x[(i, j)]).collect()).collect();
    let base_mse = {
        let mut acc = 0.0;
        for i in 0..n {
            let e = y[i] - model.predict_row(&rows[i]);
            acc += e * e;
        }
        acc / n as f64
    };
    let mut importance = vec![0.0; p];
    for (j, imp) in importance.iter_mut().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(seed, j as u64));
        for _ in 0..n_repeats {
            // Fisher-Yates permutation of column j
            let mut perm: Vec<usize> = (0..n).collect();
            for i in (1..n).rev() {
                let k = rng.gen_range(0..=i);
                perm.swap(i, k);
            }
            let mut acc = 0.0;
            for i in 0..n {
                let mut row = rows[i].clone();
                row[j] = x[(perm[i], j)];
                let e = y[i] - model.predict_row(&row);
                acc += e * e;
            }
            *imp += acc / n as f64 - base_mse;
        }
        *imp /= n_repeats as f64;
    }
    Ok(importance)
}

/// Monte Carlo Shapley estimate at one point.
#[derive(Debug, Clone)]
pub struct ShapleyValues {
    pub values: Vec<f64>,
    pub mc_se: Vec<f64>,
    pub baseline: f64,
    pub prediction: f64,
}

/// Permutation-sampling Shapley values with the training set as background.
///
/// Each sample draws a feature permutation and a background row, then walks
/// the permutation replacing background coordinates with the point's; the
/// successive prediction differences are one-sample estimates of each
/// feature's contribution.
pub fn shapley_sampling(
    model: &dyn Predictor,
    background: &DMatrix<f64>,
    point: &[f64],
    n_samples: usize,
    seed: u64,
) -> Result<ShapleyValues> {
    let n = background.nrows();
    let p = background.ncols();
    if n == 0 {
        return Err(Error::InvalidConfig("background must be nonempty".into()));
    }
    if point.len() != p {
        return Err(Error::InvalidConfig(format!(
            "point has {} coordinates, background has {p}",
            point.len()
        )));
    }
    if n_samples == 0 {
        return Err(Error::InvalidConfig("need n_samples >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sum = vec![0.0; p];
    let mut sum_sq = vec![0.0; p];
    for _ in 0..n_samples {
        // random permutation of the features
        let mut order: Vec<usize> = (0..p).collect();
        for i in (1..p).rev() {
            let k = rng.gen_range(0..=i);
            order.swap(i, k);
        }
        let z = rng.gen_range(0..n);
        let mut row: Vec<f64> = (0..p).map(|j| background[(z, j)]).collect();
        let mut prev = model.predict_row(&row);
        for &j in &order {
            row[j] = point[j];
            let next = model.predict_row(&row);
            let contrib = next - prev;
            sum[j] += contrib;
            sum_sq[j] += contrib * contrib;
            prev = next;
        }
    }
    let s = n_samples as f64;
    let values: Vec<f64> = sum.iter().map(|v| v / s).collect();
    let mc_se: Vec<f64> = (0..p)
        .map(|j| {
            let var = (sum_sq[j] - sum[j] * sum[j] / s) / (s - 1.0).max(1.0);
            (var.max(0.0) / s).sqrt()
        })
        .collect();
    let baseline = (0..n)
        .map(|i| {
            let row: Vec<f64> = (0..p).map(|j| background[(i, j)]).collect();
            model.predict_row(&row)
        })
        .sum::<f64>()
        / n as f64;
    Ok(ShapleyValues {
        values,
        mc_se,
        baseline,
        prediction: model.predict_row(point),
    })
}
