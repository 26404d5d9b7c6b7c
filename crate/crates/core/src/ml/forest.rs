//! Bootstrap-bagged random forest over CART trees.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::tree::{grow_tree, RegressionTree};
use super::Predictor;
use crate::bayes::sub_seed;
use crate::error::{Error, Result};

/// Forest hyperparameters; `mtry = None` means the ceil(p/3) regression
/// default.
#[derive(Debug, Clone, Copy)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub mtry: Option<usize>,
    pub min_leaf: usize,
    pub bootstrap: bool,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 500,
            mtry: None,
            min_leaf: 5,
            bootstrap: true,
        }
    }
}

/// Fitted forest plus the out-of-bag MSE (NaN when bootstrap is off).
#[derive(Debug, Clone)]
pub struct RandomForest {
    pub trees: Vec<RegressionTree>,
    pub oob_mse: f64,
}

impl RandomForest {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict_row(row)).sum::<f64>() / self.trees.len() as f64
    }
}

impl Predictor for RandomForest {
    fn predict_row(&self, row: &[f64]) -> f64 {
        RandomForest::predict_row(self, row)
    }
}

/// Fit a random forest with variance-reduction splits over `mtry` random
/// candidate variables per node.
pub fn fit_random_forest(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    config: &ForestConfig,
    seed: u64,
) -> Result<RandomForest> {
    let n = x.nrows();
    let p = x.ncols();
    if config.n_trees == 0 || config.min_leaf == 0 {
        return Err(Error::InvalidConfig(
            "need n_trees >= 1 and min_leaf >= 1".into(),
        ));
    }
    let mtry = config.mtry.unwrap_or(p.div_ceil(3)).clamp(1, p);
    if n < 2 * config.min_leaf {
        return Err(Error::InvalidConfig(format!(
            "need n >= 2 * min_leaf, got n={n}, min_leaf={}",
            config.min_leaf
        )));
    }
    let yv: Vec<f64> = y.iter().copied().collect();
    let mut trees = Vec::with_capacity(config.n_trees);
    let mut oob_sum = vec![0.0; n];
    let mut oob_count = vec![0usize; n];
    for t in 0..config.n_trees {
        let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(seed, t as u64));
        let rows: Vec<usize> = if config.bootstrap {
            (0..n).map(|_| rng.gen_range(0..n)).collect()
        } else {
            (0..n).collect()
        };
        let mut in_bag = vec![false; n];
        for &i in &rows {
            in_bag[i] = true;
        }
        let tree = {
            let mut candidates = || sample_without_replacement(p, mtry, &mut rng);
            grow_tree(x, &yv, &rows, config.min_leaf, usize::MAX, &mut candidates)
        };
        if config.bootstrap {
            for i in 0..n {
                if !in_bag[i] {
                    let row: Vec<f64> = (0..p).map(|j| x[(i, j)]).collect();
                    oob_sum[i] += tree.predict_row(&row);
                    oob_count[i] += 1;
                }
            }
        }
        trees.push(tree);
    }
    let oob_mse = if config.bootstrap {
        let mut acc = 0.0;
        let mut m = 0usize;
        for i in 0..n {
            if oob_count[i] > 0 {
                let e = yv[i] - oob_sum[i] / oob_count[i] as f64;
                acc += e * e;
                m += 1;
            }
        }
        if m > 0 {
            acc / m as f64
        } else {
            f64::NAN
        }
    } else {
        f64::NAN
    };
    Ok(RandomForest { trees, oob_mse })
}

fn sample_without_replacement(p: usize, m: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut pool: Vec<usize> = (0..p).collect();
    for i in 0..m {
        let j = rng.gen_range(i..p);
        pool.swap(i, j);
    }
    pool.truncate(m);
    pool
}
