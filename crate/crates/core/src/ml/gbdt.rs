//! Stagewise gradient boosting with depth-limited trees and second-order
//! leaf weights under squared loss.
//!
//! With squared loss the per-point gradient is (pred - y) and the Hessian is
//! 1, so a leaf's weight is
//!
//! ```text
//! w = G / (H + lambda_leaf),   G = sum of residuals, H = leaf count
//! ```
//!
//! and the split gain is the standard second-order score
//! G_L^2/(H_L+lambda) + G_R^2/(H_R+lambda) - G^2/(H+lambda).

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::tree::{Node, RegressionTree};
use super::Predictor;
use crate::bayes::sub_seed;
use crate::error::{Error, Result};

/// Boosting hyperparameters.
#[derive(Debug, Clone, Copy)]
pub struct GbdtConfig {
    pub n_rounds: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub lambda_leaf: f64,
    pub subsample: f64,
}

impl Default for GbdtConfig {
    /// The cited system's canonical defaults: 100 rounds at learning rate
    /// 0.3, depth-6 trees, unit leaf penalty, no row subsampling.
    fn default() -> Self {
        Self {
            n_rounds: 100,
            learning_rate: 0.3,
            max_depth: 6,
            lambda_leaf: 1.0,
            subsample: 1.0,
        }
    }
}

impl GbdtConfig {
    fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "learning rate must lie in (0,1], got {}",
                self.learning_rate
            )));
        }
        if self.max_depth < 1 {
            return Err(Error::InvalidConfig("max_depth must be >= 1".into()));
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "subsample must lie in (0,1], got {}",
                self.subsample
            )));
        }
        if self.lambda_leaf < 0.0 {
            return Err(Error::InvalidConfig("lambda_leaf must be >= 0".into()));
        }
        Ok(())
    }
}

/// Boosted model: base score plus shrunken residual trees.
#[derive(Debug, Clone)]
pub struct GbdtModel {
    pub base_score: f64,
    pub learning_rate: f64,
    pub trees: Vec<RegressionTree>,
}

impl GbdtModel {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.base_score
            + self.learning_rate
                * self
                    .trees
                    .iter()
                    .map(|t| t.predict_row(row))
                    .sum::<f64>()
    }
}

impl Predictor for GbdtModel {
    fn predict_row(&self, row: &[f64]) -> f64 {
        GbdtModel::predict_row(self, row)
    }
}

/// Fit by stagewise squared-loss boosting from the training-mean base score.
pub fn fit_gbdt(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    config: &GbdtConfig,
    seed: u64,
) -> Result<GbdtModel> {
    config.validate()?;
    let n = x.nrows();
    if n < 2 {
        return Err(Error::InvalidConfig(format!("need n >= 2, got {n}")));
    }
    let base_score = y.sum() / n as f64;
    let mut pred = vec![base_score; n];
    let mut trees = Vec::with_capacity(config.n_rounds);
    for round in 0..config.n_rounds {
        let resid: Vec<f64> = (0..n).map(|i| y[i] - pred[i]).collect();
        let rows: Vec<usize> = if config.subsample < 1.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(seed, round as u64));
            let m = ((n as f64 * config.subsample).round() as usize).max(1);
            let mut pool: Vec<usize> = (0..n).collect();
            for i in 0..m {
                let j = rng.gen_range(i..n);
                pool.swap(i, j);
            }
            pool.truncate(m);
            pool.sort_unstable();
            pool
        } else {
            (0..n).collect()
        };
        let mut nodes = Vec::new();
        grow_gbdt_node(
            x,
            &resid,
            &rows,
            config.lambda_leaf,
            config.max_depth,
            0,
            &mut nodes,
        );
        let tree = RegressionTree { nodes };
        for (i, p) in pred.iter_mut().enumerate() {
            let row: Vec<f64> = (0..x.ncols()).map(|j| x[(i, j)]).collect();
            *p += config.learning_rate * tree.predict_row(&row);
        }
        trees.push(tree);
    }
    Ok(GbdtModel {
        base_score,
        learning_rate: config.learning_rate,
        trees,
    })
}

fn leaf_weight(g: f64, h: f64, lambda: f64) -> f64 {
    g / (h + lambda)
}

fn score(g: f64, h: f64, lambda: f64) -> f64 {
    g * g / (h + lambda)
}

#[allow(clippy::too_many_arguments)]
fn grow_gbdt_node(
    x: &DMatrix<f64>,
    resid: &[f64],
    rows: &[usize],
    lambda: f64,
    max_depth: usize,
    depth: usize,
    nodes: &mut Vec<Node>,
) -> usize {
    let g: f64 = rows.iter().map(|&i| resid[i]).sum();
    let h = rows.len() as f64;
    let here = nodes.len();
    nodes.push(Node::Leaf {
        value: leaf_weight(g, h, lambda),
    });
    if depth >= max_depth || rows.len() < 2 {
        return here;
    }
    // best second-order gain over all variables, ties toward lower index
    let mut best: Option<(usize, f64, f64)> = None;
    for var in 0..x.ncols() {
        let mut order: Vec<usize> = rows.to_vec();
        order.sort_by(|&a, &b| x[(a, var)].partial_cmp(&x[(b, var)]).unwrap());
        let mut gl = 0.0;
        let mut hl = 0.0;
        for w in 0..order.len() - 1 {
            let i = order[w];
            gl += resid[i];
            hl += 1.0;
            let v = x[(i, var)];
            let v_next = x[(order[w + 1], var)];
            if v == v_next {
                continue;
            }
            let gain =
                score(gl, hl, lambda) + score(g - gl, h - hl, lambda) - score(g, h, lambda);
            if gain > 1e-12 && best.map_or(true, |(_, _, bg)| gain > bg) {
                best = Some((var, 0.5 * (v + v_next), gain));
            }
        }
    }
    let Some((var, threshold, _)) = best else {
        return here;
    };
    let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
        rows.iter().partition(|&&i| x[(i, var)] <= threshold);
    let left = grow_gbdt_node(x, resid, &left_rows, lambda, max_depth, depth + 1, nodes);
    let right = grow_gbdt_node(x, resid, &right_rows, lambda, max_depth, depth + 1, nodes);
    nodes[here] = Node::Split {
        var,
        threshold,
        left,
        right,
    };
    here
}
