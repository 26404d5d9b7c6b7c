//! Bayesian additive regression trees via backfitting MCMC.
//!
//! The outcome is rescaled to [-0.5, 0.5]; each of m trees carries conjugate
//! normal leaves mu ~ N(0, sigma_mu^2) with sigma_mu = 0.5/(k sqrt(m)), and
//! the depth prior P(internal at depth d) = alpha (1+d)^(-beta). Per sweep
//! each tree receives one grow / prune / change proposal (0.25/0.25/0.5)
//! accepted against the leaf-marginalized likelihood, then leaf values and
//! sigma^2 are drawn from their conditionals.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::Predictor;
use crate::bayes::sub_seed;
use crate::error::{Error, Result};

/// BART hyperparameters.
#[derive(Debug, Clone, Copy)]
pub struct BartConfig {
    pub n_trees: usize,
    pub alpha: f64,
    pub beta: f64,
    pub k: f64,
    pub sigma_df: f64,
    pub sigma_quantile: f64,
    pub iterations: usize,
    pub burn_in: usize,
}

impl Default for BartConfig {
    fn default() -> Self {
        Self {
            n_trees: 200,
            alpha: 0.95,
            beta: 2.0,
            k: 2.0,
            sigma_df: 3.0,
            sigma_quantile: 0.9,
            iterations: 1000,
            burn_in: 500,
        }
    }
}

impl BartConfig {
    fn validate(&self) -> Result<()> {
        if self.n_trees < 1 {
            return Err(Error::InvalidConfig("need m >= 1 trees".into()));
        }
        if !(0.0 < self.alpha && self.alpha < 1.0) || self.beta <= 0.0 {
            return Err(Error::InvalidConfig(
                "need alpha in (0,1) and beta > 0".into(),
            ));
        }
        if self.burn_in >= self.iterations {
            return Err(Error::InvalidConfig(
                "burn_in must be below iterations".into(),
            ));
        }
        Ok(())
    }
}

/// A BART tree: arena nodes carrying data-row assignments.
#[derive(Debug, Clone)]
struct BartNode {
    depth: usize,
    split: Option<(usize, f64)>, // (var, threshold) when internal
    children: Option<(usize, usize)>,
    rows: Vec<usize>, // training rows routed here
    mu: f64,
}

#[derive(Debug, Clone)]
struct BartTree {
    nodes: Vec<BartNode>,
}

impl BartTree {
    fn stump(n: usize) -> Self {
        Self {
            nodes: vec![BartNode {
                depth: 0,
                split: None,
                children: None,
                rows: (0..n).collect(),
                mu: 0.0,
            }],
        }
    }

    fn leaves(&self) -> Vec<usize> {
        (0..self.nodes.len())
            .filter(|&i| self.nodes[i].children.is_none())
            .collect()
    }

    /// Internal nodes whose both children are leaves ("nog" nodes).
    fn nogs(&self) -> Vec<usize> {
        (0..self.nodes.len())
            .filter(|&i| {
                self.nodes[i].children.is_some_and(|(l, r)| {
                    self.nodes[l].children.is_none() && self.nodes[r].children.is_none()
                })
            })
            .collect()
    }

    fn internals(&self) -> Vec<usize> {
        (0..self.nodes.len())
            .filter(|&i| self.nodes[i].children.is_some())
            .collect()
    }

    fn predict_row(&self, x_row: &[f64]) -> f64 {
        let mut i = 0;
        while let Some((l, r)) = self.nodes[i].children {
            let (var, t) = self.nodes[i].split.unwrap();
            i = if x_row[var] <= t { l } else { r };
        }
        self.nodes[i].mu
    }

    /// Rebuild the row assignments below node `i` (after a change move).
    fn reroute(&mut self, i: usize, x: &DMatrix<f64>) -> bool {
        let Some((l, r)) = self.nodes[i].children else {
            return true;
        };
        let (var, t) = self.nodes[i].split.unwrap();
        let rows = self.nodes[i].rows.clone();
        let (left, right): (Vec<usize>, Vec<usize>) =
            rows.into_iter().partition(|&row| x[(row, var)] <= t);
        if left.is_empty() || right.is_empty() {
            return false;
        }
        self.nodes[l].rows = left;
        self.nodes[r].rows = right;
        self.reroute(l, x) && self.reroute(r, x)
    }

    /// Log prior of the tree structure under the depth prior.
    fn log_prior(&self, alpha: f64, beta: f64) -> f64 {
        self.nodes
            .iter()
            .map(|n| {
                let p_split = alpha * (1.0 + n.depth as f64).powf(-beta);
                if n.children.is_some() {
                    p_split.ln()
                } else {
                    (1.0 - p_split).ln()
                }
            })
            .sum()
    }

    /// Leaf-marginalized log likelihood of residuals `r` under N(mu, sigma2)
    /// leaves with mu ~ N(0, sigma_mu2).
    fn log_marginal(&self, r: &[f64], sigma2: f64, sigma_mu2: f64) -> Result<f64> {
        let mut ll = 0.0;
        for &i in &self.leaves() {
            let rows = &self.nodes[i].rows;
            let nl = rows.len() as f64;
            let t: f64 = rows.iter().map(|&j| r[j]).sum();
            let s: f64 = rows.iter().map(|&j| r[j] * r[j]).sum();
            let denom = sigma2 + nl * sigma_mu2;
            ll += -0.5 * nl * (2.0 * std::f64::consts::PI * sigma2).ln()
                + 0.5 * (sigma2 / denom).ln()
                - s / (2.0 * sigma2)
                + sigma_mu2 * t * t / (2.0 * sigma2 * denom);
        }
        if ll.is_finite() {
            Ok(ll)
        } else {
            Err(Error::NumericalFailure {
                iteration: 0,
                detail: "BART marginal likelihood is not finite".into(),
            })
        }
    }
}

/// Posterior predictive fit: per-draw predictions are summed over trees and
/// unscaled; importance is the average share of split rules per predictor.
#[derive(Debug, Clone)]
pub struct BartFit {
    pub train_mean: Vec<f64>,
    pub sigma_draws: Vec<f64>,
    pub split_proportions: Vec<f64>,
    trees: Vec<Vec<BartTree>>, // retained draws of the full ensemble
    y_min: f64,
    y_range: f64,
}

impl BartFit {
    /// Posterior-mean prediction at a covariate row.
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut acc = 0.0;
        for ensemble in &self.trees {
            let g: f64 = ensemble.iter().map(|t| t.predict_row(row)).sum();
            acc += g;
        }
        let scaled = acc / self.trees.len() as f64;
        (scaled + 0.5) * self.y_range + self.y_min
    }
}

impl Predictor for BartFit {
    fn predict_row(&self, row: &[f64]) -> f64 {
        BartFit::predict_row(self, row)
    }
}

/// Run the backfitting sampler.
pub fn fit_bart(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    config: &BartConfig,
    seed: u64,
) -> Result<BartFit> {
    config.validate()?;
    let n = x.nrows();
    let p = x.ncols();
    if n < 2 {
        return Err(Error::InvalidConfig(format!("need n >= 2, got {n}")));
    }
    let y_min = y.min();
    let y_max = y.max();
    let y_range = if y_max > y_min { y_max - y_min } else { 1.0 };
    let ys: Vec<f64> = y.iter().map(|v| (v - y_min) / y_range - 0.5).collect();

    let m = config.n_trees;
    let sigma_mu = 0.5 / (config.k * (m as f64).sqrt());
    let sigma_mu2 = sigma_mu * sigma_mu;

    // sigma^2 prior: nu*lambda/chi2_nu with lambda set so that
    // P(sigma < sigma_hat) = quantile, sigma_hat^2 = var of the scaled y
    let ybar = ys.iter().sum::<f64>() / n as f64;
    let sigma_hat2 =
        ys.iter().map(|v| (v - ybar) * (v - ybar)).sum::<f64>() / (n as f64 - 1.0).max(1.0);
    let nu = config.sigma_df;
    let chi = ChiSquared::new(nu).map_err(|_| Error::InvalidConfig("bad sigma_df".into()))?;
    let lambda = sigma_hat2 * chi.inverse_cdf(1.0 - config.sigma_quantile) / nu;

    let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(seed, 0));
    let mut trees: Vec<BartTree> = (0..m).map(|_| BartTree::stump(n)).collect();
    let mut fits = vec![vec![0.0; n]; m]; // per-tree fitted values
    let mut total_fit = vec![0.0; n];
    let mut sigma2 = sigma_hat2.max(1e-12);

    let retained = config.iterations - config.burn_in;
    let mut out_trees = Vec::with_capacity(retained);
    let mut sigma_draws = Vec::with_capacity(retained);
    let mut train_mean = vec![0.0; n];
    let mut split_share_acc = vec![0.0; p];
    let mut share_draws = 0usize;

    for it in 0..config.iterations {
        for t in 0..m {
            // partial residual without tree t
            let r: Vec<f64> = (0..n).map(|i| ys[i] - (total_fit[i] - fits[t][i])).collect();
            propose_move(
                &mut trees[t],
                x,
                &r,
                sigma2,
                sigma_mu2,
                config,
                &mut rng,
            )?;
            // draw leaf values and refresh the cached fit
            draw_leaves(&mut trees[t], &r, sigma2, sigma_mu2, &mut rng);
            for i in 0..n {
                total_fit[i] -= fits[t][i];
            }
            refresh_fit(&trees[t], &mut fits[t]);
            for i in 0..n {
                total_fit[i] += fits[t][i];
            }
        }
        // sigma^2 | rest ~ IG((nu + n)/2, (nu*lambda + rss)/2)
        let rss: f64 = (0..n)
            .map(|i| (ys[i] - total_fit[i]) * (ys[i] - total_fit[i]))
            .sum();
        sigma2 = crate::bayes::draw_inv_gamma(
            (nu + n as f64) / 2.0,
            (nu * lambda + rss) / 2.0,
            &mut rng,
        )
        .max(1e-12); // a constant outcome drives rss (and lambda) to zero

        if it >= config.burn_in {
            for i in 0..n {
                train_mean[i] += (total_fit[i] + 0.5) * y_range + y_min;
            }
            sigma_draws.push(sigma2.sqrt() * y_range);
            // split-rule shares this draw
            let mut counts = vec![0usize; p];
            let mut total = 0usize;
            for tree in &trees {
                for node in &tree.nodes {
                    if let Some((var, _)) = node.split {
                        if node.children.is_some() {
                            counts[var] += 1;
                            total += 1;
                        }
                    }
                }
            }
            if total > 0 {
                for j in 0..p {
                    split_share_acc[j] += counts[j] as f64 / total as f64;
                }
                share_draws += 1;
            }
            // row assignments are training bookkeeping; drop them from the
            // retained copies to keep the posterior sample light
            out_trees.push(
                trees
                    .iter()
                    .map(|t| BartTree {
                        nodes: t
                            .nodes
                            .iter()
                            .map(|n| BartNode {
                                rows: Vec::new(),
                                ..n.clone()
                            })
                            .collect(),
                    })
                    .collect::<Vec<_>>(),
            );
        }
    }
    for v in train_mean.iter_mut() {
        *v /= retained as f64;
    }
    let split_proportions = split_share_acc
        .iter()
        .map(|v| if share_draws > 0 { v / share_draws as f64 } else { 0.0 })
        .collect();
    Ok(BartFit {
        train_mean,
        sigma_draws,
        split_proportions,
        trees: out_trees,
        y_min,
        y_range,
    })
}

/// Candidate thresholds for `var` within `rows`: midpoints of consecutive
/// sorted unique values.
fn cutpoints(x: &DMatrix<f64>, rows: &[usize], var: usize) -> Vec<f64> {
    let mut vals: Vec<f64> = rows.iter().map(|&i| x[(i, var)]).collect();
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    vals.dedup();
    vals.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
}

fn propose_move(
    tree: &mut BartTree,
    x: &DMatrix<f64>,
    r: &[f64],
    sigma2: f64,
    sigma_mu2: f64,
    config: &BartConfig,
    rng: &mut ChaCha8Rng,
) -> Result<()> {
    let p = x.ncols();
    let current_ll = tree.log_marginal(r, sigma2, sigma_mu2)?
        + tree.log_prior(config.alpha, config.beta);
    let u: f64 = rng.gen();
    let mut cand = tree.clone();
    // log proposal density ratio q(reverse)/q(forward)
    let log_q_ratio: f64;
    if u < 0.25 {
        // grow: split a uniformly chosen leaf on a uniform (var, cutpoint)
        let leaves = cand.leaves();
        let leaf = leaves[rng.gen_range(0..leaves.len())];
        let var = rng.gen_range(0..p);
        let cuts = cutpoints(x, &cand.nodes[leaf].rows, var);
        if cuts.is_empty() {
            return Ok(());
        }
        let t = cuts[rng.gen_range(0..cuts.len())];
        let rows = cand.nodes[leaf].rows.clone();
        let (lrows, rrows): (Vec<usize>, Vec<usize>) =
            rows.into_iter().partition(|&i| x[(i, var)] <= t);
        if lrows.is_empty() || rrows.is_empty() {
            return Ok(());
        }
        let depth = cand.nodes[leaf].depth;
        let li = cand.nodes.len();
        cand.nodes.push(BartNode {
            depth: depth + 1,
            split: None,
            children: None,
            rows: lrows,
            mu: 0.0,
        });
        let ri = cand.nodes.len();
        cand.nodes.push(BartNode {
            depth: depth + 1,
            split: None,
            children: None,
            rows: rrows,
            mu: 0.0,
        });
        cand.nodes[leaf].split = Some((var, t));
        cand.nodes[leaf].children = Some((li, ri));
        let q_forward = 0.25 / (leaves.len() as f64 * p as f64 * cuts.len() as f64);
        let q_reverse = 0.25 / cand.nogs().len() as f64;
        log_q_ratio = q_reverse.ln() - q_forward.ln();
    } else if u < 0.5 {
        // prune: collapse a uniformly chosen nog node
        let nogs = cand.nogs();
        if nogs.is_empty() {
            return Ok(());
        }
        let node = nogs[rng.gen_range(0..nogs.len())];
        let (var, _) = cand.nodes[node].split.unwrap();
        let n_cuts = cutpoints(x, &cand.nodes[node].rows, var).len();
        let q_forward = 0.25 / nogs.len() as f64;
        remove_children(&mut cand, node);
        let q_reverse = 0.25 / (cand.leaves().len() as f64 * p as f64 * n_cuts.max(1) as f64);
        log_q_ratio = q_reverse.ln() - q_forward.ln();
    } else {
        // change: re-draw the rule of a uniformly chosen internal node
        let internals = cand.internals();
        if internals.is_empty() {
            return Ok(());
        }
        let node = internals[rng.gen_range(0..internals.len())];
        let (old_var, _) = cand.nodes[node].split.unwrap();
        let old_cuts = cutpoints(x, &cand.nodes[node].rows, old_var).len();
        let var = rng.gen_range(0..p);
        let cuts = cutpoints(x, &cand.nodes[node].rows, var);
        if cuts.is_empty() {
            return Ok(());
        }
        let t = cuts[rng.gen_range(0..cuts.len())];
        cand.nodes[node].split = Some((var, t));
        if !cand.reroute(node, x) {
            return Ok(()); // an empty leaf: reject outright
        }
        // forward picks uniformly among this node's cuts for `var`; reverse
        // among the cuts for the old variable
        log_q_ratio = (1.0 / old_cuts.max(1) as f64).ln() - (1.0 / cuts.len() as f64).ln();
    }
    let cand_ll = cand.log_marginal(r, sigma2, sigma_mu2)?
        + cand.log_prior(config.alpha, config.beta);
    let log_accept = cand_ll - current_ll + log_q_ratio;
    if (rng.gen::<f64>()).ln() < log_accept {
        *tree = cand;
    }
    Ok(())
}

/// Drop a nog node's children from the arena, remapping indices.
fn remove_children(tree: &mut BartTree, node: usize) {
    let (l, r) = tree.nodes[node].children.take().unwrap();
    tree.nodes[node].split = None;
    let mut removed = [l, r];
    removed.sort_unstable();
    for &idx in removed.iter().rev() {
        tree.nodes.remove(idx);
        for n in tree.nodes.iter_mut() {
            if let Some((a, b)) = n.children {
                n.children = Some((
                    if a > idx { a - 1 } else { a },
                    if b > idx { b - 1 } else { b },
                ));
            }
        }
    }
}

fn draw_leaves(tree: &mut BartTree, r: &[f64], sigma2: f64, sigma_mu2: f64, rng: &mut ChaCha8Rng) {
    for i in tree.leaves() {
        let rows = &tree.nodes[i].rows;
        let nl = rows.len() as f64;
        let t: f64 = rows.iter().map(|&j| r[j]).sum();
        let denom = sigma2 + nl * sigma_mu2;
        let mean = sigma_mu2 * t / denom;
        let var = sigma2 * sigma_mu2 / denom;
        let z: f64 = rand_distr::StandardNormal.sample(rng);
        tree.nodes[i].mu = mean + var.sqrt() * z;
    }
}

fn refresh_fit(tree: &BartTree, fit: &mut [f64]) {
    for i in tree.leaves() {
        let mu = tree.nodes[i].mu;
        for &j in &tree.nodes[i].rows {
            fit[j] = mu;
        }
    }
}
