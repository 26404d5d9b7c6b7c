//! Rank-normalized split-Rhat and bulk effective sample size.
//!
//! Chains are split in half, draws are replaced by normal scores
//! `z = Phi^{-1}((rank - 3/8) / (S + 1/4))` over the pooled sample, and the
//! classical potential-scale-reduction and Geyer initial-monotone-sequence
//! ESS estimators run on the transformed chains.

use statrs::distribution::{ContinuousCDF, Normal};

use super::PosteriorDraws;
use crate::error::{Error, Result};

/// Per-parameter convergence diagnostics.
#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    pub names: Vec<String>,
    pub rhat: Vec<f64>,
    pub ess_bulk: Vec<f64>,
}

impl ConvergenceReport {
    pub fn for_param(&self, name: &str) -> Option<(f64, f64)> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|j| (self.rhat[j], self.ess_bulk[j]))
    }
}

/// Compute rank-normalized split-Rhat and bulk ESS for every parameter.
pub fn convergence(draws: &PosteriorDraws) -> Result<ConvergenceReport> {
    let half = draws.per_chain / 2;
    if half < 4 {
        return Err(Error::InvalidConfig(format!(
            "need at least 4 draws per split chain, got {half}"
        )));
    }
    let mut rhat = Vec::with_capacity(draws.k);
    let mut ess = Vec::with_capacity(draws.k);
    for j in 0..draws.k {
        // split each chain in half
        let mut chains: Vec<Vec<f64>> = Vec::with_capacity(2 * draws.n_chains);
        for c in 0..draws.n_chains {
            let col = draws.chain_column(c, j);
            chains.push(col[..half].to_vec());
            chains.push(col[half..2 * half].to_vec());
        }
        let z = rank_normalize(&chains);
        rhat.push(split_rhat(&z));
        ess.push(bulk_ess(&z).min(draws.n_draws() as f64));
    }
    Ok(ConvergenceReport {
        names: draws.names.clone(),
        rhat,
        ess_bulk: ess,
    })
}

/// Replace pooled draws by normal scores, keeping the chain layout. Ties get
/// the average rank.
fn rank_normalize(chains: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = chains[0].len();
    let total = chains.len() * n;
    let mut indexed: Vec<(f64, usize)> = Vec::with_capacity(total);
    for (c, chain) in chains.iter().enumerate() {
        for (i, &v) in chain.iter().enumerate() {
            indexed.push((v, c * n + i));
        }
    }
    indexed.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut ranks = vec![0.0; total];
    let mut i = 0;
    while i < total {
        let mut j = i;
        while j + 1 < total && indexed[j + 1].0 == indexed[i].0 {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for item in &indexed[i..=j] {
            ranks[item.1] = avg;
        }
        i = j + 1;
    }
    let std_normal = Normal::new(0.0, 1.0).unwrap();
    let s = total as f64;
    let mut out = vec![vec![0.0; n]; chains.len()];
    for c in 0..chains.len() {
        for i in 0..n {
            let u = (ranks[c * n + i] - 0.375) / (s + 0.25);
            out[c][i] = std_normal.inverse_cdf(u);
        }
    }
    out
}

fn chain_mean_var(chain: &[f64]) -> (f64, f64) {
    let n = chain.len() as f64;
    let mean = chain.iter().sum::<f64>() / n;
    let var = chain.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

fn split_rhat(chains: &[Vec<f64>]) -> f64 {
    let m = chains.len() as f64;
    let n = chains[0].len() as f64;
    let stats: Vec<(f64, f64)> = chains.iter().map(|c| chain_mean_var(c)).collect();
    let grand = stats.iter().map(|s| s.0).sum::<f64>() / m;
    let b = n / (m - 1.0)
        * stats
            .iter()
            .map(|s| (s.0 - grand) * (s.0 - grand))
            .sum::<f64>();
    let w = stats.iter().map(|s| s.1).sum::<f64>() / m;
    let var_plus = (n - 1.0) / n * w + b / n;
    (var_plus / w).sqrt()
}

/// Biased (divide by n) autocovariance at lag t about the chain mean.
fn autocov(chain: &[f64], mean: f64, t: usize) -> f64 {
    let n = chain.len();
    (0..n - t)
        .map(|i| (chain[i] - mean) * (chain[i + t] - mean))
        .sum::<f64>()
        / n as f64
}

fn bulk_ess(chains: &[Vec<f64>]) -> f64 {
    let m = chains.len();
    let n = chains[0].len();
    let stats: Vec<(f64, f64)> = chains.iter().map(|c| chain_mean_var(c)).collect();
    let w = stats.iter().map(|s| s.1).sum::<f64>() / m as f64;
    let grand = stats.iter().map(|s| s.0).sum::<f64>() / m as f64;
    let b_over_n = stats
        .iter()
        .map(|s| (s.0 - grand) * (s.0 - grand))
        .sum::<f64>()
        / (m as f64 - 1.0).max(1.0);
    let var_plus = (n as f64 - 1.0) / n as f64 * w + b_over_n;
    if var_plus <= 0.0 {
        return f64::NAN;
    }
    // combined autocorrelations, then Geyer initial monotone sequence on
    // paired sums
    let rho = |t: usize| {
        let acov_mean = chains
            .iter()
            .zip(&stats)
            .map(|(c, s)| autocov(c, s.0, t))
            .sum::<f64>()
            / m as f64;
        1.0 - (w - acov_mean) / var_plus
    };
    // paired sums P_t = rho_{2t} + rho_{2t+1}; accumulate while positive,
    // clipping to keep the sequence non-increasing (P_0 uses rho_0 = 1)
    let max_t = n - 4;
    let mut prev_pair = 1.0 + rho(1);
    let mut sum = prev_pair;
    let mut t = 1;
    while 2 * t + 1 <= max_t {
        let p = rho(2 * t) + rho(2 * t + 1);
        if p <= 0.0 {
            break;
        }
        let p = p.min(prev_pair);
        sum += p;
        prev_pair = p;
        t += 1;
    }
    let tau = (2.0 * sum - 1.0).max(1.0 / (n as f64).log10().max(1.0));
    (m * n) as f64 / tau
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bayes::{gibbs_shrinkage, PosteriorDraws, RunConfig, ShrinkageFamily};
    use crate::dataset::load_dataset;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::Distribution;
    use std::path::Path;

    fn iid_draws(n_chains: usize, per_chain: usize, shift: &[f64], seed: u64) -> PosteriorDraws {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut values = Vec::with_capacity(n_chains * per_chain);
        for c in 0..n_chains {
            for _ in 0..per_chain {
                let z: f64 = rand_distr::StandardNormal.sample(&mut rng);
                values.push(z + shift[c]);
            }
        }
        PosteriorDraws::new(vec!["x".into()], values, n_chains, per_chain, 0, 1, seed).unwrap()
    }

    #[test]
    fn iid_chains_pass() {
        let d = iid_draws(4, 1000, &[0.0; 4], 5);
        let r = convergence(&d).unwrap();
        assert!(r.rhat[0] < 1.01, "rhat {}", r.rhat[0]);
        assert!(r.ess_bulk[0] > 1000.0, "ess {}", r.ess_bulk[0]);
        assert!(r.ess_bulk[0] <= 4000.0);
    }

    #[test]
    fn separated_chains_fail() {
        let d = iid_draws(2, 500, &[0.0, 10.0], 6);
        let r = convergence(&d).unwrap();
        assert!(r.rhat[0] > 1.5, "rhat {}", r.rhat[0]);
    }

    #[test]
    fn single_chain_is_split() {
        // a strong linear trend within one chain must be detected
        let values: Vec<f64> = (0..1000).map(|i| i as f64 / 100.0).collect();
        let d = PosteriorDraws::new(vec!["x".into()], values, 1, 1000, 0, 1, 0).unwrap();
        let r = convergence(&d).unwrap();
        assert!(r.rhat[0] > 1.5, "rhat {}", r.rhat[0]);
    }

    #[test]
    fn too_short_chain_errors() {
        let d = PosteriorDraws::new(vec!["x".into()], vec![0.5; 6], 1, 6, 0, 1, 0).unwrap();
        assert!(convergence(&d).is_err());
    }

    #[test]
    fn autocorrelated_chain_has_low_ess() {
        // AR(1) with phi = 0.9: true ESS factor (1-phi)/(1+phi) ~ 0.053
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut values = Vec::with_capacity(4000);
        for _ in 0..4 {
            let mut x = 0.0;
            for _ in 0..1000 {
                let z: f64 = rand_distr::StandardNormal.sample(&mut rng);
                x = 0.9 * x + z;
                values.push(x);
            }
        }
        let d = PosteriorDraws::new(vec!["x".into()], values, 4, 1000, 0, 1, 17).unwrap();
        let r = convergence(&d).unwrap();
        assert!(
            r.ess_bulk[0] > 80.0 && r.ess_bulk[0] < 500.0,
            "ess {}",
            r.ess_bulk[0]
        );
    }

    #[test]
    fn horseshoe_run_converges() {
        let d = load_dataset(Path::new(crate::CORPUS_PATH)).unwrap();
        let draws = gibbs_shrinkage(
            &d,
            ShrinkageFamily::horseshoe(),
            &RunConfig::shrinkage_default(42),
        )
        .unwrap();
        let r = convergence(&draws).unwrap();
        for j in 0..draws.k {
            assert!(r.rhat[j] <= 1.01, "{}: rhat {}", r.names[j], r.rhat[j]);
            assert!(
                r.ess_bulk[j] > 400.0,
                "{}: ess {}",
                r.names[j],
                r.ess_bulk[j]
            );
        }
    }
}
