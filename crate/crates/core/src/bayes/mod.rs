//! MCMC engines for the Gaussian-prior linear model, shrinkage families
//! (Bayesian ridge / LASSO / horseshoe), and spike-and-slab selection, with
//! posterior summaries, convergence diagnostics, WAIC, posterior predictive
//! checks, and the prior-sensitivity sweep.

pub mod diagnostics;
pub mod gaussian;
pub mod predictive;
pub mod shrinkage;
pub mod ssvs;

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Gamma};

use crate::error::{Error, Result};

pub use diagnostics::{convergence, ConvergenceReport};
pub use gaussian::{gibbs_gaussian, GaussianPriorSpec};
pub use predictive::{posterior_predictive, prior_sensitivity, waic, SensitivityRow};
pub use shrinkage::{gibbs_shrinkage, posterior_mean_prediction, ShrinkageFamily};
pub use ssvs::{ssvs, InclusionDraws, SsvsConfig};

/// Chain layout for an MCMC run.
#[derive(Debug, Clone, Copy)]
pub struct RunConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub chains: usize,
    pub seed: u64,
}

impl RunConfig {
    /// Defaults for the single-chain conjugate Gibbs run: 20,000 iterations,
    /// 10,000 burn-in, thinning by 5.
    pub fn gaussian_default(seed: u64) -> Self {
        Self {
            iterations: 20_000,
            burn_in: 10_000,
            thin: 5,
            chains: 1,
            seed,
        }
    }

    /// Defaults for shrinkage runs: 4 chains of 4,000 with 2,000 warm-up.
    pub fn shrinkage_default(seed: u64) -> Self {
        Self {
            iterations: 4_000,
            burn_in: 2_000,
            thin: 1,
            chains: 4,
            seed,
        }
    }

    /// Shortened run used inside LOOCV folds to bound wall time.
    pub fn fold_default(seed: u64) -> Self {
        Self {
            iterations: 2_000,
            burn_in: 1_000,
            thin: 1,
            chains: 2,
            seed,
        }
    }

    pub fn retained_per_chain(&self) -> usize {
        (self.iterations - self.burn_in) / self.thin
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations <= self.burn_in {
            return Err(Error::InvalidConfig(format!(
                "iterations ({}) must exceed burn-in ({})",
                self.iterations, self.burn_in
            )));
        }
        if self.thin == 0 || self.chains == 0 {
            return Err(Error::InvalidConfig("thin and chains must be >= 1".into()));
        }
        Ok(())
    }
}

/// Retained draws, row-major d x k, with chain metadata. Chains are stored
/// consecutively; all chains have the same retained length.
#[derive(Debug, Clone)]
pub struct PosteriorDraws {
    pub names: Vec<String>,
    values: Vec<f64>,
    pub k: usize,
    pub n_chains: usize,
    pub per_chain: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
}

impl PosteriorDraws {
    pub fn new(
        names: Vec<String>,
        values: Vec<f64>,
        n_chains: usize,
        per_chain: usize,
        burn_in: usize,
        thin: usize,
        seed: u64,
    ) -> Result<Self> {
        let k = names.len();
        if values.len() != k * n_chains * per_chain {
            return Err(Error::InvalidConfig(format!(
                "draw buffer size {} inconsistent with {} chains x {} draws x {} params",
                values.len(),
                n_chains,
                per_chain,
                k
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalFailure {
                iteration: 0,
                detail: "non-finite value in retained draws".into(),
            });
        }
        Ok(Self {
            names,
            values,
            k,
            n_chains,
            per_chain,
            burn_in,
            thin,
            seed,
        })
    }

    pub fn n_draws(&self) -> usize {
        self.n_chains * self.per_chain
    }

    pub fn value(&self, draw: usize, param: usize) -> f64 {
        self.values[draw * self.k + param]
    }

    /// All retained values of one parameter, chains concatenated.
    pub fn column(&self, param: usize) -> Vec<f64> {
        (0..self.n_draws()).map(|d| self.value(d, param)).collect()
    }

    /// One chain's values for one parameter.
    pub fn chain_column(&self, chain: usize, param: usize) -> Vec<f64> {
        (chain * self.per_chain..(chain + 1) * self.per_chain)
            .map(|d| self.value(d, param))
            .collect()
    }

    pub fn param_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

/// Per-parameter posterior summary (type-7 quantiles).
#[derive(Debug, Clone)]
pub struct PosteriorSummary {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    pub q025: f64,
    pub q975: f64,
    pub prob_negative: f64,
}

/// Type-7 (linear interpolation) quantile of an unsorted sample.
pub fn quantile_type7(values: &[f64], q: f64) -> f64 {
    let mut s = values.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let h = (s.len() as f64 - 1.0) * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    if lo == hi {
        s[lo]
    } else {
        s[lo] + (h - lo as f64) * (s[hi] - s[lo])
    }
}

/// Mean, SD, 2.5%/97.5% quantiles, and P(beta < 0) for every parameter.
pub fn summarize_posterior(draws: &PosteriorDraws) -> Result<Vec<PosteriorSummary>> {
    if draws.n_draws() < 100 {
        return Err(Error::InvalidConfig(format!(
            "need at least 100 retained draws to summarize, got {}",
            draws.n_draws()
        )));
    }
    let mut out = Vec::with_capacity(draws.k);
    for j in 0..draws.k {
        let col = draws.column(j);
        let n = col.len() as f64;
        let mean = col.iter().sum::<f64>() / n;
        let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        out.push(PosteriorSummary {
            name: draws.names[j].clone(),
            mean,
            sd: var.sqrt(),
            q025: quantile_type7(&col, 0.025),
            q975: quantile_type7(&col, 0.975),
            prob_negative: col.iter().filter(|v| **v < 0.0).count() as f64 / n,
        });
    }
    Ok(out)
}

/// Deterministic sub-seed derivation (splitmix64 over master ^ stream).
pub fn sub_seed(master: u64, stream: u64) -> u64 {
    let mut z = master
        .wrapping_add(0x9e3779b97f4a7c15)
        .wrapping_add(stream.wrapping_mul(0xbf58476d1ce4e5b9));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Draw from N(Q^{-1} b, Q^{-1}) given the precision matrix Q and linear term b.
pub fn draw_mvn_precision<R: Rng>(
    q: &DMatrix<f64>,
    b: &DVector<f64>,
    rng: &mut R,
    iteration: usize,
) -> Result<DVector<f64>> {
    let chol = Cholesky::new(q.clone()).ok_or_else(|| Error::NumericalFailure {
        iteration,
        detail: "conditional precision not positive definite".into(),
    })?;
    let mean = chol.solve(b);
    let z = DVector::from_fn(q.nrows(), |_, _| {
        rand_distr::StandardNormal.sample(rng)
    });
    // solve L' x = z gives x ~ N(0, Q^{-1})
    let lt = chol.l().transpose();
    let x = lt
        .solve_upper_triangular(&z)
        .ok_or_else(|| Error::NumericalFailure {
            iteration,
            detail: "triangular solve failed".into(),
        })?;
    Ok(mean + x)
}

/// Inverse-gamma(shape, rate) draw.
pub fn draw_inv_gamma<R: Rng>(shape: f64, rate: f64, rng: &mut R) -> f64 {
    let g = Gamma::new(shape, 1.0 / rate).unwrap();
    1.0 / g.sample(rng)
}

/// Design matrix with a leading intercept column.
pub fn with_intercept(x: &DMatrix<f64>) -> DMatrix<f64> {
    x.clone().insert_column(0, 1.0)
}
