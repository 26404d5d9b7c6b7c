//! George-McCulloch stochastic search variable selection.
//!
//! Slopes are given the two-point normal mixture
//!
//! ```text
//! beta_j | gamma_j, s2 ~ N(0, s2 * v1)   if gamma_j = 1
//! beta_j | gamma_j, s2 ~ N(0, s2 * v0)   if gamma_j = 0
//! gamma_j ~ Bernoulli(prior_inclusion)
//! ```
//!
//! so a single spike/slab pair suits all slopes after internal
//! standardization. Reported coefficient draws are rescaled back to original
//! units; inclusion indicators and PIPs refer to the standardized design.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::gaussian::parameter_names;
use super::{draw_inv_gamma, draw_mvn_precision, sub_seed, PosteriorDraws, RunConfig};
use crate::dataset::{standardize, ProvincialDataset};
use crate::error::{Error, Result};

const INTERCEPT_VARIANCE: f64 = 1e6;
const SIGMA_IG_SHAPE: f64 = 3.0;
const SIGMA_IG_RATE: f64 = 2.0;

/// Spike/slab variances (as multiples of sigma2) and the prior inclusion
/// probability.
#[derive(Debug, Clone, Copy)]
pub struct SsvsConfig {
    pub spike_variance: f64,
    pub slab_variance: f64,
    pub prior_inclusion: f64,
}

impl Default for SsvsConfig {
    fn default() -> Self {
        Self {
            spike_variance: 0.001,
            slab_variance: 10.0,
            prior_inclusion: 0.5,
        }
    }
}

impl SsvsConfig {
    fn validate(&self) -> Result<()> {
        if self.spike_variance <= 0.0 || self.slab_variance <= self.spike_variance {
            return Err(Error::InvalidConfig(
                "need 0 < spike_variance << slab_variance".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.prior_inclusion) || self.prior_inclusion == 0.0 {
            return Err(Error::InvalidConfig(
                "prior_inclusion must lie in (0, 1)".into(),
            ));
        }
        Ok(())
    }
}

/// Binary inclusion indicators per retained draw plus the derived PIP vector.
#[derive(Debug, Clone)]
pub struct InclusionDraws {
    pub predictor_names: Vec<String>,
    pub indicators: Vec<Vec<bool>>,
    pub pip: Vec<f64>,
}

impl InclusionDraws {
    fn from_indicators(names: Vec<String>, indicators: Vec<Vec<bool>>) -> Self {
        let p = names.len();
        let d = indicators.len() as f64;
        let mut pip = vec![0.0; p];
        for row in &indicators {
            for (j, &g) in row.iter().enumerate() {
                if g {
                    pip[j] += 1.0;
                }
            }
        }
        for v in pip.iter_mut() {
            *v /= d;
        }
        Self {
            predictor_names: names,
            indicators,
            pip,
        }
    }
}

/// Run the SSVS Gibbs sampler; coefficient draws are reported on original
/// scales, indicators on the internally standardized design.
pub fn ssvs(
    data: &ProvincialDataset,
    config: &SsvsConfig,
    run: &RunConfig,
) -> Result<(PosteriorDraws, InclusionDraws)> {
    run.validate()?;
    config.validate()?;
    let (z, std) = standardize(data)?;
    let zi = z.insert_column(0, 1.0);
    let names = parameter_names(data);
    let k = names.len();
    let per_chain = run.retained_per_chain();
    let mut values = vec![0.0; run.chains * per_chain * k];
    let mut indicators: Vec<Vec<bool>> = Vec::with_capacity(run.chains * per_chain);

    for chain in 0..run.chains {
        let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(run.seed, chain as u64));
        let chunk = &mut values[chain * per_chain * k..(chain + 1) * per_chain * k];
        run_chain(
            &zi,
            &data.outcome,
            config,
            run,
            &std.means,
            &std.sds,
            &mut rng,
            chunk,
            &mut indicators,
        )?;
    }
    let draws = PosteriorDraws::new(
        names,
        values,
        run.chains,
        per_chain,
        run.burn_in,
        run.thin,
        run.seed,
    )?;
    let incl = InclusionDraws::from_indicators(data.predictor_names.clone(), indicators);
    Ok((draws, incl))
}

#[allow(clippy::too_many_arguments)]
fn run_chain(
    zi: &DMatrix<f64>,
    y: &DVector<f64>,
    config: &SsvsConfig,
    run: &RunConfig,
    means: &[f64],
    sds: &[f64],
    rng: &mut ChaCha8Rng,
    out: &mut [f64],
    indicators: &mut Vec<Vec<bool>>,
) -> Result<()> {
    let n = zi.nrows();
    let p = zi.ncols() - 1;
    let ztz = zi.transpose() * zi;
    let zty = zi.transpose() * y;
    let pi = config.prior_inclusion;

    let mut gamma = vec![true; p];
    let mut sigma2 = 1.0;
    let mut kept = 0;
    for it in 0..run.iterations {
        let v1 = config.slab_variance * sigma2;
        let v0 = config.spike_variance * sigma2;
        let mut pv = Vec::with_capacity(p + 1);
        pv.push(INTERCEPT_VARIANCE);
        pv.extend(gamma.iter().map(|&g| if g { v1 } else { v0 }));
        let q = &ztz / sigma2
            + DMatrix::from_diagonal(&DVector::from_iterator(p + 1, pv.iter().map(|v| 1.0 / v)));
        let b = &zty / sigma2;
        let beta = draw_mvn_precision(&q, &b, rng, it)?;

        // gamma_j | beta_j: Bernoulli from the two normal densities at beta_j
        for j in 0..p {
            let bj = beta[j + 1];
            let log1 = -0.5 * v1.ln() - bj * bj / (2.0 * v1);
            let log0 = -0.5 * v0.ln() - bj * bj / (2.0 * v0);
            let prob = 1.0 / (1.0 + (1.0 - pi) / pi * (log0 - log1).exp());
            gamma[j] = rng.gen::<f64>() < prob;
        }

        let resid = y - zi * &beta;
        let rss = resid.dot(&resid);
        // the spike/slab prior scales with sigma2, so the full conditional
        // picks up the quadratic form beta' V^{-1} beta (V in sigma2 units)
        let prior_quad: f64 = beta[0] * beta[0] / INTERCEPT_VARIANCE
            + (0..p)
                .map(|j| {
                    let mult = if gamma[j] {
                        config.slab_variance
                    } else {
                        config.spike_variance
                    };
                    beta[j + 1] * beta[j + 1] / mult
                })
                .sum::<f64>();
        sigma2 = draw_inv_gamma(
            SIGMA_IG_SHAPE + (n + p + 1) as f64 / 2.0,
            SIGMA_IG_RATE + rss / 2.0 + prior_quad / 2.0,
            rng,
        );

        if it >= run.burn_in && (it - run.burn_in) % run.thin == 0 {
            // rescale to original units per draw
            let row = &mut out[kept * (p + 2)..(kept + 1) * (p + 2)];
            let mut intercept = beta[0];
            for j in 0..p {
                let slope = beta[j + 1] / sds[j];
                row[j + 1] = slope;
                intercept -= slope * means[j];
            }
            row[0] = intercept;
            row[p + 1] = sigma2;
            indicators.push(gamma.clone());
            kept += 1;
        }
    }
    Ok(())
}
