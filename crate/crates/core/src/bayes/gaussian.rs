//! Conjugate Gibbs sampler for the Gaussian-prior linear model (M5).
//!
//! Full conditionals:
//!
//! ```text
//! beta | sigma2 ~ N( (X'X/s2 + S0^{-1})^{-1} X'y/s2 , (X'X/s2 + S0^{-1})^{-1} )
//! sigma2 | beta ~ Inv-Gamma(a0 + n/2, b0 + RSS/2)
//! ```
//!
//! Predictors enter on their original scales.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{draw_inv_gamma, draw_mvn_precision, sub_seed, with_intercept, PosteriorDraws, RunConfig};
use crate::dataset::ProvincialDataset;
use crate::error::Result;

/// Diagonal Gaussian prior on (intercept, slopes) plus the inverse-gamma
/// noise prior.
#[derive(Debug, Clone)]
pub struct GaussianPriorSpec {
    /// Prior variances, intercept first (length p+1).
    pub prior_variances: Vec<f64>,
    pub ig_shape: f64,
    pub ig_rate: f64,
}

impl GaussianPriorSpec {
    /// Intercept variance 100, slope variance 25, sigma2 ~ IG(3, 2).
    pub fn default_for(p: usize) -> Self {
        let mut v = vec![25.0; p + 1];
        v[0] = 100.0;
        Self {
            prior_variances: v,
            ig_shape: 3.0,
            ig_rate: 2.0,
        }
    }

    /// Same defaults but with every slope variance replaced by `scale`
    /// (used by the prior-sensitivity sweep).
    pub fn with_slope_variance(p: usize, scale: f64) -> Self {
        let mut s = Self::default_for(p);
        for v in s.prior_variances.iter_mut().skip(1) {
            *v = scale;
        }
        s
    }
}

pub(crate) fn parameter_names(data: &ProvincialDataset) -> Vec<String> {
    let mut names = vec!["intercept".to_string()];
    names.extend(data.predictor_names.iter().cloned());
    names.push("sigma2".to_string());
    names
}

/// Run the conjugate Gibbs sampler; retained draws cover
/// (intercept, slopes.., sigma2).
pub fn gibbs_gaussian(
    data: &ProvincialDataset,
    prior: &GaussianPriorSpec,
    run: &RunConfig,
) -> Result<PosteriorDraws> {
    let x = with_intercept(&data.predictors);
    gibbs_gaussian_design(&x, &data.outcome, parameter_names(data), prior, run)
}

/// Same sampler against an arbitrary design matrix (leading intercept column
/// included); used by the prior-sensitivity sweep, which fits standardized
/// designs that are not valid `ProvincialDataset`s.
pub(crate) fn gibbs_gaussian_design(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    names: Vec<String>,
    prior: &GaussianPriorSpec,
    run: &RunConfig,
) -> Result<PosteriorDraws> {
    run.validate()?;
    let k = names.len();
    let per_chain = run.retained_per_chain();
    let mut values = vec![0.0; run.chains * per_chain * k];

    for chain in 0..run.chains {
        let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(run.seed, chain as u64));
        let chunk =
            &mut values[chain * per_chain * k..(chain + 1) * per_chain * k];
        run_chain(x, y, prior, run, &mut rng, chunk)?;
    }
    PosteriorDraws::new(
        names,
        values,
        run.chains,
        per_chain,
        run.burn_in,
        run.thin,
        run.seed,
    )
}

fn run_chain(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    prior: &GaussianPriorSpec,
    run: &RunConfig,
    rng: &mut ChaCha8Rng,
    out: &mut [f64],
) -> Result<()> {
    let n = x.nrows();
    let pk = x.ncols();
    let xtx = x.transpose() * x;
    let xty = x.transpose() * y;
    let prior_prec = DMatrix::from_diagonal(&DVector::from_iterator(
        pk,
        prior.prior_variances.iter().map(|v| 1.0 / v),
    ));

    let mut sigma2 = 1.0;
    let mut kept = 0;
    for it in 0..run.iterations {
        let q = &xtx / sigma2 + &prior_prec;
        let b = &xty / sigma2;
        let beta = draw_mvn_precision(&q, &b, rng, it)?;
        let resid = y - x * &beta;
        let rss = resid.dot(&resid);
        sigma2 = draw_inv_gamma(prior.ig_shape + n as f64 / 2.0, prior.ig_rate + rss / 2.0, rng);

        if it >= run.burn_in && (it - run.burn_in) % run.thin == 0 {
            let row = &mut out[kept * (pk + 1)..(kept + 1) * (pk + 1)];
            for j in 0..pk {
                row[j] = beta[j];
            }
            row[pk] = sigma2;
            kept += 1;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bayes::summarize_posterior;
    use crate::dataset::load_dataset;
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;
    use std::path::Path;

    fn corpus() -> ProvincialDataset {
        load_dataset(Path::new(crate::CORPUS_PATH)).unwrap()
    }

    #[test]
    fn reference_ict_row() {
        let d = corpus();
        let draws = gibbs_gaussian(
            &d,
            &GaussianPriorSpec::default_for(d.p()),
            &RunConfig::gaussian_default(42),
        )
        .unwrap();
        assert_eq!(draws.n_draws(), 2000);
        let s = summarize_posterior(&draws).unwrap();
        let ict = &s[draws.param_index("ict").unwrap()];
        assert_abs_diff_eq!(ict.mean, -0.337, epsilon = 0.03);
        assert_abs_diff_eq!(ict.q025, -0.587, epsilon = 0.05);
        assert_abs_diff_eq!(ict.q975, -0.092, epsilon = 0.05);
        assert_abs_diff_eq!(ict.prob_negative, 0.996, epsilon = 0.01);
    }

    #[test]
    fn determinism_same_seed() {
        let d = corpus();
        let run = RunConfig {
            iterations: 400,
            burn_in: 200,
            thin: 2,
            chains: 2,
            seed: 7,
        };
        let prior = GaussianPriorSpec::default_for(d.p());
        let a = gibbs_gaussian(&d, &prior, &run).unwrap();
        let b = gibbs_gaussian(&d, &prior, &run).unwrap();
        for j in 0..a.k {
            assert_eq!(a.column(j), b.column(j));
        }
    }

    // Closed-form conjugate oracle for the intercept-only model:
    // with prior beta ~ N(0, v0), sigma2 ~ IG(a0, b0), the joint posterior is
    // not factorizable, so the oracle integrates over a fine sigma2 grid.
    #[test]
    fn intercept_only_matches_conjugate_oracle() {
        let y = vec![1.2, 0.7, 1.9, 1.4, 0.3, 1.1, 0.9, 1.6];
        let n = y.len();
        let pred = DMatrix::from_fn(n, 1, |i, _| (i % 3) as f64 + 1.0);
        // slope prior variance tiny so the model is effectively intercept-only
        let d = ProvincialDataset::from_parts(
            (0..n).map(|i| format!("r{i}")).collect(),
            y.clone(),
            pred,
            vec!["x".into()],
            vec!["%".into()],
        )
        .unwrap();
        let prior = GaussianPriorSpec {
            prior_variances: vec![100.0, 1e-12],
            ig_shape: 3.0,
            ig_rate: 2.0,
        };
        let run = RunConfig {
            iterations: 60_000,
            burn_in: 10_000,
            thin: 1,
            chains: 1,
            seed: 11,
        };
        let draws = gibbs_gaussian(&d, &prior, &run).unwrap();
        let s = summarize_posterior(&draws).unwrap();

        // oracle: E[mu | y] = int E[mu | y, s2] p(s2 | y) ds2 via quadrature
        // over the marginal p(s2 | y) for the intercept-only conjugate model.
        let ybar = y.iter().sum::<f64>() / n as f64;
        let ss: f64 = y.iter().map(|v| (v - ybar) * (v - ybar)).sum();
        let v0 = 100.0;
        let (a0, b0) = (3.0, 2.0);
        let mut num = 0.0;
        let mut den = 0.0;
        let grid: Vec<f64> = (1..4000).map(|i| i as f64 * 0.005).collect();
        for &s2 in &grid {
            // p(y | s2) with mu integrated out: y ~ N(0, s2 I + v0 J)
            let prec_mu = n as f64 / s2 + 1.0 / v0;
            let mu_hat = (n as f64 * ybar / s2) / prec_mu;
            // log marginal likelihood up to constants
            let log_lik = -0.5 * (n as f64) * s2.ln() - 0.5 * prec_mu.ln()
                - 0.5 * (ss + n as f64 * ybar * ybar) / s2
                + 0.5 * mu_hat * mu_hat * prec_mu;
            let log_prior = -(a0 + 1.0) * s2.ln() - b0 / s2;
            let w = (log_lik + log_prior).exp();
            num += w * mu_hat;
            den += w;
        }
        let oracle_mean = num / den;
        let mc_se = s[0].sd / (draws.n_draws() as f64).sqrt() * 3.0;
        assert_abs_diff_eq!(s[0].mean, oracle_mean, epsilon = (2.0 * mc_se).max(0.01));
    }

    #[test]
    fn tiny_prior_variance_pins_slope_at_zero() {
        let d = corpus();
        let mut prior = GaussianPriorSpec::default_for(d.p());
        let ict = d.predictor_names.iter().position(|n| n == "ict").unwrap();
        prior.prior_variances[ict + 1] = 1e-8;
        let run = RunConfig {
            iterations: 3_000,
            burn_in: 1_000,
            thin: 1,
            chains: 1,
            seed: 3,
        };
        let draws = gibbs_gaussian(&d, &prior, &run).unwrap();
        let s = summarize_posterior(&draws).unwrap();
        assert!(s[draws.param_index("ict").unwrap()].mean.abs() < 1e-3);
    }
}
