//! Scale-mixture Gibbs samplers for the three shrinkage families.
//!
//! Each family is the stated prior expressed through an exact conditionally
//! conjugate augmentation:
//!
//! * Bayesian ridge: Student-t(1, 0, scale) slopes, i.e. normal slopes with
//!   inverse-gamma local variances;
//! * Bayesian LASSO: double-exponential slopes via exponential local
//!   variances with a Gamma hyperprior on the squared rate (Park-Casella);
//! * horseshoe: half-Cauchy local and global scales, both expanded through
//!   inverse-gamma auxiliaries (Makalic-Schmidt):
//!
//! ```text
//! beta_j | lam_j, tau, s2 ~ N(0, s2 tau^2 lam_j^2)
//! lam_j^2 | nu_j ~ IG(1/2, 1/nu_j),  nu_j ~ IG(1/2, 1)
//! tau^2  | xi   ~ IG(1/2, 1/xi),    xi   ~ IG(1/2, 1/s_g^2)
//! ```
//!
//! The intercept carries an effectively flat prior (variance 1e6) and sigma2
//! the same IG(3, 2) prior as the Gaussian-prior model. Predictors enter on
//! their original scales.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, InverseGaussian};

use super::gaussian::parameter_names;
use super::{draw_inv_gamma, draw_mvn_precision, sub_seed, with_intercept, PosteriorDraws, RunConfig};
use crate::dataset::ProvincialDataset;
use crate::error::{Error, Result};

const INTERCEPT_VARIANCE: f64 = 1e6;
const SIGMA_IG_SHAPE: f64 = 3.0;
const SIGMA_IG_RATE: f64 = 2.0;

/// Which global-local prior the sampler targets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ShrinkageFamily {
    /// Student-t(1, 0, scale) slopes.
    BayesRidge { scale: f64 },
    /// Double-exponential slopes; squared rate ~ Gamma(shape, rate).
    BayesLasso { hyper_shape: f64, hyper_rate: f64 },
    /// Half-Cauchy local scales and a half-Cauchy(0, global_scale) global.
    Horseshoe { global_scale: f64 },
}

impl ShrinkageFamily {
    pub fn bayes_ridge() -> Self {
        ShrinkageFamily::BayesRidge { scale: 1.0 }
    }

    pub fn bayes_lasso() -> Self {
        ShrinkageFamily::BayesLasso {
            hyper_shape: 1.0,
            hyper_rate: 1.0,
        }
    }

    pub fn horseshoe() -> Self {
        ShrinkageFamily::Horseshoe { global_scale: 1.0 }
    }

    pub fn label(&self) -> &'static str {
        match self {
            ShrinkageFamily::BayesRidge { .. } => "bayes_ridge",
            ShrinkageFamily::BayesLasso { .. } => "bayes_lasso",
            ShrinkageFamily::Horseshoe { .. } => "horseshoe",
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            ShrinkageFamily::BayesRidge { scale } => *scale > 0.0,
            ShrinkageFamily::BayesLasso {
                hyper_shape,
                hyper_rate,
            } => *hyper_shape > 0.0 && *hyper_rate > 0.0,
            ShrinkageFamily::Horseshoe { global_scale } => *global_scale > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!(
                "non-positive hyperparameter for {}",
                self.label()
            )))
        }
    }
}

/// Sample the chosen shrinkage posterior; retained draws cover
/// (intercept, slopes.., sigma2).
pub fn gibbs_shrinkage(
    data: &ProvincialDataset,
    family: ShrinkageFamily,
    run: &RunConfig,
) -> Result<PosteriorDraws> {
    run.validate()?;
    family.validate()?;
    let x = with_intercept(&data.predictors);
    let names = parameter_names(data);
    let k = names.len();
    let per_chain = run.retained_per_chain();
    let mut values = vec![0.0; run.chains * per_chain * k];
    for chain in 0..run.chains {
        let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(run.seed, chain as u64));
        let chunk = &mut values[chain * per_chain * k..(chain + 1) * per_chain * k];
        run_chain(&x, &data.outcome, data, family, run, &mut rng, chunk)?;
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

fn check_local(
    v: f64,
    name: &str,
    iteration: usize,
) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(Error::NumericalFailure {
            iteration,
            detail: format!("divergent local scale for `{name}`: {v}"),
        })
    }
}

#[allow(clippy::too_many_arguments)]
fn run_chain(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    data: &ProvincialDataset,
    family: ShrinkageFamily,
    run: &RunConfig,
    rng: &mut ChaCha8Rng,
    out: &mut [f64],
) -> Result<()> {
    let n = x.nrows();
    let p = x.ncols() - 1;
    let xtx = x.transpose() * x;
    let xty = x.transpose() * y;

    let mut sigma2 = 1.0;
    let mut local = vec![1.0f64; p]; // local variances (family-specific meaning)
    let mut nu = vec![1.0f64; p]; // horseshoe auxiliaries
    let mut tau2 = 1.0f64;
    let mut xi = 1.0f64;
    let mut zeta2 = 1.0f64; // lasso squared rate

    let mut kept = 0;
    for it in 0..run.iterations {
        // slope prior variances for this sweep
        let mut pv = Vec::with_capacity(p + 1);
        pv.push(INTERCEPT_VARIANCE);
        match family {
            ShrinkageFamily::BayesRidge { .. } => pv.extend(local.iter().copied()),
            ShrinkageFamily::BayesLasso { .. } => {
                pv.extend(local.iter().map(|t2| sigma2 * t2))
            }
            ShrinkageFamily::Horseshoe { .. } => {
                pv.extend(local.iter().map(|l2| sigma2 * tau2 * l2))
            }
        }

        let q = &xtx / sigma2
            + DMatrix::from_diagonal(&DVector::from_iterator(p + 1, pv.iter().map(|v| 1.0 / v)));
        let b = &xty / sigma2;
        let beta = draw_mvn_precision(&q, &b, rng, it)?;

        // local / global scale updates
        match family {
            ShrinkageFamily::BayesRidge { scale } => {
                for j in 0..p {
                    let bj = beta[j + 1];
                    let v = draw_inv_gamma(1.0, (scale * scale + bj * bj) / 2.0, rng);
                    local[j] = check_local(v, &data.predictor_names[j], it)?;
                }
            }
            ShrinkageFamily::BayesLasso {
                hyper_shape,
                hyper_rate,
            } => {
                for j in 0..p {
                    let bj = beta[j + 1];
                    let b2 = (bj * bj).max(1e-300);
                    let mean = (zeta2 * sigma2 / b2).sqrt();
                    let inv_t2 = InverseGaussian::new(mean, zeta2)
                        .map_err(|e| Error::NumericalFailure {
                            iteration: it,
                            detail: format!("inverse-Gaussian setup: {e}"),
                        })?
                        .sample(rng);
                    local[j] =
                        check_local(1.0 / inv_t2.max(1e-300), &data.predictor_names[j], it)?;
                }
                let sum_t2: f64 = local.iter().sum();
                let g = Gamma::new(hyper_shape + p as f64, 1.0 / (hyper_rate + sum_t2 / 2.0))
                    .unwrap();
                zeta2 = g.sample(rng);
            }
            ShrinkageFamily::Horseshoe { global_scale } => {
                let mut sum_ratio = 0.0;
                for j in 0..p {
                    let bj = beta[j + 1];
                    let l2 = draw_inv_gamma(
                        1.0,
                        1.0 / nu[j] + bj * bj / (2.0 * tau2 * sigma2),
                        rng,
                    );
                    local[j] = check_local(l2, &data.predictor_names[j], it)?;
                    nu[j] = draw_inv_gamma(1.0, 1.0 + 1.0 / local[j], rng);
                    sum_ratio += bj * bj / local[j];
                }
                tau2 = check_local(
                    draw_inv_gamma(
                        (p as f64 + 1.0) / 2.0,
                        1.0 / xi + sum_ratio / (2.0 * sigma2),
                        rng,
                    ),
                    "tau",
                    it,
                )?;
                xi = draw_inv_gamma(
                    1.0,
                    1.0 / (global_scale * global_scale) + 1.0 / tau2,
                    rng,
                );
            }
        }

        let resid = y - x * &beta;
        let rss = resid.dot(&resid);
        sigma2 = draw_inv_gamma(
            SIGMA_IG_SHAPE + n as f64 / 2.0,
            SIGMA_IG_RATE + rss / 2.0,
            rng,
        );

        if it >= run.burn_in && (it - run.burn_in) % run.thin == 0 {
            let row = &mut out[kept * (p + 2)..(kept + 1) * (p + 2)];
            for j in 0..=p {
                row[j] = beta[j];
            }
            row[p + 1] = sigma2;
            kept += 1;
        }
    }
    Ok(())
}

/// Convenience: draw a single posterior-mean prediction for new rows.
pub fn posterior_mean_prediction(draws: &PosteriorDraws, rows: &[Vec<f64>]) -> Vec<f64> {
    let p = draws.k - 2; // intercept + p slopes + sigma2
    let d = draws.n_draws() as f64;
    let mut mean_beta = vec![0.0; p + 1];
    for i in 0..draws.n_draws() {
        for j in 0..=p {
            mean_beta[j] += draws.value(i, j) / d;
        }
    }
    rows.iter()
        .map(|r| mean_beta[0] + r.iter().zip(&mean_beta[1..]).map(|(x, b)| x * b).sum::<f64>())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bayes::summarize_posterior;
    use crate::dataset::load_dataset;
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;
    use rand::Rng;
    use std::path::Path;

    fn corpus() -> ProvincialDataset {
        load_dataset(Path::new(crate::CORPUS_PATH)).unwrap()
    }

    #[test]
    fn horseshoe_reference_ict_row() {
        let d = corpus();
        let draws =
            gibbs_shrinkage(&d, ShrinkageFamily::horseshoe(), &RunConfig::shrinkage_default(42))
                .unwrap();
        let s = summarize_posterior(&draws).unwrap();
        let ict = &s[draws.param_index("ict").unwrap()];
        assert_abs_diff_eq!(ict.mean, -0.258, epsilon = 0.05);
        assert_abs_diff_eq!(ict.q025, -0.457, epsilon = 0.08);
        assert_abs_diff_eq!(ict.q975, -0.013, epsilon = 0.08);
        // ICT is the only slope whose interval excludes zero
        for j in 0..d.p() {
            let row = &s[j + 1];
            let excludes = row.q025 > 0.0 || row.q975 < 0.0;
            assert_eq!(excludes, row.name == "ict", "{}", row.name);
        }
    }

    #[test]
    fn horseshoe_pure_noise_shrinks_everything() {
        use rand_chacha::ChaCha8Rng;
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 40;
        let p = 9;
        let pred = DMatrix::from_fn(n, p, |_, _| rng.gen::<f64>() * 4.0 - 2.0);
        let y: Vec<f64> = (0..n).map(|_| 10.0 + rng.gen::<f64>() * 2.0 - 1.0).collect();
        let d = ProvincialDataset::from_parts(
            (0..n).map(|i| format!("r{i}")).collect(),
            y,
            pred,
            (0..p).map(|j| format!("x{j}")).collect(),
            (0..p).map(|_| "%".to_string()).collect(),
        )
        .unwrap();
        let draws = gibbs_shrinkage(
            &d,
            ShrinkageFamily::horseshoe(),
            &RunConfig {
                iterations: 2_000,
                burn_in: 1_000,
                thin: 1,
                chains: 2,
                seed: 9,
            },
        )
        .unwrap();
        let s = summarize_posterior(&draws).unwrap();
        for j in 0..p {
            assert!(
                s[j + 1].mean.abs() < 0.1,
                "{} mean {}",
                s[j + 1].name,
                s[j + 1].mean
            );
        }
    }

    #[test]
    fn ridge_and_lasso_run_and_keep_signs() {
        let d = corpus();
        let run = RunConfig {
            iterations: 2_000,
            burn_in: 1_000,
            thin: 1,
            chains: 2,
            seed: 21,
        };
        for fam in [ShrinkageFamily::bayes_ridge(), ShrinkageFamily::bayes_lasso()] {
            let draws = gibbs_shrinkage(&d, fam, &run).unwrap();
            let s = summarize_posterior(&draws).unwrap();
            let ict = &s[draws.param_index("ict").unwrap()];
            assert!(ict.mean < 0.0, "{} ICT mean {}", fam.label(), ict.mean);
            let sigma2 = &s[draws.param_index("sigma2").unwrap()];
            assert!(sigma2.mean > 0.0);
        }
    }

    #[test]
    fn shrinkage_contracts_relative_to_gaussian_prior() {
        use crate::bayes::gaussian::{gibbs_gaussian, GaussianPriorSpec};
        let d = corpus();
        let m5 = gibbs_gaussian(
            &d,
            &GaussianPriorSpec::default_for(d.p()),
            &RunConfig {
                iterations: 4_000,
                burn_in: 2_000,
                thin: 1,
                chains: 2,
                seed: 13,
            },
        )
        .unwrap();
        let hs = gibbs_shrinkage(
            &d,
            ShrinkageFamily::horseshoe(),
            &RunConfig {
                iterations: 4_000,
                burn_in: 2_000,
                thin: 1,
                chains: 2,
                seed: 13,
            },
        )
        .unwrap();
        let sm5 = summarize_posterior(&m5).unwrap();
        let shs = summarize_posterior(&hs).unwrap();
        for j in 1..=d.p() {
            assert!(
                shs[j].mean.abs() <= sm5[j].mean.abs() + 0.1,
                "{}: |{}| > |{}| + 0.1",
                shs[j].name,
                shs[j].mean,
                sm5[j].mean
            );
        }
    }
}
