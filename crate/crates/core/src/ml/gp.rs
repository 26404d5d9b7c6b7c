//! Zero-mean Gaussian-process regression with a squared-exponential ARD
//! kernel and constant noise, fit by multi-start gradient ascent on the log
//! marginal likelihood over log hyperparameters.
//!
//! ```text
//! k(x, x') = s2 * exp( -0.5 * sum_d ((x_d - x'_d)/l_d)^2 ) + n2 * 1[x = x']
//! ```
//!
//! Callers supply standardized predictors and a centered outcome.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::Predictor;
use crate::bayes::sub_seed;
use crate::error::{Error, Result};

/// SE-ARD kernel hyperparameters (all positive).
#[derive(Debug, Clone)]
pub struct GpConfig {
    pub length_scales: Vec<f64>,
    pub signal_variance: f64,
    pub noise_variance: f64,
}

impl GpConfig {
    pub fn isotropic(p: usize, length: f64, signal: f64, noise: f64) -> Self {
        Self {
            length_scales: vec![length; p],
            signal_variance: signal,
            noise_variance: noise,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.length_scales.iter().any(|l| *l <= 0.0)
            || self.signal_variance <= 0.0
            || self.noise_variance <= 0.0
        {
            return Err(Error::InvalidConfig(
                "GP hyperparameters must be positive".into(),
            ));
        }
        Ok(())
    }

    fn to_log(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.length_scales.iter().map(|l| l.ln()).collect();
        v.push(self.signal_variance.ln());
        v.push(self.noise_variance.ln());
        v
    }

    fn from_log(theta: &[f64]) -> Self {
        let p = theta.len() - 2;
        Self {
            length_scales: theta[..p].iter().map(|t| t.exp()).collect(),
            signal_variance: theta[p].exp(),
            noise_variance: theta[p + 1].exp(),
        }
    }
}

/// Box clamp for log hyperparameters, preventing degenerate length scales.
const LOG_LOWER: f64 = -6.907_755_278_982_137; // ln(1e-3)
const LOG_UPPER: f64 = 6.907_755_278_982_137; // ln(1e3)

/// Optimized hyperparameters plus the trained conditional-mean predictor.
#[derive(Debug, Clone)]
pub struct GpFit {
    pub config: GpConfig,
    pub log_marginal: f64,
    x_train: DMatrix<f64>,
    alpha: DVector<f64>,
}

impl GpFit {
    /// Standard GP conditional mean k(x*, X) alpha.
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let n = self.x_train.nrows();
        let mut acc = 0.0;
        for i in 0..n {
            let mut d2 = 0.0;
            for (d, &l) in self.config.length_scales.iter().enumerate() {
                let diff = (row[d] - self.x_train[(i, d)]) / l;
                d2 += diff * diff;
            }
            acc += self.config.signal_variance * (-0.5 * d2).exp() * self.alpha[i];
        }
        acc
    }
}

impl Predictor for GpFit {
    fn predict_row(&self, row: &[f64]) -> f64 {
        GpFit::predict_row(self, row)
    }
}

/// Kernel matrix without the noise term.
fn kernel_matrix(x: &DMatrix<f64>, config: &GpConfig) -> DMatrix<f64> {
    let n = x.nrows();
    let p = x.ncols();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let mut d2 = 0.0;
            for d in 0..p {
                let diff = (x[(i, d)] - x[(j, d)]) / config.length_scales[d];
                d2 += diff * diff;
            }
            let v = config.signal_variance * (-0.5 * d2).exp();
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

/// Cholesky of K + noise I with jitter escalation 1e-10 -> 1e-6.
fn chol_with_jitter(k: &DMatrix<f64>, noise: f64) -> Result<Cholesky<f64, nalgebra::Dyn>> {
    let n = k.nrows();
    let mut jitter = 0.0;
    loop {
        let mut m = k.clone();
        for i in 0..n {
            m[(i, i)] += noise + jitter;
        }
        if let Some(c) = Cholesky::new(m) {
            return Ok(c);
        }
        jitter = if jitter == 0.0 { 1e-10 } else { jitter * 100.0 };
        if jitter > 1e-6 {
            return Err(Error::NumericalFailure {
                iteration: 0,
                detail: "GP kernel not positive definite even at jitter 1e-6".into(),
            });
        }
    }
}

/// Log marginal likelihood and its gradient with respect to the log
/// hyperparameters (length scales, signal variance, noise variance).
pub fn log_marginal_and_grad(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    config: &GpConfig,
) -> Result<(f64, Vec<f64>)> {
    config.validate()?;
    let n = x.nrows();
    let p = x.ncols();
    let k = kernel_matrix(x, config);
    let chol = chol_with_jitter(&k, config.noise_variance)?;
    let alpha = chol.solve(y);
    let log_det: f64 = (0..n).map(|i| chol.l()[(i, i)].ln() * 2.0).sum();
    let lml = -0.5 * y.dot(&alpha)
        - 0.5 * log_det
        - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();

    // gradient: 0.5 tr((alpha alpha' - K^{-1}) dK/dtheta)
    let kinv = chol.inverse();
    let outer = &alpha * alpha.transpose();
    let a = outer - kinv;
    let mut grad = vec![0.0; p + 2];
    for i in 0..n {
        for j in 0..n {
            let kij = k[(i, j)];
            let aij = a[(i, j)];
            // per-dimension log length scale: dK/d(log l_d) = K_ij * r_d^2
            for d in 0..p {
                let rd = (x[(i, d)] - x[(j, d)]) / config.length_scales[d];
                grad[d] += 0.5 * aij * kij * rd * rd;
            }
            // log signal variance: dK/d(log s2) = K_ij (noise-free part)
            grad[p] += 0.5 * aij * kij;
        }
        // log noise variance: dK/d(log n2) = n2 on the diagonal
        grad[p + 1] += 0.5 * a[(i, i)] * config.noise_variance;
    }
    Ok((lml, grad))
}

/// Maximize the log marginal likelihood from `init` and seeded random
/// restarts; the best restart wins.
pub fn fit_gp(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    init: &GpConfig,
    restarts: usize,
    seed: u64,
) -> Result<GpFit> {
    init.validate()?;
    let p = x.ncols();
    if init.length_scales.len() != p {
        return Err(Error::InvalidConfig(format!(
            "expected {p} length scales, got {}",
            init.length_scales.len()
        )));
    }
    let mut best: Option<(f64, Vec<f64>)> = None;
    for r in 0..restarts.max(1) {
        let theta0 = if r == 0 {
            init.to_log()
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(seed, r as u64));
            let mut t = Vec::with_capacity(p + 2);
            for _ in 0..p {
                t.push(rng.gen_range(0.7..3.0)); // lengths in ~[2, 20]
            }
            t.push(rng.gen_range(-1.0..2.0)); // signal variance
            t.push(rng.gen_range(-1.0..1.0)); // noise variance
            t
        };
        if let Ok((lml, theta)) = ascend(x, y, theta0) {
            if best.as_ref().map_or(true, |(b, _)| lml > *b) {
                best = Some((lml, theta));
            }
        }
    }
    let (lml, theta) = best.ok_or(Error::NumericalFailure {
        iteration: 0,
        detail: "every GP restart failed".into(),
    })?;
    let config = GpConfig::from_log(&theta);
    let k = kernel_matrix(x, &config);
    let chol = chol_with_jitter(&k, config.noise_variance)?;
    let alpha = chol.solve(y);
    Ok(GpFit {
        config,
        log_marginal: lml,
        x_train: x.clone(),
        alpha,
    })
}

/// Gradient ascent with an adaptive step and box clamps on the log scale.
fn ascend(x: &DMatrix<f64>, y: &DVector<f64>, mut theta: Vec<f64>) -> Result<(f64, Vec<f64>)> {
    clamp(&mut theta);
    let (mut lml, mut grad) = log_marginal_and_grad(x, y, &GpConfig::from_log(&theta))?;
    let mut step = 0.1;
    for _ in 0..300 {
        let cand: Vec<f64> = theta.iter().zip(&grad).map(|(t, g)| t + step * g).collect();
        let mut cand = cand;
        clamp(&mut cand);
        match log_marginal_and_grad(x, y, &GpConfig::from_log(&cand)) {
            Ok((l2, g2)) if l2.is_finite() && l2 > lml => {
                let delta = l2 - lml;
                theta = cand;
                lml = l2;
                grad = g2;
                step = (step * 1.2).min(1.0);
                if delta < 1e-9 {
                    break;
                }
            }
            _ => {
                step *= 0.5;
                if step < 1e-8 {
                    break;
                }
            }
        }
    }
    Ok((lml, theta))
}

fn clamp(theta: &mut [f64]) {
    for t in theta.iter_mut() {
        *t = t.clamp(LOG_LOWER, LOG_UPPER);
    }
}
