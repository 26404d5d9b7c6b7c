//! Frequentist linear estimation: OLS via QR, penalized regression by cyclic
//! coordinate descent, inner leave-one-out lambda tuning, and VIF diagnostics.
//!
//! The penalized objective is
//!
//! ```text
//! (1/2n) ||y - Xb||^2 + lambda * [ alpha*||b||_1 + (1-alpha)*||b||_2^2 ]
//! ```
//!
//! with the intercept unpenalized (b excludes it). The 1/(2n) scaling keeps
//! lambda grids comparable across fold sizes during LOOCV tuning. Under this
//! scaling the ridge (alpha = 0) solution solves the closed-form system
//! (X'X + 2*n*lambda*I) b = X'y, i.e. the internal ridge penalty is
//! lambda' = 2*n*lambda.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::dataset::{CoefficientVector, ProvincialDataset, Scale};
use crate::error::{Error, Result};

/// Penalty strength and L1 mixing weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltyConfig {
    pub lambda: f64,
    pub alpha: f64,
}

impl PenaltyConfig {
    pub fn new(lambda: f64, alpha: f64) -> Result<Self> {
        if lambda < 0.0 {
            return Err(Error::InvalidConfig(format!("lambda must be >= 0, got {lambda}")));
        }
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::InvalidConfig(format!("alpha must be in [0,1], got {alpha}")));
        }
        Ok(Self { lambda, alpha })
    }
}

/// Per-predictor variance inflation factors.
#[derive(Debug, Clone)]
pub struct VifTable {
    pub names: Vec<String>,
    pub vif: Vec<f64>,
    pub mean_vif: f64,
}

impl VifTable {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.vif[i])
    }
}

/// Least squares through column-pivoted QR; errors on rank deficiency.
pub fn fit_ols(y: &DVector<f64>, x: &DMatrix<f64>) -> Result<CoefficientVector> {
    let n = x.nrows();
    let p = x.ncols();
    if n <= p + 1 {
        return Err(Error::SingularDesign(format!(
            "need n > p+1, got n={n}, p={p}"
        )));
    }
    let design = x.clone().insert_column(0, 1.0);
    let qr = design.clone().col_piv_qr();
    // rank check from the R diagonal
    let r = qr.r();
    let max_diag = (0..r.nrows().min(r.ncols()))
        .map(|i| r[(i, i)].abs())
        .fold(0.0f64, f64::max);
    for i in 0..r.nrows().min(r.ncols()) {
        if r[(i, i)].abs() < 1e-10 * max_diag.max(1e-300) {
            return Err(Error::SingularDesign(
                "design matrix with intercept is rank deficient".into(),
            ));
        }
    }
    // least-squares solve via the normal equations (rank already verified)
    let xtx = design.transpose() * &design;
    let xty = design.transpose() * y;
    let beta = Cholesky::new(xtx)
        .ok_or_else(|| Error::SingularDesign("normal equations not positive definite".into()))?
        .solve(&xty);
    let slopes = (1..=p).map(|j| beta[j]).collect();
    Ok(CoefficientVector::new(beta[0], slopes, Scale::Original))
}

/// Result of a coordinate-descent run, including the sweep count.
pub struct CdFit {
    pub coefs: CoefficientVector,
    pub sweeps: usize,
}

const CD_TOL: f64 = 1e-7;
const CD_MAX_SWEEPS: usize = 100_000;

fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

/// Cyclic coordinate descent with soft-thresholding on a standardized design.
/// The intercept is mean(y); descent runs on centered y.
pub fn fit_penalized(
    y: &DVector<f64>,
    x_std: &DMatrix<f64>,
    config: PenaltyConfig,
) -> Result<CoefficientVector> {
    Ok(fit_penalized_warm(y, x_std, config, None)?.coefs)
}

/// Same as [`fit_penalized`] but exposes the sweep count and accepts a warm
/// start (used along the tuning grid).
pub fn fit_penalized_warm(
    y: &DVector<f64>,
    x_std: &DMatrix<f64>,
    config: PenaltyConfig,
    warm: Option<&[f64]>,
) -> Result<CdFit> {
    let n = x_std.nrows();
    let p = x_std.ncols();
    let nf = n as f64;
    let y_mean = y.sum() / nf;
    let yc: Vec<f64> = y.iter().map(|v| v - y_mean).collect();

    let mut beta: Vec<f64> = match warm {
        Some(w) => w.to_vec(),
        None => vec![0.0; p],
    };
    // residual of centered model
    let mut resid = yc.clone();
    for j in 0..p {
        if beta[j] != 0.0 {
            for i in 0..n {
                resid[i] -= x_std[(i, j)] * beta[j];
            }
        }
    }
    // x_j'x_j / n per column
    let col_ss: Vec<f64> = (0..p)
        .map(|j| (0..n).map(|i| x_std[(i, j)] * x_std[(i, j)]).sum::<f64>() / nf)
        .collect();

    let lam = config.lambda;
    let alpha = config.alpha;
    let mut sweeps = 0;
    loop {
        let mut max_change = 0.0f64;
        for j in 0..p {
            let old = beta[j];
            let rho: f64 = (0..n).map(|i| x_std[(i, j)] * resid[i]).sum::<f64>() / nf
                + col_ss[j] * old;
            let new = soft_threshold(rho, lam * alpha) / (col_ss[j] + 2.0 * lam * (1.0 - alpha));
            if new != old {
                let delta = old - new;
                for i in 0..n {
                    resid[i] += x_std[(i, j)] * delta;
                }
                beta[j] = new;
                max_change = max_change.max((new - old).abs());
            }
        }
        sweeps += 1;
        if max_change < CD_TOL {
            break;
        }
        if sweeps >= CD_MAX_SWEEPS {
            return Err(Error::NonConvergence {
                sweeps,
                max_change,
            });
        }
    }
    Ok(CdFit {
        coefs: CoefficientVector::new(y_mean, beta, Scale::Standardized),
        sweeps,
    })
}

/// Penalized objective value (for monotonicity checks).
pub fn penalized_objective(
    y: &DVector<f64>,
    x_std: &DMatrix<f64>,
    coefs: &CoefficientVector,
    config: PenaltyConfig,
) -> f64 {
    let n = x_std.nrows() as f64;
    let mut rss = 0.0;
    for i in 0..x_std.nrows() {
        let pred = coefs.intercept
            + (0..x_std.ncols())
                .map(|j| x_std[(i, j)] * coefs.slopes[j])
                .sum::<f64>();
        rss += (y[i] - pred) * (y[i] - pred);
    }
    let l1: f64 = coefs.slopes.iter().map(|b| b.abs()).sum();
    let l2: f64 = coefs.slopes.iter().map(|b| b * b).sum();
    rss / (2.0 * n) + config.lambda * (config.alpha * l1 + (1.0 - config.alpha) * l2)
}

/// Smallest lambda that zeroes every slope at alpha = 1 on a standardized
/// design: max_j |x_j'(y - mean(y))| / n. For small alpha the L1 threshold
/// weakens, so the grid top is divided by max(alpha, 1e-3) (the pure-ridge
/// endpoint would otherwise be unbounded).
pub fn lambda_max(y: &DVector<f64>, x_std: &DMatrix<f64>, alpha: f64) -> f64 {
    let n = x_std.nrows();
    let nf = n as f64;
    let y_mean = y.sum() / nf;
    let mut max_corr = 0.0f64;
    for j in 0..x_std.ncols() {
        let c: f64 = (0..n).map(|i| x_std[(i, j)] * (y[i] - y_mean)).sum::<f64>() / nf;
        max_corr = max_corr.max(c.abs());
    }
    max_corr / alpha.max(1e-3)
}

/// Default 100-point log-spaced grid from lambda_max down to lambda_max*1e-4.
pub fn default_grid(y: &DVector<f64>, x_std: &DMatrix<f64>, alpha: f64) -> Vec<f64> {
    let top = lambda_max(y, x_std, alpha);
    let bottom = top * 1e-4;
    let k = 100;
    (0..k)
        .map(|i| {
            let t = i as f64 / (k - 1) as f64;
            (top.ln() * (1.0 - t) + bottom.ln() * t).exp()
        })
        .collect()
}

/// Inner leave-one-out tuning over a candidate grid. Ties break toward the
/// larger lambda. The reduction over the grid is deterministic regardless of
/// evaluation order.
pub fn tune_lambda(
    y: &DVector<f64>,
    x_std: &DMatrix<f64>,
    alpha: f64,
    grid: &[f64],
) -> Result<PenaltyConfig> {
    let n = x_std.nrows();
    if grid.is_empty() {
        return Err(Error::InvalidConfig("empty lambda grid".into()));
    }
    if n < 3 {
        return Err(Error::TooFewRows(n, 3));
    }
    let p = x_std.ncols();
    let mut best: Option<(f64, f64)> = None; // (lambda, score)
    for &lam in grid {
        let mut sse = 0.0;
        for i in 0..n {
            let rows: Vec<usize> = (0..n).filter(|&r| r != i).collect();
            let mut xin = DMatrix::zeros(n - 1, p);
            let mut yin = DVector::zeros(n - 1);
            for (r, &src) in rows.iter().enumerate() {
                yin[r] = y[src];
                for j in 0..p {
                    xin[(r, j)] = x_std[(src, j)];
                }
            }
            let fit = fit_penalized(&yin, &xin, PenaltyConfig { lambda: lam, alpha })?;
            let pred = fit.intercept
                + (0..p).map(|j| x_std[(i, j)] * fit.slopes[j]).sum::<f64>();
            sse += (y[i] - pred) * (y[i] - pred);
        }
        let score = (sse / n as f64).sqrt();
        let better = match best {
            None => true,
            Some((blam, bscore)) => {
                score < bscore - 1e-12 || ((score - bscore).abs() <= 1e-12 && lam > blam)
            }
        };
        if better {
            best = Some((lam, score));
        }
    }
    let (lambda, _) = best.unwrap();
    PenaltyConfig::new(lambda, alpha)
}

/// VIF_j = 1/(1 - R_j^2) from regressing predictor j on the others plus an
/// intercept.
pub fn vif(data: &ProvincialDataset) -> Result<VifTable> {
    let n = data.n();
    let p = data.p();
    let mut out = Vec::with_capacity(p);
    for j in 0..p {
        let target: Vec<f64> = (0..n).map(|i| data.predictors[(i, j)]).collect();
        let mut others = DMatrix::zeros(n, p - 1);
        let mut c = 0;
        for k in 0..p {
            if k == j {
                continue;
            }
            for i in 0..n {
                others[(i, c)] = data.predictors[(i, k)];
            }
            c += 1;
        }
        let ty = DVector::from_vec(target.clone());
        let fit = fit_ols(&ty, &others)
            .map_err(|_| Error::InfiniteVif(data.predictor_names[j].clone()))?;
        let mean = ty.sum() / n as f64;
        let mut ss_tot = 0.0;
        let mut ss_res = 0.0;
        for i in 0..n {
            let row: Vec<f64> = (0..p - 1).map(|k| others[(i, k)]).collect();
            let pred = fit.predict_row(&row);
            ss_res += (ty[i] - pred) * (ty[i] - pred);
            ss_tot += (ty[i] - mean) * (ty[i] - mean);
        }
        let r2 = 1.0 - ss_res / ss_tot;
        if r2 >= 1.0 - 1e-12 {
            return Err(Error::InfiniteVif(data.predictor_names[j].clone()));
        }
        out.push(1.0 / (1.0 - r2));
    }
    let mean_vif = out.iter().sum::<f64>() / p as f64;
    Ok(VifTable {
        names: data.predictor_names.clone(),
        vif: out,
        mean_vif,
    })
}
