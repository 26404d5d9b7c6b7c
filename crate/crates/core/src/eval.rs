//! Exact leave-one-out evaluation harness and the model-comparison
//! leaderboard.
//!
//! Every adapter must do all of its preprocessing, tuning, and sampling
//! inside the training subset it is handed; the harness never exposes the
//! held-out row. Fold seeds derive deterministically from the master seed so
//! parallel and sequential execution agree.


pub mod registry;

use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::bayes::sub_seed;
use crate::dataset::ProvincialDataset;
use crate::error::{Error, Result};

/// A model that can be refit on a training subset and predict one held-out
/// row in outcome units.
pub trait ModelAdapter: Sync {
    fn id(&self) -> &str;
    fn fit_predict(&self, train: &ProvincialDataset, x_new: &[f64], seed: u64) -> Result<f64>;
    /// True only for models whose held-out prediction is structurally
    /// approximate (the spatial model; see its module docs).
    fn approximate(&self) -> bool {
        false
    }
}

/// Adapter built from a closure, for tests and one-off model variants.
pub struct FnAdapter {
    id: String,
    approximate: bool,
    f: Box<dyn Fn(&ProvincialDataset, &[f64], u64) -> Result<f64> + Sync + Send>,
}

impl FnAdapter {
    pub fn new<F>(id: String, f: F) -> Self
    where
        F: Fn(&ProvincialDataset, &[f64], u64) -> Result<f64> + Sync + Send + 'static,
    {
        Self {
            id,
            approximate: false,
            f: Box::new(f),
        }
    }

    pub fn approximate(mut self) -> Self {
        self.approximate = true;
        self
    }
}

impl ModelAdapter for FnAdapter {
    fn id(&self) -> &str {
        &self.id
    }
    fn fit_predict(&self, train: &ProvincialDataset, x_new: &[f64], seed: u64) -> Result<f64> {
        (self.f)(train, x_new, seed)
    }
    fn approximate(&self) -> bool {
        self.approximate
    }
}

/// Per-fold held-out predictions and the resulting RMSE for one model.
#[derive(Debug, Clone, Serialize)]
pub struct LoocvReport {
    pub model_id: String,
    pub predictions: Vec<f64>,
    pub rmse: f64,
    pub wall_seconds: f64,
    pub seed: u64,
    pub approximate: bool,
}

impl LoocvReport {
    /// RMSE recomputed from the stored predictions (must equal `rmse`).
    pub fn recompute_rmse(&self, data: &ProvincialDataset) -> f64 {
        rmse(&data.outcome.iter().cloned().collect::<Vec<_>>(), &self.predictions)
    }
}

fn rmse(observed: &[f64], predicted: &[f64]) -> f64 {
    let n = observed.len() as f64;
    (observed
        .iter()
        .zip(predicted)
        .map(|(y, p)| (y - p) * (y - p))
        .sum::<f64>()
        / n)
        .sqrt()
}

/// Exact leave-one-out: refit on the n-1 remaining rows for every i and
/// predict row i. Folds run in parallel; per-fold sub-seeds make the result
/// schedule-invariant.
pub fn loocv(
    adapter: &dyn ModelAdapter,
    data: &ProvincialDataset,
    seed: u64,
) -> Result<LoocvReport> {
    let n = data.n();
    if n < 3 {
        return Err(Error::TooFewRows(n, 3));
    }
    let start = Instant::now();
    let predictions: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let keep: Vec<usize> = (0..n).filter(|&r| r != i).collect();
            let train = data.subset(&keep);
            let x_new = data.predictor_row(i);
            adapter
                .fit_predict(&train, &x_new, sub_seed(seed, i as u64))
                .map_err(|e| Error::FoldFailure {
                    fold: i,
                    source: Box::new(e),
                })
        })
        .collect::<Result<Vec<f64>>>()?;
    let observed: Vec<f64> = data.outcome.iter().cloned().collect();
    Ok(LoocvReport {
        model_id: adapter.id().to_string(),
        rmse: rmse(&observed, &predictions),
        predictions,
        wall_seconds: start.elapsed().as_secs_f64(),
        seed,
        approximate: adapter.approximate(),
    })
}

/// One leaderboard row.
#[derive(Debug, Clone, Serialize)]
pub struct LeaderboardRow {
    pub rank: usize,
    pub model_id: String,
    pub rmse: f64,
    pub approximate: bool,
}

/// Sort reports ascending by RMSE (ties by model id) into a ranked table.
pub fn compare(reports: &[LoocvReport]) -> Result<Vec<LeaderboardRow>> {
    if reports.is_empty() {
        return Err(Error::InvalidConfig("no reports to compare".into()));
    }
    for (i, a) in reports.iter().enumerate() {
        for b in &reports[i + 1..] {
            if a.model_id == b.model_id {
                return Err(Error::DuplicateModelId(a.model_id.clone()));
            }
        }
    }
    let mut sorted: Vec<&LoocvReport> = reports.iter().collect();
    sorted.sort_by(|a, b| {
        a.rmse
            .partial_cmp(&b.rmse)
            .unwrap()
            .then_with(|| a.model_id.cmp(&b.model_id))
    });
    Ok(sorted
        .into_iter()
        .enumerate()
        .map(|(i, r)| LeaderboardRow {
            rank: i + 1,
            model_id: r.model_id.clone(),
            rmse: r.rmse,
            approximate: r.approximate,
        })
        .collect())
}
