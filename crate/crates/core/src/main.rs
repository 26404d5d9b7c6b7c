//! Command-line front end: table emission and static SVG figures for the
//! provincial poverty analysis.
//!
//! Outputs land under `--out` in `tables/*.csv`, `figures/*.svg`, and
//! `runs/*.json`. All randomized commands are deterministic for a fixed
//! `--seed`. Exit codes: 0 success, 1 validation error, 2 numerical failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nalgebra::DVector;
use serde::Deserialize;

use smallreg::bayes::{
    convergence, gibbs_gaussian, gibbs_shrinkage, posterior_predictive, prior_sensitivity, ssvs,
    summarize_posterior, GaussianPriorSpec, PosteriorSummary, RunConfig,
    ShrinkageFamily, SsvsConfig,
};
use smallreg::beta::fit_beta;
use smallreg::dataset::{
    correlation_matrix, describe, load_dataset, rescale_coefficients, standardize,
    ProvincialDataset,
};
use smallreg::error::{Error, Result};
use smallreg::eval::{compare, loocv, registry, LoocvReport};
use smallreg::linear::{default_grid, fit_ols, fit_penalized, tune_lambda, vif};
use smallreg::ml::{
    fit_bart, fit_gp, fit_random_forest, permutation_importance, shapley_sampling, BartConfig,
    ForestConfig, GpConfig,
};
use smallreg::report::{cell, svg_bars, svg_beeswarm, svg_forest, svg_heatmap, svg_ppc,
    svg_sensitivity, write_csv};
use smallreg::spatial::{fit_bym2, load_adjacency, morans_i, morans_mc_test, SpatialWeights};

#[derive(Parser)]
#[command(
    name = "smallreg",
    about = "Provincial poverty cross-section: descriptives, regression portfolio, LOOCV"
)]
struct Cli {
    /// Input CSV; defaults to the bundled reference corpus.
    #[arg(long, global = true)]
    data: Option<PathBuf>,

    /// Adjacency edge list (`labelA labelB` per line) for spatial commands.
    #[arg(long, global = true)]
    adjacency: Option<PathBuf>,

    /// Master seed for every randomized step.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory (tables/, figures/, runs/ are created inside).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Comma-separated model ids for `loocv` (e.g. M1,M2,M5).
    #[arg(long, global = true, value_delimiter = ',')]
    models: Option<Vec<String>>,

    /// JSON config file; command-line flags take precedence over its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Table-1 descriptives, correlation matrix, and the correlation heatmap.
    Describe,
    /// Table-2 variance inflation factors.
    Vif,
    /// Fit one model on the full data and emit its coefficient/posterior table.
    Fit { model: String },
    /// Exact leave-one-out cross-validation; Table-8 leaderboard.
    Loocv {
        /// Run the full standard portfolio.
        #[arg(long)]
        all: bool,
        /// Single model id (alternative to --all / --models).
        model: Option<String>,
    },
    /// Spatial statistics (require --adjacency).
    Spatial {
        #[command(subcommand)]
        which: SpatialCommand,
    },
    /// Prior-sensitivity sweep over slope-prior scales (Table 6, Fig 4).
    Sensitivity,
    /// BART split-share and random-forest permutation importance (Table 7, Fig 5).
    Importance,
    /// Monte Carlo Shapley values for every observation (Fig 6).
    Shap,
    /// Posterior predictive check for the Gaussian linear model (Fig 3).
    Ppc,
    /// Horseshoe forest plot of slope posteriors.
    ForestPlot,
}

#[derive(Subcommand)]
enum SpatialCommand {
    /// Moran's I with a permutation test on the outcome.
    Moran,
    /// BYM2 spatial regression fit.
    Bym2,
}

/// Values readable from the JSON config file; flags override each field.
#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    data: Option<PathBuf>,
    adjacency: Option<PathBuf>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    models: Option<Vec<String>>,
}

/// Fully resolved run settings.
struct Settings {
    data: PathBuf,
    adjacency: Option<PathBuf>,
    seed: u64,
    out: PathBuf,
    models: Option<Vec<String>>,
}

impl Settings {
    fn resolve(cli: &Cli) -> Result<Self> {
        let file: FileConfig = match &cli.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
                    path: path.display().to_string(),
                    source: e,
                })?;
                serde_json::from_str(&text)
                    .map_err(|e| Error::InvalidConfig(format!("bad config file: {e}")))?
            }
            None => FileConfig::default(),
        };
        let data = cli
            .data
            .clone()
            .or(file.data)
            .unwrap_or_else(|| PathBuf::from(smallreg::CORPUS_PATH));
        if !data.exists() {
            return Err(Error::InvalidConfig(format!(
                "data file {} does not exist",
                data.display()
            )));
        }
        let adjacency = cli.adjacency.clone().or(file.adjacency);
        if let Some(a) = &adjacency {
            if !a.exists() {
                return Err(Error::InvalidConfig(format!(
                    "adjacency file {} does not exist",
                    a.display()
                )));
            }
        }
        Ok(Self {
            data,
            adjacency,
            seed: cli.seed.or(file.seed).unwrap_or(42),
            out: cli
                .out
                .clone()
                .or(file.out)
                .unwrap_or_else(|| PathBuf::from("out")),
            models: cli.models.clone().or(file.models),
        })
    }

    fn table(&self, name: &str) -> PathBuf {
        self.out.join("tables").join(name)
    }

    fn figure(&self, name: &str) -> PathBuf {
        self.out.join("figures").join(name)
    }

    fn run_record(&self, name: &str) -> PathBuf {
        self.out.join("runs").join(name)
    }

    fn ensure_dirs(&self) -> Result<()> {
        for sub in ["tables", "figures", "runs"] {
            std::fs::create_dir_all(self.out.join(sub)).map_err(|e| Error::Io {
                path: self.out.join(sub).display().to_string(),
                source: e,
            })?;
        }
        Ok(())
    }

    fn load(&self) -> Result<ProvincialDataset> {
        load_dataset(&self.data)
    }

    fn require_adjacency(&self) -> Result<&Path> {
        self.adjacency.as_deref().ok_or_else(|| {
            Error::InvalidConfig(
                "this command needs an adjacency file: pass --adjacency PATH".into(),
            )
        })
    }
}

fn write_svg(path: &Path, doc: &str) -> Result<()> {
    std::fs::write(path, doc).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::InvalidConfig(format!("json serialization: {e}")))?;
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })
}

fn summary_rows(summaries: &[PosteriorSummary]) -> Vec<Vec<String>> {
    summaries
        .iter()
        .map(|s| {
            vec![
                s.name.clone(),
                cell(s.mean),
                cell(s.sd),
                cell(s.q025),
                cell(s.q975),
                cell(s.prob_negative),
            ]
        })
        .collect()
}

const SUMMARY_HEADER: [&str; 6] = ["parameter", "mean", "sd", "q2.5", "q97.5", "prob_negative"];

fn cmd_describe(s: &Settings) -> Result<()> {
    let d = s.load()?;
    let table = describe(&d);
    let rows: Vec<Vec<String>> = table
        .rows
        .iter()
        .map(|r| {
            vec![
                r.variable.clone(),
                cell(r.mean),
                cell(r.sd),
                cell(r.min),
                cell(r.median),
                cell(r.max),
            ]
        })
        .collect();
    write_csv(
        &s.table("table1_descriptives.csv"),
        &["variable", "mean", "sd", "min", "median", "max"],
        &rows,
    )?;

    let corr = correlation_matrix(&d)?;
    let k = corr.labels.len();
    let mut header: Vec<&str> = vec!["variable"];
    for l in &corr.labels {
        header.push(l);
    }
    let rows: Vec<Vec<String>> = (0..k)
        .map(|i| {
            let mut row = vec![corr.labels[i].clone()];
            row.extend((0..k).map(|j| cell(corr.matrix[(i, j)])));
            row
        })
        .collect();
    write_csv(&s.table("correlations.csv"), &header, &rows)?;

    let matrix: Vec<Vec<f64>> = (0..k)
        .map(|i| (0..k).map(|j| corr.matrix[(i, j)]).collect())
        .collect();
    write_svg(
        &s.figure("fig1_correlation_heatmap.svg"),
        &svg_heatmap(&corr.labels, &matrix),
    )?;
    println!("describe: wrote table1_descriptives.csv, correlations.csv, fig1_correlation_heatmap.svg");
    Ok(())
}

fn cmd_vif(s: &Settings) -> Result<()> {
    let d = s.load()?;
    let table = vif(&d)?;
    let mut rows: Vec<Vec<String>> = table
        .names
        .iter()
        .zip(&table.vif)
        .map(|(n, v)| vec![n.clone(), cell(*v)])
        .collect();
    rows.push(vec!["mean".into(), cell(table.mean_vif)]);
    write_csv(&s.table("table2_vif.csv"), &["predictor", "vif"], &rows)?;
    println!("vif: wrote table2_vif.csv (mean VIF {:.2})", table.mean_vif);
    Ok(())
}

fn cmd_fit(s: &Settings, model: &str) -> Result<()> {
    let d = s.load()?;
    match model {
        "M1" => {
            let fit = fit_ols(&d.outcome, &d.predictors)?;
            let mut rows = vec![vec!["intercept".to_string(), cell(fit.intercept)]];
            for (name, b) in d.predictor_names.iter().zip(&fit.slopes) {
                rows.push(vec![name.clone(), cell(*b)]);
            }
            write_csv(&s.table("table3_m1_ols.csv"), &["term", "estimate"], &rows)?;
        }
        "M2" | "M3" | "M4" => {
            let alpha = match model {
                "M2" => 0.0,
                "M3" => 1.0,
                _ => 0.5,
            };
            let (z, std) = standardize(&d)?;
            let grid = default_grid(&d.outcome, &z, alpha);
            let config = tune_lambda(&d.outcome, &z, alpha, &grid)?;
            let fit = fit_penalized(&d.outcome, &z, config)?;
            let original = rescale_coefficients(&fit, &std)?;
            let mut rows = vec![vec![
                "intercept".to_string(),
                cell(fit.intercept),
                cell(original.intercept),
            ]];
            for (j, name) in d.predictor_names.iter().enumerate() {
                rows.push(vec![
                    name.clone(),
                    cell(fit.slopes[j]),
                    cell(original.slopes[j]),
                ]);
            }
            rows.push(vec![
                "lambda".to_string(),
                cell(config.lambda),
                cell(config.lambda),
            ]);
            write_csv(
                &s.table(&format!("table3_{}_penalized.csv", model.to_lowercase())),
                &["term", "estimate_standardized", "estimate_original"],
                &rows,
            )?;
        }
        "M5" => {
            let prior = GaussianPriorSpec::default_for(d.p());
            let draws = gibbs_gaussian(&d, &prior, &RunConfig::gaussian_default(s.seed))?;
            let summaries = summarize_posterior(&draws)?;
            write_csv(
                &s.table("table4_m5_gaussian.csv"),
                &SUMMARY_HEADER,
                &summary_rows(&summaries),
            )?;
        }
        "M6" | "M7" | "M8" => {
            let family = match model {
                "M6" => ShrinkageFamily::bayes_ridge(),
                "M7" => ShrinkageFamily::bayes_lasso(),
                _ => ShrinkageFamily::horseshoe(),
            };
            let draws = gibbs_shrinkage(&d, family, &RunConfig::shrinkage_default(s.seed))?;
            let summaries = summarize_posterior(&draws)?;
            write_csv(
                &s.table(&format!("table5_{}_shrinkage.csv", model.to_lowercase())),
                &SUMMARY_HEADER,
                &summary_rows(&summaries),
            )?;
            if model == "M8" {
                let report = convergence(&draws)?;
                let rows: Vec<Vec<String>> = report
                    .names
                    .iter()
                    .enumerate()
                    .map(|(i, n)| {
                        vec![n.clone(), cell(report.rhat[i]), cell(report.ess_bulk[i])]
                    })
                    .collect();
                write_csv(
                    &s.table("appendix_c_convergence.csv"),
                    &["parameter", "rhat", "ess_bulk"],
                    &rows,
                )?;
            }
        }
        "M9" => {
            let (draws, inclusion) =
                ssvs(&d, &SsvsConfig::default(), &RunConfig::shrinkage_default(s.seed))?;
            let summaries = summarize_posterior(&draws)?;
            write_csv(
                &s.table("table5_m9_ssvs.csv"),
                &SUMMARY_HEADER,
                &summary_rows(&summaries),
            )?;
            let rows: Vec<Vec<String>> = inclusion
                .predictor_names
                .iter()
                .zip(&inclusion.pip)
                .map(|(n, p)| vec![n.clone(), cell(*p)])
                .collect();
            write_csv(&s.table("table5_m9_pip.csv"), &["predictor", "pip"], &rows)?;
        }
        "M10" => {
            let fit = fit_beta(&d, &RunConfig::shrinkage_default(s.seed))?;
            let summaries = summarize_posterior(&fit.draws)?;
            write_csv(
                &s.table("table_m10_beta.csv"),
                &SUMMARY_HEADER,
                &summary_rows(&summaries),
            )?;
        }
        "M11" => {
            let graph = load_adjacency(s.require_adjacency()?)?;
            let fit = fit_bym2(&d, &graph, &RunConfig::shrinkage_default(s.seed))?;
            let summaries = summarize_posterior(&fit.draws)?;
            write_csv(
                &s.table("table_m11_bym2.csv"),
                &SUMMARY_HEADER,
                &summary_rows(&summaries),
            )?;
        }
        "M12" => {
            let fit = fit_bart(&d.predictors, &d.outcome, &BartConfig::default(), s.seed)?;
            let rows: Vec<Vec<String>> = d
                .predictor_names
                .iter()
                .zip(&fit.split_proportions)
                .map(|(n, p)| vec![n.clone(), cell(*p)])
                .collect();
            write_csv(
                &s.table("table_m12_bart_split_shares.csv"),
                &["predictor", "split_share"],
                &rows,
            )?;
        }
        "M13" => {
            let (z, _) = standardize(&d)?;
            let n = d.n();
            let y_mean = d.outcome.sum() / n as f64;
            let yc = DVector::from_fn(n, |i, _| d.outcome[i] - y_mean);
            let y_var = yc.iter().map(|v| v * v).sum::<f64>() / (n as f64 - 1.0);
            let init = GpConfig::isotropic(d.p(), 3.0, y_var, 0.5 * y_var);
            let fit = fit_gp(&z, &yc, &init, 1, s.seed)?;
            let mut rows: Vec<Vec<String>> = d
                .predictor_names
                .iter()
                .zip(&fit.config.length_scales)
                .map(|(n, l)| vec![format!("length_scale[{n}]"), cell(*l)])
                .collect();
            rows.push(vec!["signal_variance".into(), cell(fit.config.signal_variance)]);
            rows.push(vec!["noise_variance".into(), cell(fit.config.noise_variance)]);
            rows.push(vec!["log_marginal".into(), cell(fit.log_marginal)]);
            write_csv(
                &s.table("table_m13_gp_hyperparameters.csv"),
                &["hyperparameter", "value"],
                &rows,
            )?;
        }
        "M14" => {
            let fit = fit_random_forest(&d.predictors, &d.outcome, &ForestConfig::default(), s.seed)?;
            let imp = permutation_importance(&fit, &d.predictors, &d.outcome, 20, s.seed)?;
            let mut rows: Vec<Vec<String>> = d
                .predictor_names
                .iter()
                .zip(&imp)
                .map(|(n, v)| vec![n.clone(), cell(*v)])
                .collect();
            rows.push(vec!["oob_mse".into(), cell(fit.oob_mse)]);
            write_csv(
                &s.table("table_m14_forest.csv"),
                &["quantity", "value"],
                &rows,
            )?;
        }
        "M15" => {
            let fit = smallreg::ml::fit_gbdt(
                &d.predictors,
                &d.outcome,
                &smallreg::ml::GbdtConfig::default(),
                s.seed,
            )?;
            let mse: f64 = (0..d.n())
                .map(|i| {
                    let e = d.outcome[i] - fit.predict_row(&d.predictor_row(i));
                    e * e
                })
                .sum::<f64>()
                / d.n() as f64;
            let rows = vec![
                vec!["base_score".to_string(), cell(fit.base_score)],
                vec!["n_trees".to_string(), format!("{}", fit.trees.len())],
                vec!["training_mse".to_string(), cell(mse)],
            ];
            write_csv(
                &s.table("table_m15_gbdt.csv"),
                &["quantity", "value"],
                &rows,
            )?;
        }
        other => {
            return Err(Error::InvalidConfig(format!(
                "unknown model id {other:?} for fit (expected M1..M15)"
            )))
        }
    }
    println!("fit {model}: tables written to {}", s.out.join("tables").display());
    Ok(())
}

fn cmd_loocv(s: &Settings, all: bool, single: Option<&str>) -> Result<()> {
    let d = s.load()?;
    let graph = match &s.adjacency {
        Some(path) => Some(load_adjacency(path)?),
        None => None,
    };
    let adapters: Vec<Box<dyn smallreg::eval::ModelAdapter>> = if all {
        registry::standard_portfolio(&d, graph.as_ref())
    } else if let Some(id) = single {
        vec![registry::adapter_by_id(id, &d, graph.as_ref())?]
    } else if let Some(ids) = &s.models {
        ids.iter()
            .map(|id| registry::adapter_by_id(id, &d, graph.as_ref()))
            .collect::<Result<Vec<_>>>()?
    } else {
        return Err(Error::InvalidConfig(
            "loocv needs --all, a model id argument, or --models".into(),
        ));
    };

    let mut reports: Vec<LoocvReport> = Vec::with_capacity(adapters.len());
    for adapter in &adapters {
        let report = loocv(adapter.as_ref(), &d, s.seed)?;
        println!("{}: RMSE {:.4}", report.model_id, report.rmse);
        reports.push(report);
    }
    let board = compare(&reports)?;
    let rows: Vec<Vec<String>> = board
        .iter()
        .map(|r| {
            vec![
                format!("{}", r.rank),
                r.model_id.clone(),
                cell(r.rmse),
                format!("{}", r.approximate),
            ]
        })
        .collect();
    write_csv(
        &s.table("table8_leaderboard.csv"),
        &["rank", "model", "loocv_rmse", "approximate"],
        &rows,
    )?;

    let labels: Vec<String> = board.iter().map(|r| r.model_id.clone()).collect();
    let values: Vec<f64> = board.iter().map(|r| r.rmse).collect();
    write_svg(
        &s.figure("fig7_rmse_leaderboard.svg"),
        &svg_bars(&labels, &values, "LOOCV RMSE"),
    )?;

    // audit record: per-fold predictions, wall time deliberately excluded so
    // repeated runs are byte-identical
    let audit = serde_json::json!({
        "seed": s.seed,
        "n": d.n(),
        "models": reports.iter().map(|r| serde_json::json!({
            "model_id": r.model_id,
            "rmse": r.rmse,
            "approximate": r.approximate,
            "predictions": r.predictions,
        })).collect::<Vec<_>>(),
    });
    write_json(&s.run_record("loocv.json"), &audit)?;
    println!(
        "loocv: wrote table8_leaderboard.csv, fig7_rmse_leaderboard.svg, runs/loocv.json"
    );
    Ok(())
}

fn cmd_spatial_moran(s: &Settings) -> Result<()> {
    let path = s.require_adjacency()?;
    let d = s.load()?;
    let graph = load_adjacency(path)?.aligned_to(&d.province_ids)?;
    let w = SpatialWeights::from_graph(&graph);
    let y: Vec<f64> = d.outcome.iter().cloned().collect();
    let observed = morans_i(&y, &w)?;
    let test = morans_mc_test(&y, &w, 999, s.seed)?;
    let rows = vec![
        vec!["morans_i".to_string(), cell(observed)],
        vec!["p_value".to_string(), cell(test.p_value)],
        vec!["n_permutations".to_string(), format!("{}", test.n_perm)],
        vec![
            "null_expectation".to_string(),
            cell(-1.0 / (d.n() as f64 - 1.0)),
        ],
    ];
    write_csv(
        &s.table("appendix_b_moran.csv"),
        &["statistic", "value"],
        &rows,
    )?;
    println!(
        "spatial moran: I = {observed:.4}, p = {:.4} ({} permutations)",
        test.p_value, test.n_perm
    );
    Ok(())
}

fn cmd_spatial_bym2(s: &Settings) -> Result<()> {
    let path = s.require_adjacency()?;
    let d = s.load()?;
    let graph = load_adjacency(path)?;
    let fit = fit_bym2(&d, &graph, &RunConfig::shrinkage_default(s.seed))?;
    let summaries = summarize_posterior(&fit.draws)?;
    write_csv(
        &s.table("appendix_b_bym2.csv"),
        &SUMMARY_HEADER,
        &summary_rows(&summaries),
    )?;
    let rows: Vec<Vec<String>> = d
        .province_ids
        .iter()
        .enumerate()
        .map(|(i, id)| {
            vec![id.clone(), cell(fit.u_mean[i]), cell(fit.fitted_mean[i])]
        })
        .collect();
    write_csv(
        &s.table("appendix_b_bym2_effects.csv"),
        &["province", "spatial_effect_mean", "fitted_mean"],
        &rows,
    )?;
    println!("spatial bym2: wrote appendix_b_bym2.csv, appendix_b_bym2_effects.csv");
    Ok(())
}

fn cmd_sensitivity(s: &Settings) -> Result<()> {
    let d = s.load()?;
    let scales = [1.0, 10.0, 25.0, 100.0, 1000.0];
    let rows_data = prior_sensitivity(&d, &scales, &RunConfig::gaussian_default(s.seed))?;
    let rows: Vec<Vec<String>> = rows_data
        .iter()
        .map(|r| {
            vec![
                cell(r.scale),
                cell(r.ict_mean),
                cell(r.ict_q025),
                cell(r.ict_q975),
                cell(r.waic),
                cell(r.p_waic),
                cell(r.loo_rmse),
            ]
        })
        .collect();
    write_csv(
        &s.table("table6_sensitivity.csv"),
        &[
            "prior_scale",
            "ict_mean",
            "ict_q2.5",
            "ict_q97.5",
            "waic",
            "p_waic",
            "loocv_rmse",
        ],
        &rows,
    )?;
    write_svg(&s.figure("fig4_sensitivity.svg"), &svg_sensitivity(&rows_data))?;
    println!("sensitivity: wrote table6_sensitivity.csv, fig4_sensitivity.svg");
    Ok(())
}

fn cmd_importance(s: &Settings) -> Result<()> {
    let d = s.load()?;
    let bart = fit_bart(&d.predictors, &d.outcome, &BartConfig::default(), s.seed)?;
    let forest = fit_random_forest(&d.predictors, &d.outcome, &ForestConfig::default(), s.seed)?;
    let rf_imp = permutation_importance(&forest, &d.predictors, &d.outcome, 20, s.seed)?;
    let rows: Vec<Vec<String>> = d
        .predictor_names
        .iter()
        .enumerate()
        .map(|(j, n)| {
            vec![
                n.clone(),
                cell(bart.split_proportions[j]),
                cell(rf_imp[j]),
            ]
        })
        .collect();
    write_csv(
        &s.table("table7_importance.csv"),
        &["predictor", "bart_split_share", "rf_permutation_importance"],
        &rows,
    )?;
    write_svg(
        &s.figure("fig5_importance.svg"),
        &svg_bars(&d.predictor_names, &rf_imp, "RF permutation importance (MSE increase)"),
    )?;
    println!("importance: wrote table7_importance.csv, fig5_importance.svg");
    Ok(())
}

fn cmd_shap(s: &Settings) -> Result<()> {
    let d = s.load()?;
    let forest = fit_random_forest(&d.predictors, &d.outcome, &ForestConfig::default(), s.seed)?;
    let mut rows = Vec::new();
    let mut per_var: Vec<Vec<f64>> = vec![Vec::new(); d.p()];
    for i in 0..d.n() {
        let point = d.predictor_row(i);
        let shap = shapley_sampling(&forest, &d.predictors, &point, 1000, s.seed + i as u64)?;
        for j in 0..d.p() {
            rows.push(vec![
                d.province_ids[i].clone(),
                d.predictor_names[j].clone(),
                cell(shap.values[j]),
                cell(shap.mc_se[j]),
                cell(shap.baseline),
                cell(shap.prediction),
            ]);
            per_var[j].push(shap.values[j]);
        }
    }
    write_csv(
        &s.table("shap_values.csv"),
        &["province", "predictor", "shap", "mc_se", "baseline", "prediction"],
        &rows,
    )?;
    write_svg(
        &s.figure("fig6_shap_beeswarm.svg"),
        &svg_beeswarm(&d.predictor_names, &per_var),
    )?;
    println!("shap: wrote shap_values.csv, fig6_shap_beeswarm.svg");
    Ok(())
}

fn cmd_ppc(s: &Settings) -> Result<()> {
    let d = s.load()?;
    let prior = GaussianPriorSpec::default_for(d.p());
    let draws = gibbs_gaussian(&d, &prior, &RunConfig::gaussian_default(s.seed))?;
    let reps = posterior_predictive(&draws, &d, 100, s.seed);
    let observed: Vec<f64> = d.outcome.iter().cloned().collect();
    write_svg(&s.figure("fig3_ppc.svg"), &svg_ppc(&observed, &reps))?;
    println!("ppc: wrote fig3_ppc.svg");
    Ok(())
}

fn cmd_forest_plot(s: &Settings) -> Result<()> {
    let d = s.load()?;
    let draws = gibbs_shrinkage(
        &d,
        ShrinkageFamily::horseshoe(),
        &RunConfig::shrinkage_default(s.seed),
    )?;
    let summaries: Vec<PosteriorSummary> = summarize_posterior(&draws)?
        .into_iter()
        .filter(|sm| d.predictor_names.contains(&sm.name))
        .collect();
    write_svg(&s.figure("forest_plot_horseshoe.svg"), &svg_forest(&summaries))?;
    println!("forest-plot: wrote forest_plot_horseshoe.svg");
    Ok(())
}

/// Exit 1 for validation problems, 2 for numerical failures.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::NumericalFailure { .. }
        | Error::NonConvergence { .. }
        | Error::SingularDesign(_)
        | Error::InfiniteVif(_)
        | Error::UndefinedStatistic(_) => 2,
        Error::FoldFailure { source, .. } => exit_code(source),
        _ => 1,
    }
}

fn run(cli: &Cli) -> Result<()> {
    let settings = Settings::resolve(cli)?;
    settings.ensure_dirs()?;
    match &cli.command {
        Command::Describe => cmd_describe(&settings),
        Command::Vif => cmd_vif(&settings),
        Command::Fit { model } => cmd_fit(&settings, model),
        Command::Loocv { all, model } => cmd_loocv(&settings, *all, model.as_deref()),
        Command::Spatial { which } => match which {
            SpatialCommand::Moran => cmd_spatial_moran(&settings),
            SpatialCommand::Bym2 => cmd_spatial_bym2(&settings),
        },
        Command::Sensitivity => cmd_sensitivity(&settings),
        Command::Importance => cmd_importance(&settings),
        Command::Shap => cmd_shap(&settings),
        Command::Ppc => cmd_ppc(&settings),
        Command::ForestPlot => cmd_forest_plot(&settings),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
