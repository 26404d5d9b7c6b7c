//! Provincial cross-section loading, validation, descriptive statistics, and
//! the standardize/rescale algebra connecting standardized and original-unit
//! coefficients.

use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Canonical column order for the bundled corpus. Binding is by header name,
/// not position, so reordered exports still load.
pub const EXPECTED_COLUMNS: [&str; 11] = [
    "province",
    "poverty",
    "schooling",
    "life_exp",
    "unmet_health",
    "gini",
    "sanitation",
    "water",
    "electricity",
    "unemployment",
    "ict",
];

/// Units for each predictor, aligned with `EXPECTED_COLUMNS[2..]`.
pub const PREDICTOR_UNITS: [&str; 9] = [
    "years", "years", "%", "ratio", "%", "%", "%", "%", "%",
];

/// Which scale a coefficient vector lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Standardized,
    Original,
}

impl std::fmt::Display for Scale {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Scale::Standardized => write!(f, "standardized"),
            Scale::Original => write!(f, "original"),
        }
    }
}

/// Intercept plus slopes, tagged with the scale they apply to.
#[derive(Debug, Clone)]
pub struct CoefficientVector {
    pub intercept: f64,
    pub slopes: Vec<f64>,
    pub scale: Scale,
}

impl CoefficientVector {
    pub fn new(intercept: f64, slopes: Vec<f64>, scale: Scale) -> Self {
        Self {
            intercept,
            slopes,
            scale,
        }
    }

    /// Linear prediction x'beta for one row of predictors on the matching scale.
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.intercept
            + self
                .slopes
                .iter()
                .zip(row)
                .map(|(b, x)| b * x)
                .sum::<f64>()
    }
}

/// Column means and sample SDs used to move between original and standardized
/// predictor scales.
#[derive(Debug, Clone)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
}

impl Standardizer {
    /// Fit from the columns of `x` (sample SD, n-1 denominator).
    pub fn fit(x: &DMatrix<f64>) -> Result<Self> {
        let n = x.nrows();
        let mut means = Vec::with_capacity(x.ncols());
        let mut sds = Vec::with_capacity(x.ncols());
        for j in 0..x.ncols() {
            let col = x.column(j);
            let mean = col.sum() / n as f64;
            let ss: f64 = col.iter().map(|v| (v - mean) * (v - mean)).sum();
            let sd = (ss / (n as f64 - 1.0)).sqrt();
            if sd <= 0.0 {
                return Err(Error::ConstantColumn(format!("column {j}")));
            }
            means.push(mean);
            sds.push(sd);
        }
        Ok(Self { means, sds })
    }

    /// Identity transform for p columns (means 0, sds 1).
    pub fn identity(p: usize) -> Self {
        Self {
            means: vec![0.0; p],
            sds: vec![1.0; p],
        }
    }

    pub fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = x.clone();
        for j in 0..x.ncols() {
            for i in 0..x.nrows() {
                out[(i, j)] = (x[(i, j)] - self.means[j]) / self.sds[j];
            }
        }
        out
    }

    pub fn invert(&self, z: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = z.clone();
        for j in 0..z.ncols() {
            for i in 0..z.nrows() {
                out[(i, j)] = z[(i, j)] * self.sds[j] + self.means[j];
            }
        }
        out
    }

    pub fn apply_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.means.iter().zip(&self.sds))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }
}

/// Outcome vector plus the nine-predictor matrix in original units.
#[derive(Debug, Clone)]
pub struct ProvincialDataset {
    pub province_ids: Vec<String>,
    pub outcome: DVector<f64>,
    pub predictors: DMatrix<f64>,
    pub predictor_names: Vec<String>,
    pub predictor_units: Vec<String>,
}

impl ProvincialDataset {
    pub fn n(&self) -> usize {
        self.outcome.len()
    }

    pub fn p(&self) -> usize {
        self.predictors.ncols()
    }

    /// Build from already-parsed vectors, running the full invariant checks.
    pub fn from_parts(
        province_ids: Vec<String>,
        outcome: Vec<f64>,
        predictors: DMatrix<f64>,
        predictor_names: Vec<String>,
        predictor_units: Vec<String>,
    ) -> Result<Self> {
        let n = outcome.len();
        if n < 3 {
            return Err(Error::TooFewRows(n, 3));
        }
        for (i, y) in outcome.iter().enumerate() {
            if !y.is_finite() || *y <= 0.0 || *y >= 100.0 {
                return Err(Error::BoundViolation {
                    row: i,
                    column: "poverty".into(),
                    value: *y,
                    bounds: "(0, 100)".into(),
                });
            }
        }
        for j in 0..predictors.ncols() {
            let name = &predictor_names[j];
            for i in 0..n {
                let v = predictors[(i, j)];
                if !v.is_finite() {
                    return Err(Error::NonNumericCell {
                        row: i,
                        column: name.clone(),
                        value: format!("{v}"),
                    });
                }
                if name == "gini" && (v <= 0.0 || v >= 1.0) {
                    return Err(Error::BoundViolation {
                        row: i,
                        column: name.clone(),
                        value: v,
                        bounds: "(0, 1)".into(),
                    });
                }
            }
            let col: Vec<f64> = (0..n).map(|i| predictors[(i, j)]).collect();
            if sample_sd(&col) <= 0.0 {
                return Err(Error::ConstantColumn(name.clone()));
            }
        }
        Ok(Self {
            province_ids,
            outcome: DVector::from_vec(outcome),
            predictors,
            predictor_names,
            predictor_units,
        })
    }

    /// Keep only the listed rows (used by the LOOCV harness).
    pub fn subset(&self, rows: &[usize]) -> ProvincialDataset {
        let outcome: Vec<f64> = rows.iter().map(|&i| self.outcome[i]).collect();
        let mut pred = DMatrix::zeros(rows.len(), self.p());
        for (r, &i) in rows.iter().enumerate() {
            for j in 0..self.p() {
                pred[(r, j)] = self.predictors[(i, j)];
            }
        }
        ProvincialDataset {
            province_ids: rows.iter().map(|&i| self.province_ids[i].clone()).collect(),
            outcome: DVector::from_vec(outcome),
            predictors: pred,
            predictor_names: self.predictor_names.clone(),
            predictor_units: self.predictor_units.clone(),
        }
    }

    pub fn predictor_row(&self, i: usize) -> Vec<f64> {
        (0..self.p()).map(|j| self.predictors[(i, j)]).collect()
    }
}

/// One row of the descriptive table.
#[derive(Debug, Clone)]
pub struct DescriptiveRow {
    pub variable: String,
    pub mean: f64,
    pub sd: f64,
    pub min: f64,
    pub median: f64,
    pub max: f64,
}

/// Per-variable mean, SD, min, median, max in original units; outcome first.
#[derive(Debug, Clone)]
pub struct DescriptiveTable {
    pub rows: Vec<DescriptiveRow>,
}

fn sample_sd(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let ss: f64 = v.iter().map(|x| (x - mean) * (x - mean)).sum();
    (ss / (n - 1.0)).sqrt()
}

/// Median as the midpoint of the two central order statistics for even n.
pub fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Load and validate a provincial CSV. Columns are bound by header name.
pub fn load_dataset(path: &Path) -> Result<ProvincialDataset> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: std::io::Error::new(std::io::ErrorKind::Other, e.to_string()),
    })?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: std::io::Error::new(std::io::ErrorKind::InvalidData, e.to_string()),
        })?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();

    let mut col_idx = Vec::with_capacity(EXPECTED_COLUMNS.len());
    for want in EXPECTED_COLUMNS {
        match headers.iter().position(|h| h == want) {
            Some(idx) => col_idx.push(idx),
            None => return Err(Error::MissingColumn(want.to_string())),
        }
    }

    let mut province_ids = Vec::new();
    let mut outcome = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: std::io::Error::new(std::io::ErrorKind::InvalidData, e.to_string()),
        })?;
        province_ids.push(record[col_idx[0]].trim().to_string());
        let parse = |k: usize| -> Result<f64> {
            let raw = record[col_idx[k]].trim();
            raw.parse::<f64>().map_err(|_| Error::NonNumericCell {
                row: r,
                column: EXPECTED_COLUMNS[k].to_string(),
                value: raw.to_string(),
            })
        };
        outcome.push(parse(1)?);
        let mut row = Vec::with_capacity(9);
        for k in 2..11 {
            row.push(parse(k)?);
        }
        rows.push(row);
    }

    let n = rows.len();
    let predictors = DMatrix::from_fn(n, 9, |i, j| rows[i][j]);
    ProvincialDataset::from_parts(
        province_ids,
        outcome,
        predictors,
        EXPECTED_COLUMNS[2..].iter().map(|s| s.to_string()).collect(),
        PREDICTOR_UNITS.iter().map(|s| s.to_string()).collect(),
    )
}

/// Per-column descriptive statistics, outcome row first.
pub fn describe(data: &ProvincialDataset) -> DescriptiveTable {
    let mut rows = Vec::with_capacity(data.p() + 1);
    let col_stats = |name: &str, v: &[f64]| DescriptiveRow {
        variable: name.to_string(),
        mean: v.iter().sum::<f64>() / v.len() as f64,
        sd: sample_sd(v),
        min: v.iter().cloned().fold(f64::INFINITY, f64::min),
        median: median(v),
        max: v.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
    };
    let y: Vec<f64> = data.outcome.iter().cloned().collect();
    rows.push(col_stats("poverty", &y));
    for j in 0..data.p() {
        let col: Vec<f64> = (0..data.n()).map(|i| data.predictors[(i, j)]).collect();
        rows.push(col_stats(&data.predictor_names[j], &col));
    }
    DescriptiveTable { rows }
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}

/// Symmetric Pearson correlation matrix with the outcome in position 0, plus
/// an average-linkage clustering leaf order on distance 1 - |r|.
pub struct CorrelationMatrix {
    pub labels: Vec<String>,
    pub matrix: DMatrix<f64>,
    pub leaf_order: Vec<usize>,
}

pub fn correlation_matrix(data: &ProvincialDataset) -> Result<CorrelationMatrix> {
    let n = data.n();
    let k = data.p() + 1;
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut labels = Vec::with_capacity(k);
    cols.push(data.outcome.iter().cloned().collect());
    labels.push("poverty".to_string());
    for j in 0..data.p() {
        cols.push((0..n).map(|i| data.predictors[(i, j)]).collect());
        labels.push(data.predictor_names[j].clone());
    }
    for (j, c) in cols.iter().enumerate() {
        if sample_sd(c) <= 0.0 {
            return Err(Error::UndefinedStatistic(format!(
                "correlation undefined: column `{}` is constant",
                labels[j]
            )));
        }
    }
    let mut m = DMatrix::zeros(k, k);
    for i in 0..k {
        m[(i, i)] = 1.0;
        for j in (i + 1)..k {
            let r = pearson(&cols[i], &cols[j]);
            m[(i, j)] = r;
            m[(j, i)] = r;
        }
    }
    let leaf_order = average_linkage_order(&m);
    Ok(CorrelationMatrix {
        labels,
        matrix: m,
        leaf_order,
    })
}

/// Average-linkage agglomerative clustering on 1 - |r|; returns the dendrogram
/// leaf order.
fn average_linkage_order(corr: &DMatrix<f64>) -> Vec<usize> {
    let k = corr.nrows();
    // clusters hold their leaves in dendrogram order
    let mut clusters: Vec<Vec<usize>> = (0..k).map(|i| vec![i]).collect();
    let dist = |a: &[usize], b: &[usize]| -> f64 {
        let mut s = 0.0;
        for &i in a {
            for &j in b {
                s += 1.0 - corr[(i, j)].abs();
            }
        }
        s / (a.len() * b.len()) as f64
    };
    while clusters.len() > 1 {
        let mut best = (0, 1, f64::INFINITY);
        for a in 0..clusters.len() {
            for b in (a + 1)..clusters.len() {
                let d = dist(&clusters[a], &clusters[b]);
                if d < best.2 {
                    best = (a, b, d);
                }
            }
        }
        let merged_b = clusters.remove(best.1);
        clusters[best.0].extend(merged_b);
    }
    clusters.pop().unwrap()
}

/// Standardize the predictor matrix; outcome is left alone.
pub fn standardize(data: &ProvincialDataset) -> Result<(DMatrix<f64>, Standardizer)> {
    let std = Standardizer::fit(&data.predictors)?;
    Ok((std.apply(&data.predictors), std))
}

/// Map standardized-scale coefficients back to original units:
/// slope_j = slope_j(std)/sd_j, intercept = intercept(std) - sum_j slope_j(std)*mean_j/sd_j.
pub fn rescale_coefficients(
    coefs: &CoefficientVector,
    std: &Standardizer,
) -> Result<CoefficientVector> {
    if coefs.scale != Scale::Standardized {
        return Err(Error::ScaleMismatch {
            expected: "standardized".into(),
            got: coefs.scale.to_string(),
        });
    }
    if coefs.slopes.len() != std.sds.len() {
        return Err(Error::ScaleMismatch {
            expected: format!("{} slopes", std.sds.len()),
            got: format!("{} slopes", coefs.slopes.len()),
        });
    }
    let mut slopes = Vec::with_capacity(coefs.slopes.len());
    let mut intercept = coefs.intercept;
    for ((b, m), s) in coefs.slopes.iter().zip(&std.means).zip(&std.sds) {
        slopes.push(b / s);
        intercept -= b * m / s;
    }
    Ok(CoefficientVector::new(intercept, slopes, Scale::Original))
}
