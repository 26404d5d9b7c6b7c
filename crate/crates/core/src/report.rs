//! Table serialization (CSV) and static SVG figure generation.
//!
//! Figures are built by direct markup emission — heatmap as colored rects,
//! forest plot as segments and points, bar chart, kernel-density overlays,
//! and a beeswarm with deterministic jitter — so output is byte-identical
//! for fixed inputs and seeds.

use std::fmt::Write as _;
use std::path::Path;

use crate::bayes::{PosteriorSummary, SensitivityRow};
use crate::error::{Error, Result};

/// Serialize a table to CSV text (header + formatted rows).
pub fn csv_string(header: &[&str], rows: &[Vec<String>]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)
        .map_err(|e| Error::InvalidConfig(format!("csv write failed: {e}")))?;
    for row in rows {
        if row.len() != header.len() {
            return Err(Error::InvalidConfig(format!(
                "csv row has {} fields, header has {}",
                row.len(),
                header.len()
            )));
        }
        w.write_record(row)
            .map_err(|e| Error::InvalidConfig(format!("csv write failed: {e}")))?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::InvalidConfig(format!("csv flush failed: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::InvalidConfig(format!("csv not utf-8: {e}")))
}

/// Write CSV to disk.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let text = csv_string(header, rows)?;
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })
}

/// Parse a CSV file back into (header, rows) for round-trip checks.
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::InvalidConfig(format!(
        "cannot open csv {}: {e}",
        path.display()
    )))?;
    let header = r
        .headers()
        .map_err(|e| Error::InvalidConfig(format!("csv header: {e}")))?
        .iter()
        .map(|s| s.to_string())
        .collect();
    let mut rows = Vec::new();
    for record in r.records() {
        let record = record.map_err(|e| Error::InvalidConfig(format!("csv record: {e}")))?;
        rows.push(record.iter().map(|s| s.to_string()).collect());
    }
    Ok((header, rows))
}

/// Fixed-precision numeric cell.
pub fn cell(v: f64) -> String {
    format!("{v:.6}")
}

// ---------------------------------------------------------------------------
// SVG scaffolding

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 60.0;

fn svg_open(out: &mut String, width: f64, height: f64) {
    let _ = write!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         viewBox=\"0 0 {width} {height}\">"
    );
    let _ = write!(
        out,
        "<rect x=\"0\" y=\"0\" width=\"{width}\" height=\"{height}\" fill=\"white\"/>"
    );
}

fn svg_close(out: &mut String) {
    out.push_str("</svg>\n");
}

fn escape_xml(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn text(out: &mut String, x: f64, y: f64, size: f64, anchor: &str, s: &str) {
    let _ = write!(
        out,
        "<text x=\"{x:.2}\" y=\"{y:.2}\" font-size=\"{size}\" \
         font-family=\"sans-serif\" text-anchor=\"{anchor}\">{}</text>",
        escape_xml(s)
    );
}

/// Diverging blue-white-red color for a correlation in [-1, 1].
fn diverging_color(v: f64) -> String {
    let v = v.clamp(-1.0, 1.0);
    let (r, g, b) = if v >= 0.0 {
        // white -> red
        (255.0, 255.0 * (1.0 - v), 255.0 * (1.0 - v))
    } else {
        // white -> blue
        (255.0 * (1.0 + v), 255.0 * (1.0 + v), 255.0)
    };
    format!("rgb({},{},{})", r.round() as u8, g.round() as u8, b.round() as u8)
}

// ---------------------------------------------------------------------------
// Figures

/// Correlation heatmap (Fig-1 style): one colored cell per variable pair.
pub fn svg_heatmap(names: &[String], matrix: &[Vec<f64>]) -> String {
    let k = names.len();
    let mut out = String::new();
    svg_open(&mut out, WIDTH, HEIGHT);
    let cell_w = (WIDTH - 2.0 * MARGIN) / k as f64;
    let cell_h = (HEIGHT - 2.0 * MARGIN) / k as f64;
    for i in 0..k {
        for j in 0..k {
            let x = MARGIN + j as f64 * cell_w;
            let y = MARGIN + i as f64 * cell_h;
            let _ = write!(
                out,
                "<rect x=\"{x:.2}\" y=\"{y:.2}\" width=\"{cell_w:.2}\" height=\"{cell_h:.2}\" \
                 fill=\"{}\" stroke=\"gray\" stroke-width=\"0.5\"/>",
                diverging_color(matrix[i][j])
            );
            text(
                &mut out,
                x + cell_w / 2.0,
                y + cell_h / 2.0 + 3.0,
                9.0,
                "middle",
                &format!("{:.2}", matrix[i][j]),
            );
        }
        text(
            &mut out,
            MARGIN - 6.0,
            MARGIN + i as f64 * cell_h + cell_h / 2.0 + 3.0,
            10.0,
            "end",
            &names[i],
        );
        text(
            &mut out,
            MARGIN + i as f64 * cell_w + cell_w / 2.0,
            MARGIN - 8.0,
            10.0,
            "middle",
            &names[i],
        );
    }
    svg_close(&mut out);
    out
}

/// Forest plot: posterior means with 95% interval segments, zero reference
/// line dashed.
pub fn svg_forest(summaries: &[PosteriorSummary]) -> String {
    let k = summaries.len();
    let mut out = String::new();
    svg_open(&mut out, WIDTH, HEIGHT);
    let lo = summaries
        .iter()
        .map(|s| s.q025)
        .fold(f64::INFINITY, f64::min)
        .min(0.0);
    let hi = summaries
        .iter()
        .map(|s| s.q975)
        .fold(f64::NEG_INFINITY, f64::max)
        .max(0.0);
    let span = (hi - lo).max(1e-12);
    let sx = |v: f64| MARGIN + (v - lo) / span * (WIDTH - 2.0 * MARGIN);
    let sy = |i: usize| MARGIN + (i as f64 + 0.5) / k as f64 * (HEIGHT - 2.0 * MARGIN);
    // zero line
    let _ = write!(
        out,
        "<line x1=\"{0:.2}\" y1=\"{1:.2}\" x2=\"{0:.2}\" y2=\"{2:.2}\" \
         stroke=\"black\" stroke-dasharray=\"4 3\"/>",
        sx(0.0),
        MARGIN,
        HEIGHT - MARGIN
    );
    for (i, s) in summaries.iter().enumerate() {
        let y = sy(i);
        let _ = write!(
            out,
            "<line x1=\"{:.2}\" y1=\"{y:.2}\" x2=\"{:.2}\" y2=\"{y:.2}\" \
             stroke=\"steelblue\" stroke-width=\"2\"/>",
            sx(s.q025),
            sx(s.q975)
        );
        let _ = write!(
            out,
            "<circle cx=\"{:.2}\" cy=\"{y:.2}\" r=\"4\" fill=\"darkblue\"/>",
            sx(s.mean)
        );
        text(&mut out, MARGIN - 6.0, y + 3.0, 10.0, "end", &s.name);
    }
    svg_close(&mut out);
    out
}

/// Horizontal bar chart (leaderboard RMSE, importances).
pub fn svg_bars(labels: &[String], values: &[f64], value_label: &str) -> String {
    let k = labels.len();
    let mut out = String::new();
    svg_open(&mut out, WIDTH, HEIGHT);
    let max = values.iter().cloned().fold(0.0f64, f64::max).max(1e-12);
    let band = (HEIGHT - 2.0 * MARGIN) / k as f64;
    for i in 0..k {
        let y = MARGIN + i as f64 * band;
        let w = values[i].max(0.0) / max * (WIDTH - 2.0 * MARGIN);
        let _ = write!(
            out,
            "<rect x=\"{MARGIN:.2}\" y=\"{:.2}\" width=\"{w:.2}\" height=\"{:.2}\" \
             fill=\"steelblue\"/>",
            y + band * 0.15,
            band * 0.7
        );
        text(&mut out, MARGIN - 6.0, y + band / 2.0 + 3.0, 10.0, "end", &labels[i]);
        text(
            &mut out,
            MARGIN + w + 4.0,
            y + band / 2.0 + 3.0,
            10.0,
            "start",
            &format!("{:.3}", values[i]),
        );
    }
    text(&mut out, WIDTH / 2.0, HEIGHT - MARGIN / 3.0, 12.0, "middle", value_label);
    svg_close(&mut out);
    out
}

/// Gaussian kernel density on a fixed grid (Silverman bandwidth).
fn kde(values: &[f64], grid: &[f64]) -> Vec<f64> {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0).max(1.0))
        .sqrt()
        .max(1e-9);
    let h = 1.06 * sd * n.powf(-0.2);
    grid.iter()
        .map(|&g| {
            values
                .iter()
                .map(|&v| {
                    let z = (g - v) / h;
                    (-0.5 * z * z).exp()
                })
                .sum::<f64>()
                / (n * h * (2.0 * std::f64::consts::PI).sqrt())
        })
        .collect()
}

/// Posterior predictive check: observed density (dark) over replicate
/// densities (light).
pub fn svg_ppc(observed: &[f64], replicates: &[Vec<f64>]) -> String {
    let mut out = String::new();
    svg_open(&mut out, WIDTH, HEIGHT);
    let all_min = observed.iter().cloned().fold(f64::INFINITY, f64::min);
    let all_max = observed.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let pad = (all_max - all_min).max(1.0) * 0.35;
    let grid: Vec<f64> = (0..200)
        .map(|i| all_min - pad + (all_max - all_min + 2.0 * pad) * i as f64 / 199.0)
        .collect();
    let obs_d = kde(observed, &grid);
    let mut dmax = obs_d.iter().cloned().fold(0.0f64, f64::max);
    let rep_d: Vec<Vec<f64>> = replicates.iter().map(|r| kde(r, &grid)).collect();
    for d in &rep_d {
        dmax = dmax.max(d.iter().cloned().fold(0.0, f64::max));
    }
    let sx = |g: f64| {
        MARGIN + (g - (all_min - pad)) / (all_max - all_min + 2.0 * pad) * (WIDTH - 2.0 * MARGIN)
    };
    let sy = |d: f64| HEIGHT - MARGIN - d / dmax * (HEIGHT - 2.0 * MARGIN);
    let polyline = |d: &[f64], style: &str| {
        let mut s = String::from("<polyline fill=\"none\" ");
        s.push_str(style);
        s.push_str(" points=\"");
        for (i, &v) in d.iter().enumerate() {
            let _ = write!(s, "{:.2},{:.2} ", sx(grid[i]), sy(v));
        }
        s.push_str("\"/>");
        s
    };
    for d in &rep_d {
        out.push_str(&polyline(d, "stroke=\"lightsteelblue\" stroke-width=\"1\""));
    }
    out.push_str(&polyline(&obs_d, "stroke=\"black\" stroke-width=\"2.5\""));
    text(&mut out, WIDTH / 2.0, HEIGHT - MARGIN / 3.0, 12.0, "middle", "outcome");
    svg_close(&mut out);
    out
}

/// Prior-sensitivity plot: ICT posterior mean with credible band across
/// log-spaced prior scales.
pub fn svg_sensitivity(rows: &[SensitivityRow]) -> String {
    let mut out = String::new();
    svg_open(&mut out, WIDTH, HEIGHT);
    let lo = rows.iter().map(|r| r.ict_q025).fold(f64::INFINITY, f64::min).min(0.0);
    let hi = rows.iter().map(|r| r.ict_q975).fold(f64::NEG_INFINITY, f64::max).max(0.0);
    let span = (hi - lo).max(1e-12);
    let k = rows.len();
    let sx = |i: usize| MARGIN + (i as f64 + 0.5) / k as f64 * (WIDTH - 2.0 * MARGIN);
    let sy = |v: f64| HEIGHT - MARGIN - (v - lo) / span * (HEIGHT - 2.0 * MARGIN);
    let _ = write!(
        out,
        "<line x1=\"{MARGIN:.2}\" y1=\"{0:.2}\" x2=\"{1:.2}\" y2=\"{0:.2}\" \
         stroke=\"black\" stroke-dasharray=\"4 3\"/>",
        sy(0.0),
        WIDTH - MARGIN
    );
    for (i, r) in rows.iter().enumerate() {
        let x = sx(i);
        let _ = write!(
            out,
            "<line x1=\"{x:.2}\" y1=\"{:.2}\" x2=\"{x:.2}\" y2=\"{:.2}\" \
             stroke=\"steelblue\" stroke-width=\"2\"/>",
            sy(r.ict_q025),
            sy(r.ict_q975)
        );
        let _ = write!(
            out,
            "<circle cx=\"{x:.2}\" cy=\"{:.2}\" r=\"4\" fill=\"darkblue\"/>",
            sy(r.ict_mean)
        );
        text(
            &mut out,
            x,
            HEIGHT - MARGIN + 16.0,
            10.0,
            "middle",
            &format!("scale {}", r.scale),
        );
    }
    text(&mut out, WIDTH / 2.0, HEIGHT - MARGIN / 4.0, 12.0, "middle", "prior scale");
    svg_close(&mut out);
    out
}

/// Beeswarm of per-observation Shapley values per variable, jittered
/// deterministically from the value's index.
pub fn svg_beeswarm(names: &[String], per_var_values: &[Vec<f64>]) -> String {
    let k = names.len();
    let mut out = String::new();
    svg_open(&mut out, WIDTH, HEIGHT);
    let lo = per_var_values
        .iter()
        .flatten()
        .cloned()
        .fold(f64::INFINITY, f64::min)
        .min(0.0);
    let hi = per_var_values
        .iter()
        .flatten()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max)
        .max(0.0);
    let span = (hi - lo).max(1e-12);
    let sx = |v: f64| MARGIN + (v - lo) / span * (WIDTH - 2.0 * MARGIN);
    let band = (HEIGHT - 2.0 * MARGIN) / k as f64;
    let _ = write!(
        out,
        "<line x1=\"{0:.2}\" y1=\"{1:.2}\" x2=\"{0:.2}\" y2=\"{2:.2}\" \
         stroke=\"black\" stroke-dasharray=\"4 3\"/>",
        sx(0.0),
        MARGIN,
        HEIGHT - MARGIN
    );
    for (j, values) in per_var_values.iter().enumerate() {
        let y0 = MARGIN + j as f64 * band + band / 2.0;
        for (i, &v) in values.iter().enumerate() {
            // deterministic jitter from (j, i) via splitmix-style mixing
            let mut h = (j as u64) << 32 | i as u64;
            h ^= h >> 33;
            h = h.wrapping_mul(0xff51afd7ed558ccd);
            h ^= h >> 33;
            let jitter = ((h % 1000) as f64 / 1000.0 - 0.5) * band * 0.6;
            let _ = write!(
                out,
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"steelblue\" \
                 fill-opacity=\"0.65\"/>",
                sx(v),
                y0 + jitter
            );
        }
        text(&mut out, MARGIN - 6.0, y0 + 3.0, 10.0, "end", &names[j]);
    }
    text(&mut out, WIDTH / 2.0, HEIGHT - MARGIN / 4.0, 12.0, "middle", "Shapley value");
    svg_close(&mut out);
    out
}

/// Minimal XML well-formedness check: tags balance, attributes quoted.
pub fn xml_well_formed(doc: &str) -> bool {
    let mut stack: Vec<String> = Vec::new();
    let bytes = doc.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] != b'<' {
            i += 1;
            continue;
        }
        let Some(end) = doc[i..].find('>') else {
            return false;
        };
        let tag = &doc[i + 1..i + end];
        i += end + 1;
        if let Some(name) = tag.strip_prefix('/') {
            match stack.pop() {
                Some(open) if open == name.trim() => {}
                _ => return false,
            }
        } else if tag.ends_with('/') || tag.starts_with('?') || tag.starts_with('!') {
            // self-closing or declaration
        } else {
            let name = tag.split_whitespace().next().unwrap_or("");
            if name.is_empty() {
                return false;
            }
            stack.push(name.to_string());
        }
    }
    stack.is_empty()
}
