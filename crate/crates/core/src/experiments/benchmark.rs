//! Repeated synthetic runs and their aggregation.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{hamming_support_distance, normalized_l2_error, normalized_l2_error_per_task};
use super::synthetic::{generate_synthetic_run, SyntheticConfig};
use super::tuning::{fit_method, Method, TuneOptions};
use crate::error::{Error, Result};

/// Mean and unbiased standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self { mean: f64::NAN, std: f64::NAN };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, std }
    }
}

/// Scores of one method on one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run: usize,
    pub method: Method,
    pub normalized_l2: f64,
    pub normalized_l2_task: f64,
    pub hamming: usize,
    pub lambdas: Vec<f64>,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub method: Method,
    pub normalized_l2: Summary,
    pub normalized_l2_task: Summary,
    pub hamming: Summary,
    pub rmse: Option<Summary>,
    /// Runs that produced a score.
    pub runs: usize,
    pub failures: Vec<String>,
    pub raw: Vec<RunRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkOptions {
    pub runs: usize,
    pub tune: TuneOptions,
}

impl Default for BenchmarkOptions {
    fn default() -> Self {
        Self { runs: 20, tune: TuneOptions::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkResult {
    pub config: SyntheticConfig,
    pub lambda_mode: String,
    pub rows: Vec<MetricsRow>,
}

impl BenchmarkResult {
    pub fn row(&self, method: Method) -> Option<&MetricsRow> {
        self.rows.iter().find(|r| r.method == method)
    }
}

/// Runs every method on `options.runs` independent datasets. The second-step
/// ridge weight defaults to the configured noise variance. Solver failures are
/// recorded per method and run rather than aborting the benchmark.
pub fn run_benchmark(config: &SyntheticConfig, methods: &[Method], options: &BenchmarkOptions) -> Result<BenchmarkResult> {
    config.validate()?;
    options.tune.validate()?;
    if options.runs == 0 {
        return Err(Error::InvalidConfig("runs must be >= 1".into()));
    }
    if methods.is_empty() {
        return Err(Error::InvalidConfig("no methods requested".into()));
    }
    let mut tune = options.tune.clone();
    tune.ridge_lambda.get_or_insert(config.noise_variance);

    let per_run: Vec<Vec<std::result::Result<RunRecord, String>>> = (0..options.runs)
        .into_par_iter()
        .map(|run| {
            let (dataset, truth) = match generate_synthetic_run(config, run as u64) {
                Ok(x) => x,
                Err(e) => return methods.iter().map(|_| Err(format!("run {run}: {e}"))).collect(),
            };
            methods
                .iter()
                .map(|&method| {
                    let scored = fit_method(method, &dataset, &tune).and_then(|out| {
                        Ok(RunRecord {
                            run,
                            method,
                            normalized_l2: normalized_l2_error(&out.coefficients, &truth)?,
                            normalized_l2_task: normalized_l2_error_per_task(&out.coefficients, &truth)?,
                            hamming: hamming_support_distance(&out.coefficients, &truth)?,
                            lambdas: out.lambdas,
                            converged: out.converged,
                        })
                    });
                    scored.map_err(|e| format!("run {run}: {e}"))
                })
                .collect()
        })
        .collect();

    let rows = methods
        .iter()
        .enumerate()
        .map(|(i, &method)| {
            let mut raw = Vec::new();
            let mut failures = Vec::new();
            for run in &per_run {
                match &run[i] {
                    Ok(r) => raw.push(r.clone()),
                    Err(e) => failures.push(e.clone()),
                }
            }
            let l2: Vec<f64> = raw.iter().map(|r| r.normalized_l2).collect();
            let l2t: Vec<f64> = raw.iter().map(|r| r.normalized_l2_task).collect();
            let ham: Vec<f64> = raw.iter().map(|r| r.hamming as f64).collect();
            MetricsRow {
                method,
                normalized_l2: Summary::of(&l2),
                normalized_l2_task: Summary::of(&l2t),
                hamming: Summary::of(&ham),
                rmse: None,
                runs: raw.len(),
                failures,
                raw,
            }
        })
        .collect();
    Ok(BenchmarkResult { config: config.clone(), lambda_mode: tune.lambda_mode.to_string(), rows })
}

/// Which summary a rendered table shows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableMetric {
    NormalizedL2,
    NormalizedL2Task,
    Hamming,
    Rmse,
}

impl TableMetric {
    fn pick(self, row: &MetricsRow) -> Option<Summary> {
        match self {
            TableMetric::NormalizedL2 => Some(row.normalized_l2),
            TableMetric::NormalizedL2Task => Some(row.normalized_l2_task),
            TableMetric::Hamming => Some(row.hamming),
            TableMetric::Rmse => row.rmse,
        }
    }
}

/// Methods as rows, one column per labelled result set, cells `mean ± std`.
pub fn render_table(columns: &[(String, &[MetricsRow])], metric: TableMetric) -> String {
    let mut methods: Vec<Method> = Vec::new();
    for (_, rows) in columns {
        for r in rows.iter() {
            if !methods.contains(&r.method) {
                methods.push(r.method);
            }
        }
    }
    let name_width = methods.iter().map(|m| m.display_name().len()).max().unwrap_or(6).max(6);
    let cells: Vec<Vec<String>> = methods
        .iter()
        .map(|&m| {
            columns
                .iter()
                .map(|(_, rows)| {
                    match rows.iter().find(|r| r.method == m).and_then(|r| metric.pick(r)) {
                        Some(s) if s.mean.is_finite() => format!("{:.4} ± {:.4}", s.mean, s.std),
                        _ => "-".to_string(),
                    }
                })
                .collect()
        })
        .collect();
    let widths: Vec<usize> = (0..columns.len())
        .map(|c| {
            cells
                .iter()
                .map(|row| row[c].chars().count())
                .chain(std::iter::once(columns[c].0.chars().count()))
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    let _ = write!(out, "{:<name_width$}", "Method");
    for (c, (label, _)) in columns.iter().enumerate() {
        let _ = write!(out, "  {:>w$}", label, w = widths[c]);
    }
    out.push('\n');
    for (m, row) in methods.iter().zip(&cells) {
        let _ = write!(out, "{:<name_width$}", m.display_name());
        for (c, cell) in row.iter().enumerate() {
            let pad = widths[c] - cell.chars().count();
            let _ = write!(out, "  {}{}", " ".repeat(pad), cell);
        }
        out.push('\n');
    }
    out
}

/// Per-run raw metrics as CSV.
pub fn raw_metrics_csv(results: &[(String, &BenchmarkResult)]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["label", "run", "method", "normalized_l2", "normalized_l2_task", "hamming", "lambdas", "converged"])?;
    for (label, res) in results {
        for row in &res.rows {
            for r in &row.raw {
                let lambdas: Vec<String> = r.lambdas.iter().map(|l| format!("{l:e}")).collect();
                w.write_record([
                    label.clone(),
                    r.run.to_string(),
                    r.method.key().to_string(),
                    r.normalized_l2.to_string(),
                    r.normalized_l2_task.to_string(),
                    r.hamming.to_string(),
                    lambdas.join(";"),
                    r.converged.to_string(),
                ])?;
            }
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::Internal(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Internal(e.to_string()))
}
