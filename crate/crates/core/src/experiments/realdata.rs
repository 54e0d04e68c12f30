//! Real multi-task datasets stored as a JSON manifest plus one CSV per task.
//!
//! Manifest: `{"name": "school", "tasks": ["task0.csv", ...]}` with paths
//! relative to the manifest. Each CSV has a header `f0,...,f{d-1},y` and one
//! sample per row. Responses are assumed centered; no intercept is fitted.

use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::benchmark::{MetricsRow, Summary};
use super::tuning::{fit_method, Method, TuneOptions};
use crate::error::{Error, Result};
use crate::model::{MultiTaskDataset, TaskData};

/// Public sources of datasets that have been used with this kind of benchmark.
/// None are bundled; convert them to the manifest format before use.
pub const KNOWN_SOURCES: &[(&str, &str)] = &[("sarcos", "http://www.gaussianprocess.org/gpml/data/")];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub name: String,
    pub tasks: Vec<String>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io { path: path.display().to_string(), source }
}

pub fn read_task_csv(path: &Path) -> Result<TaskData> {
    let file = std::fs::File::open(path).map_err(io_err(path))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let header = reader.headers()?.clone();
    let cols = header.len();
    if cols < 2 {
        return Err(Error::Format(format!("{}: expected columns f0..f{{d-1}},y", path.display())));
    }
    for (j, name) in header.iter().enumerate() {
        let expected = if j + 1 == cols { "y".to_string() } else { format!("f{j}") };
        if name != expected {
            return Err(Error::Format(format!(
                "{}: column {j} is named '{name}', expected '{expected}'",
                path.display()
            )));
        }
    }
    let d = cols - 1;
    let mut values = Vec::new();
    let mut y = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != cols {
            return Err(Error::Format(format!("{}: row {} has {} fields, expected {cols}", path.display(), i + 1, record.len())));
        }
        for (j, field) in record.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| {
                Error::Format(format!("{}: row {} column {j}: cannot parse '{field}'", path.display(), i + 1))
            })?;
            if j < d {
                values.push(v);
            } else {
                y.push(v);
            }
        }
    }
    let n = y.len();
    Ok(TaskData::new(DMatrix::from_row_slice(n, d, &values), DVector::from_vec(y)))
}

pub fn write_task_csv(path: &Path, task: &TaskData) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let d = task.n_features();
    let mut header: Vec<String> = (0..d).map(|j| format!("f{j}")).collect();
    header.push("y".into());
    w.write_record(&header)?;
    for i in 0..task.n_samples() {
        let mut row: Vec<String> = task.design.row(i).iter().map(|v| v.to_string()).collect();
        row.push(task.response[i].to_string());
        w.write_record(&row)?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

/// Loads a manifest and every task it lists.
pub fn load_manifest(path: &Path) -> Result<(Manifest, MultiTaskDataset)> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let manifest: Manifest = serde_json::from_str(&text)
        .map_err(|e| Error::Format(format!("{}: malformed manifest: {e}", path.display())))?;
    if manifest.tasks.is_empty() {
        return Err(Error::InvalidDataset(format!("{}: manifest lists no tasks", path.display())));
    }
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let tasks = manifest
        .tasks
        .iter()
        .map(|t| read_task_csv(&base.join(t)))
        .collect::<Result<Vec<_>>>()?;
    let dataset = MultiTaskDataset::new(tasks)?;
    Ok((manifest, dataset))
}

/// Writes `dataset` as `dir/task{ℓ}.csv` plus `dir/manifest.json`; returns the
/// manifest path.
pub fn write_manifest(dir: &Path, name: &str, dataset: &MultiTaskDataset) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut files = Vec::new();
    for (l, task) in dataset.tasks().iter().enumerate() {
        let file = format!("task{l}.csv");
        write_task_csv(&dir.join(&file), task)?;
        files.push(file);
    }
    let path = dir.join("manifest.json");
    let manifest = Manifest { name: name.to_string(), tasks: files };
    std::fs::write(&path, serde_json::to_string_pretty(&manifest)?).map_err(io_err(&path))?;
    Ok(path)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealDataOptions {
    /// Leading fraction of each task's rows used for training; `1.0` trains
    /// and tests on all rows.
    pub train_fraction: f64,
    /// Scale design columns to unit mean square using training statistics.
    pub standardize: bool,
    pub tune: TuneOptions,
}

impl Default for RealDataOptions {
    fn default() -> Self {
        Self { train_fraction: 0.75, standardize: false, tune: TuneOptions::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealDataResult {
    pub name: String,
    pub lambda_mode: String,
    pub rows: Vec<MetricsRow>,
}

fn apply_scales(dataset: &MultiTaskDataset, scales: &[DVector<f64>]) -> MultiTaskDataset {
    let tasks = dataset
        .tasks()
        .iter()
        .zip(scales)
        .map(|(t, s)| {
            let mut x = t.design.clone();
            for (j, mut col) in x.column_iter_mut().enumerate() {
                col /= s[j];
            }
            TaskData::new(x, t.response.clone())
        })
        .collect();
    MultiTaskDataset::new_unchecked(tasks, dataset.dim())
}

/// Test RMSE of every method, averaged over tasks (the row's `rmse.std` is the
/// spread across tasks).
pub fn run_realdata(manifest_path: &Path, methods: &[Method], options: &RealDataOptions) -> Result<RealDataResult> {
    if !(options.train_fraction > 0.0 && options.train_fraction <= 1.0) {
        return Err(Error::InvalidConfig(format!("split must lie in (0, 1], got {}", options.train_fraction)));
    }
    options.tune.validate()?;
    let (manifest, dataset) = load_manifest(manifest_path)?;
    let (mut train, mut test) = if options.train_fraction >= 1.0 {
        (dataset.clone(), dataset)
    } else {
        dataset.split_rows(options.train_fraction)
    };
    if options.standardize {
        let (scaled, scales) = train.standardized();
        test = apply_scales(&test, &scales);
        train = scaled;
    }
    let rows = methods
        .iter()
        .map(|&method| {
            let mut row = MetricsRow {
                method,
                normalized_l2: Summary { mean: f64::NAN, std: f64::NAN },
                normalized_l2_task: Summary { mean: f64::NAN, std: f64::NAN },
                hamming: Summary { mean: f64::NAN, std: f64::NAN },
                rmse: None,
                runs: 0,
                failures: Vec::new(),
                raw: Vec::new(),
            };
            match fit_method(method, &train, &options.tune) {
                Ok(out) => {
                    let per_task: Vec<f64> = test
                        .tasks()
                        .iter()
                        .zip(out.coefficients.betas())
                        .filter(|(t, _)| t.n_samples() > 0)
                        .map(|(t, b)| ((&t.response - &t.design * b).norm_squared() / t.n_samples() as f64).sqrt())
                        .collect();
                    row.rmse = Some(Summary::of(&per_task));
                    row.runs = 1;
                }
                Err(e) => row.failures.push(e.to_string()),
            }
            row
        })
        .collect();
    Ok(RealDataResult { name: manifest.name, lambda_mode: options.tune.lambda_mode.to_string(), rows })
}
