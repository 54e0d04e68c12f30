//! Synthetic benchmarks, metrics, tuning and real-data ingestion.

mod benchmark;
mod metrics;
mod realdata;
mod synthetic;
mod tuning;

pub use benchmark::{
    raw_metrics_csv, render_table, run_benchmark, BenchmarkOptions, BenchmarkResult, MetricsRow, RunRecord, Summary,
    TableMetric,
};
pub use metrics::{hamming_support_distance, normalized_l2_error, normalized_l2_error_per_task, SUPPORT_THRESHOLD};
pub use realdata::{
    load_manifest, read_task_csv, run_realdata, write_manifest, write_task_csv, Manifest, RealDataOptions,
    RealDataResult, KNOWN_SOURCES,
};
pub use synthetic::{generate_synthetic, generate_synthetic_run, GroundTruth, SyntheticConfig};
pub use tuning::{
    fit_method, fixed_weights, parse_methods, penalty_scale, prediction_mse, FitOutcome, LambdaMode, Method,
    TuneOptions,
};
