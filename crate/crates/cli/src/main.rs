use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nalgebra::{DMatrix, DVector};
use sccmtl_core::experiments::{
    generate_synthetic_run, hamming_support_distance, normalized_l2_error, normalized_l2_error_per_task,
    parse_methods, raw_metrics_csv, render_table, run_benchmark, run_realdata, BenchmarkOptions, BenchmarkResult,
    LambdaMode, RealDataOptions, SyntheticConfig, TableMetric, TuneOptions,
};
use sccmtl_core::oracles::run_oracle_checks;
use sccmtl_core::regression::load_coefficients;
use sccmtl_core::theory::{thm41_bound_report, thm42_consistency_sweep, thm42_default_instance, BoundReport};
use sccmtl_core::{CovarianceEstimate, DiagonalCovariance, Error, SolverConfig};

#[derive(Parser)]
#[command(name = "sccmtl", version, about = "Joint-sparsity multi-task regression experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Benchmarks on synthetic or real data.
    #[command(subcommand)]
    Bench(BenchCommand),
    /// Numerical checks of the error bound and the consistency trend.
    #[command(subcommand)]
    Theory(TheoryCommand),
    /// Closed-form oracle checks.
    #[command(subcommand)]
    Oracle(OracleCommand),
}

#[derive(Subcommand)]
enum BenchCommand {
    Synth(SynthArgs),
    Real(RealArgs),
    /// Scores an externally computed coefficient file against one synthetic run.
    Score(ScoreArgs),
}

#[derive(Args, Clone)]
struct SynthData {
    #[arg(long, default_value_t = 30)]
    m: usize,
    #[arg(long, default_value_t = 256)]
    d: usize,
    #[arg(long, default_value_t = 150)]
    n: usize,
    #[arg(long, default_value_t = 1.0)]
    overlap: f64,
    #[arg(long = "noise-var", default_value_t = 0.1)]
    noise_var: f64,
    #[arg(long, default_value_t = 0.0)]
    corr: f64,
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

impl SynthData {
    fn config(&self, k: usize) -> SyntheticConfig {
        SyntheticConfig {
            m: self.m,
            d: self.d,
            n: self.n,
            k,
            overlap_fraction: self.overlap,
            noise_variance: self.noise_var,
            design_correlation: self.corr,
            seed: self.seed,
        }
    }
}

#[derive(Args)]
struct SynthArgs {
    #[command(flatten)]
    data: SynthData,
    /// Support sizes, comma separated; one table column each.
    #[arg(long, default_value = "50")]
    k: String,
    #[arg(long, default_value_t = 20)]
    runs: usize,
    #[arg(long, default_value = "scc,gl,glsls")]
    methods: String,
    /// `cv` or `fixed:<v>`.
    #[arg(long, default_value = "cv")]
    lambda: String,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-run raw metrics.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct RealArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Leading fraction of each task used for training.
    #[arg(long, default_value_t = 0.75)]
    split: f64,
    #[arg(long, default_value = "scc,gl")]
    methods: String,
    #[arg(long, default_value = "cv")]
    lambda: String,
    #[arg(long)]
    standardize: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ScoreArgs {
    #[command(flatten)]
    data: SynthData,
    #[arg(long, default_value_t = 50)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    run: u64,
    /// JSON file with `m`, `d`, `betas` and `support`.
    #[arg(long)]
    coefficients: PathBuf,
}

#[derive(Subcommand)]
enum TheoryCommand {
    Thm41(Thm41Args),
    Thm42(Thm42Args),
}

#[derive(Args)]
struct Thm41Args {
    #[arg(long, default_value_t = 5)]
    d: usize,
    #[arg(long, default_value_t = 100_000)]
    trials: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 0.25)]
    lambda: f64,
    #[arg(long, default_value_t = 0.25)]
    sigma2: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct Thm42Args {
    #[arg(long = "m-grid", default_value = "10,50,200")]
    m_grid: String,
    #[arg(long, default_value_t = 32)]
    d: usize,
    #[arg(long, default_value_t = 16)]
    n: usize,
    #[arg(long, default_value_t = 4)]
    s: usize,
    #[arg(long, default_value_t = 10)]
    seeds: u64,
    #[arg(long = "noise-var", default_value_t = 0.1)]
    noise_var: f64,
    /// Seed of the shared design.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum OracleCommand {
    Check {
        #[arg(long, default_value_t = 50)]
        instances: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>, Error> {
    s.split(',')
        .filter(|x| !x.trim().is_empty())
        .map(|x| x.trim().parse().map_err(|_| Error::InvalidConfig(format!("cannot parse {what} '{x}'"))))
        .collect()
}

fn write_json<T: serde::Serialize>(path: &Option<PathBuf>, value: &T) -> Result<(), Error> {
    if let Some(p) = path {
        let text = serde_json::to_string_pretty(value)?;
        std::fs::write(p, text).map_err(|source| Error::Io { path: p.display().to_string(), source })?;
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn bench_synth(args: &SynthArgs) -> Result<(), Error> {
    let ks: Vec<usize> = parse_list(&args.k, "k")?;
    if ks.is_empty() {
        return Err(Error::InvalidConfig("--k needs at least one value".into()));
    }
    let methods = parse_methods(&args.methods)?;
    let tune = TuneOptions { lambda_mode: args.lambda.parse::<LambdaMode>()?, ..Default::default() };
    let options = BenchmarkOptions { runs: args.runs, tune };
    let results: Vec<(String, BenchmarkResult)> = ks
        .iter()
        .map(|&k| Ok((format!("k={k}"), run_benchmark(&args.data.config(k), &methods, &options)?)))
        .collect::<Result<_, Error>>()?;
    println!("lambda selection: {}", options.tune.lambda_mode);
    let columns: Vec<(String, &[_])> = results.iter().map(|(l, r)| (l.clone(), r.rows.as_slice())).collect();
    println!("\nNormalized L2 distance (stacked)\n{}", render_table(&columns, TableMetric::NormalizedL2));
    println!("Normalized L2 distance (per-task average)\n{}", render_table(&columns, TableMetric::NormalizedL2Task));
    println!("Hamming distance of the joint support\n{}", render_table(&columns, TableMetric::Hamming));
    for (label, res) in &results {
        for row in &res.rows {
            for f in &row.failures {
                eprintln!("{label} {}: {f}", row.method);
            }
        }
    }
    write_json(&args.out, &results.iter().map(|(_, r)| r).collect::<Vec<_>>())?;
    if let Some(p) = &args.csv {
        let refs: Vec<(String, &BenchmarkResult)> = results.iter().map(|(l, r)| (l.clone(), r)).collect();
        std::fs::write(p, raw_metrics_csv(&refs)?).map_err(|source| Error::Io { path: p.display().to_string(), source })?;
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn bench_real(args: &RealArgs) -> Result<(), Error> {
    let options = RealDataOptions {
        train_fraction: args.split,
        standardize: args.standardize,
        tune: TuneOptions { lambda_mode: args.lambda.parse()?, ..Default::default() },
    };
    let res = run_realdata(&args.manifest, &parse_methods(&args.methods)?, &options)?;
    println!("dataset: {}  lambda selection: {}", res.name, res.lambda_mode);
    println!("\nTest RMSE averaged over tasks\n{}", render_table(&[(res.name.clone(), &res.rows)], TableMetric::Rmse));
    for row in &res.rows {
        for f in &row.failures {
            eprintln!("{}: {f}", row.method);
        }
    }
    write_json(&args.out, &res)
}

fn bench_score(args: &ScoreArgs) -> Result<(), Error> {
    let (_, truth) = generate_synthetic_run(&args.data.config(args.k), args.run)?;
    let coefs = load_coefficients(&args.coefficients)?;
    println!("normalized_l2       {:.6}", normalized_l2_error(&coefs, &truth)?);
    println!("normalized_l2_task  {:.6}", normalized_l2_error_per_task(&coefs, &truth)?);
    println!("hamming             {}", hamming_support_distance(&coefs, &truth)?);
    Ok(())
}

fn diag(v: DVector<f64>) -> Result<CovarianceEstimate, Error> {
    Ok(CovarianceEstimate::Diagonal(DiagonalCovariance::new(v)?))
}

fn print_bound(label: &str, r: &BoundReport) {
    println!("{label}");
    println!("  mismatch omega      {:.6e}", r.mismatch_omega);
    println!("  optimal term        {:.6}", r.optimal_term);
    println!("  MC error            {:.6} ± {:.6} ({} trials)", r.mc_error_estimate, r.mc_stderr, r.mc_trials);
    println!("  excess              {:.6}", r.excess);
    println!("  bounds              [{:.6}, {:.6}]", r.lower, r.upper);
    println!("  sandwich holds      {}", r.sandwich_holds);
    println!("  simplified bound    {:.6} (holds: {})", r.simplified_upper, r.simplified_holds);
    if let Some(n) = &r.note {
        println!("  note: {n}");
    }
}

fn theory_thm41(args: &Thm41Args) -> Result<bool, Error> {
    if args.d < 3 {
        return Err(Error::InvalidConfig("--d must be at least 3".into()));
    }
    let d = args.d;
    let bar = DVector::from_fn(d, |j, _| if j < 2 { 1.0 } else { 0.0 });
    let hat = DVector::from_fn(d, |j, _| [1.2, 0.8, 0.1].get(j).copied().unwrap_or(0.0));
    let x = DMatrix::identity(d, d);
    let mismatched = thm41_bound_report(&x, &diag(hat)?, &diag(bar.clone())?, args.lambda, args.sigma2, args.trials, args.seed)?;
    let matched = thm41_bound_report(&x, &diag(bar.clone())?, &diag(bar)?, args.lambda, args.sigma2, args.trials, args.seed)?;
    print_bound("estimated prior diag(1.2, 0.8, 0.1, 0, ...)", &mismatched);
    print_bound("exact prior", &matched);
    write_json(&args.out, &[&mismatched, &matched])?;
    Ok(mismatched.sandwich_holds && matched.sandwich_holds)
}

fn theory_thm42(args: &Thm42Args) -> Result<(), Error> {
    let m_grid: Vec<usize> = parse_list(&args.m_grid, "m")?;
    let (bar, x) = thm42_default_instance(args.d, args.n, args.s, args.seed)?;
    let seeds: Vec<u64> = (0..args.seeds).collect();
    let table = thm42_consistency_sweep(&bar, &x, &m_grid, &seeds, &SolverConfig::default().with_lambda(args.noise_var))?;
    println!("{:>6}  {:>14}", "m", "median discrep");
    for row in &table.rows {
        println!("{:>6}  {:>14.6}", row.m, row.median_discrepancy);
    }
    write_json(&args.out, &table)
}

fn oracle_check(instances: usize, seed: u64) -> Result<bool, Error> {
    let checks = run_oracle_checks(instances, seed)?;
    let mut ok = true;
    for c in &checks {
        println!(
            "{:<4} {:<34} cases {:>5}  max error {:.3e}  tol {:.0e}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.cases,
            c.max_abs_error,
            c.tolerance
        );
        ok &= c.passed;
    }
    Ok(ok)
}

fn run(cli: Cli) -> Result<bool, Error> {
    match cli.command {
        Command::Bench(BenchCommand::Synth(a)) => bench_synth(&a).map(|_| true),
        Command::Bench(BenchCommand::Real(a)) => bench_real(&a).map(|_| true),
        Command::Bench(BenchCommand::Score(a)) => bench_score(&a).map(|_| true),
        Command::Theory(TheoryCommand::Thm41(a)) => theory_thm41(&a),
        Command::Theory(TheoryCommand::Thm42(a)) => theory_thm42(&a).map(|_| true),
        Command::Oracle(OracleCommand::Check { instances, seed }) => oracle_check(instances, seed),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_input_error() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
