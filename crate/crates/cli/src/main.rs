use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use log::info;
use serde::Serialize;

use spikeslab::io::load_csv;
use spikeslab::model::{Pi0Prior, Tuning, DEFAULT_SEED};
use spikeslab::report::fit_report;
use spikeslab::sim::{
    default_pi0_settings, run_benchmark, run_sensitivity, BenchmarkConfig, BenchmarkReport, Level, Method,
};
use spikeslab::{Error, SamplerConfig};

#[derive(Parser)]
#[command(name = "spikeslab", version, about = "Spike-and-slab group selection for linear regression")]
struct Cli {
    /// Worker threads for replications (defaults to all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit one method to a CSV data set and write a JSON report.
    Fit(FitArgs),
    /// Replicated simulation study on the built-in examples.
    Benchmark(BenchmarkArgs),
    /// BGL-SS misclassification across prior settings for the inclusion probability.
    Sensitivity(SensitivityArgs),
}

#[derive(Args, Clone)]
struct SamplerArgs {
    /// Total Gibbs iterations per chain.
    #[arg(long, default_value_t = 10_000)]
    iters: usize,
    /// Iterations discarded as burn-in.
    #[arg(long, default_value_t = 5_000)]
    burn: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Monte Carlo EM rounds for the penalty parameter.
    #[arg(long, default_value_t = 20)]
    em_rounds: usize,
    /// Gibbs sweeps per EM round.
    #[arg(long, default_value_t = 1_000)]
    em_iters: usize,
    /// Fix the BGL-SS penalty instead of estimating it by EM.
    #[arg(long, value_name = "LAMBDA")]
    fix_lambda: Option<f64>,
    /// Fix the BSGS-SS slab scale parameter instead of estimating it by EM.
    #[arg(long, value_name = "T")]
    fix_t: Option<f64>,
    /// Fix the BGL-SS prior spike probability.
    #[arg(long, conflicts_with = "pi0_beta")]
    pi0: Option<f64>,
    /// Beta(a, b) prior on the BGL-SS spike probability.
    #[arg(long, num_args = 2, value_names = ["A", "B"])]
    pi0_beta: Option<Vec<f64>>,
}

impl SamplerArgs {
    fn resolve(&self) -> SamplerConfig {
        let mut c = SamplerConfig {
            n_iter: self.iters,
            n_burn: self.burn,
            seed: self.seed,
            em_rounds: self.em_rounds,
            em_inner_iters: self.em_iters,
            ..SamplerConfig::default()
        };
        if let Some(v) = self.fix_lambda {
            c.bgl.lambda = Tuning::Fixed { value: v };
        }
        if let Some(v) = self.fix_t {
            c.bsgs.t = Tuning::Fixed { value: v };
        }
        if let Some(v) = self.pi0 {
            c.bgl.pi0 = Pi0Prior::Fixed { value: v };
        }
        if let Some(ab) = &self.pi0_beta {
            c.bgl.pi0 = Pi0Prior::Beta { a: ab[0], b: ab[1] };
        }
        c
    }
}

#[derive(Args)]
struct FitArgs {
    /// CSV with a header, response in column `y`, covariates in group order.
    #[arg(long)]
    data: PathBuf,
    /// JSON array of group sizes.
    #[arg(long)]
    groups: PathBuf,
    #[arg(long, value_parser = parse_method)]
    method: Method,
    /// Fit on the covariates as given (no centring or scaling).
    #[arg(long)]
    no_standardize: bool,
    /// Report path; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    sampler: SamplerArgs,
}

#[derive(Args)]
struct BenchmarkArgs {
    /// Example id (1-5); repeat for several. Defaults to all.
    #[arg(long = "example")]
    examples: Vec<usize>,
    /// Comma-separated methods. Defaults to all six.
    #[arg(long, value_delimiter = ',', value_parser = parse_method)]
    methods: Vec<Method>,
    #[arg(long, default_value_t = 50)]
    reps: usize,
    /// Override the noise standard deviation of every example.
    #[arg(long)]
    sigma: Option<f64>,
    /// Bootstrap resamples for the SE of the median test error.
    #[arg(long, default_value_t = spikeslab::sim::DEFAULT_BOOT_REPS)]
    boot_reps: usize,
    /// Level at which the summary reports TPR and FPR.
    #[arg(long, default_value = "coef", value_parser = parse_level)]
    level: Level,
    #[arg(long, default_value = "benchmark-out")]
    out_dir: PathBuf,
    #[command(flatten)]
    sampler: SamplerArgs,
}

#[derive(Args)]
struct SensitivityArgs {
    #[arg(long, default_value_t = 1)]
    example: usize,
    #[arg(long, default_value_t = 20)]
    reps: usize,
    /// Report path; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    sampler: SamplerArgs,
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|_| format!("unknown method '{s}' (expected one of bgl-ss, bsgl, bsgs-ss, gl, sgl, ols)"))
}

fn parse_level(s: &str) -> Result<Level, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Serialize)]
struct Metadata {
    elapsed_seconds: f64,
}

/// Envelope shared by every JSON report. Everything except `metadata` is
/// a deterministic function of the inputs.
#[derive(Serialize)]
struct Envelope<C: Serialize, R: Serialize> {
    version: &'static str,
    command: &'static str,
    seed: u64,
    config: C,
    result: R,
    metadata: Metadata,
}

impl<C: Serialize, R: Serialize> Envelope<C, R> {
    fn new(command: &'static str, seed: u64, config: C, result: R, started: Instant) -> Self {
        Self {
            version: env!("CARGO_PKG_VERSION"),
            command,
            seed,
            config,
            result,
            metadata: Metadata { elapsed_seconds: started.elapsed().as_secs_f64() },
        }
    }
}

#[derive(Serialize)]
struct FitConfig<'a> {
    data: &'a Path,
    groups: &'a Path,
    method: Method,
    standardize: bool,
    sampler: &'a SamplerConfig,
}

#[derive(Serialize)]
struct SensitivityConfig<'a> {
    example: usize,
    n_reps: usize,
    sampler: &'a SamplerConfig,
}

enum Failure {
    Input(String),
    Numerical(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_input_error() {
            Failure::Input(e.to_string())
        } else {
            Failure::Numerical(e.to_string())
        }
    }
}

fn io_failure(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::Input(format!("{}: {e}", path.display()))
}

fn write_json<T: Serialize>(value: &T, out: Option<&Path>) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Failure::Numerical(e.to_string()))?;
    text.push('\n');
    match out {
        Some(path) => fs::write(path, text).map_err(|e| io_failure(path, e)),
        None => std::io::stdout().write_all(text.as_bytes()).map_err(|e| Failure::Input(e.to_string())),
    }
}

fn cmd_fit(args: &FitArgs) -> Result<(), Failure> {
    let started = Instant::now();
    let config = args.sampler.resolve();
    config.validate()?;
    let design = load_csv(&args.data, &args.groups)?;
    info!("fitting {} on n={}, p={}, {} groups", args.method, design.n(), design.p(), design.n_groups());
    let report = fit_report(args.method, &design, &config, !args.no_standardize)?;
    let fit_config = FitConfig {
        data: &args.data,
        groups: &args.groups,
        method: args.method,
        standardize: !args.no_standardize,
        sampler: &config,
    };
    write_json(&Envelope::new("fit", config.seed, fit_config, report, started), args.out.as_deref())
}

/// One row per example and method: the headline estimator and selection rule.
#[derive(Serialize)]
struct SummaryRow {
    example: usize,
    method: Method,
    estimator: String,
    median_mse: Option<f64>,
    median_mse_se: Option<f64>,
    rule: String,
    level: &'static str,
    tpr: Option<f64>,
    fpr: Option<f64>,
    misclassification: Option<f64>,
    n_failed: usize,
}

fn headline(method: Method) -> (&'static str, &'static str) {
    match method {
        Method::BglSs | Method::Bsgl | Method::BsgsSs => ("mean", "mtm"),
        _ => ("estimate", "support"),
    }
}

fn summary_rows(report: &BenchmarkReport, level: Level) -> Vec<SummaryRow> {
    let mut rows = Vec::new();
    for &example in &report.config.examples {
        for &method in &report.config.methods {
            let (estimator, rule) = headline(method);
            let pred = report
                .prediction
                .iter()
                .find(|r| r.example == example && r.method == method && r.estimator == estimator);
            let sel = report
                .selection
                .iter()
                .find(|r| r.example == example && r.method == method && r.rule == rule);
            let (tpr, fpr) = match (sel, level) {
                (Some(s), Level::Coefficient) => (s.mean_tpr, s.mean_fpr),
                (Some(s), Level::Group) => (s.mean_tpr_group, s.mean_fpr_group),
                (None, _) => (None, None),
            };
            rows.push(SummaryRow {
                example,
                method,
                estimator: estimator.into(),
                median_mse: pred.and_then(|p| p.median_mse),
                median_mse_se: pred.and_then(|p| p.median_mse_se),
                rule: rule.into(),
                level: match level {
                    Level::Group => "group",
                    Level::Coefficient => "coef",
                },
                tpr,
                fpr,
                misclassification: sel.and_then(|s| s.mean_misclassification),
                n_failed: pred.map_or(report.config.n_reps, |p| p.n_failed),
            });
        }
    }
    rows
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), Failure> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_failure(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| io_failure(path, e))?;
    }
    w.flush().map_err(|e| io_failure(path, e))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x:.3}"))
}

fn cmd_benchmark(args: &BenchmarkArgs) -> Result<(), Failure> {
    let started = Instant::now();
    let examples = if args.examples.is_empty() { (1..=5).collect() } else { args.examples.clone() };
    let methods = if args.methods.is_empty() { Method::ALL.to_vec() } else { args.methods.clone() };
    let mut config = BenchmarkConfig::new(examples, methods, args.reps, args.sampler.resolve());
    config.boot_reps = args.boot_reps;
    config.sigma = args.sigma;
    config.validate()?;
    fs::create_dir_all(&args.out_dir).map_err(|e| io_failure(&args.out_dir, e))?;
    info!(
        "running {} replications of {} methods on examples {:?}",
        config.n_reps,
        config.methods.len(),
        config.examples
    );
    let report = run_benchmark(&config)?;
    let summary = summary_rows(&report, args.level);
    write_csv(&args.out_dir.join("summary.csv"), &summary)?;
    write_csv(&args.out_dir.join("prediction.csv"), &report.prediction)?;
    write_csv(&args.out_dir.join("selection.csv"), &report.selection)?;
    let json_path = args.out_dir.join("report.json");
    let seed = config.seed;
    write_json(&Envelope::new("benchmark", seed, config, report, started), Some(&json_path))?;
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "example  method   median_mse (se)     tpr    fpr    misclass  failed");
    for r in &summary {
        let _ = writeln!(
            out,
            "{:>7}  {:<7}  {:>7} ({:>5})    {:>5}  {:>5}  {:>8}  {:>6}",
            r.example,
            r.method.name(),
            fmt_opt(r.median_mse),
            fmt_opt(r.median_mse_se),
            fmt_opt(r.tpr),
            fmt_opt(r.fpr),
            fmt_opt(r.misclassification),
            r.n_failed
        );
    }
    info!("wrote reports to {}", args.out_dir.display());
    Ok(())
}

fn cmd_sensitivity(args: &SensitivityArgs) -> Result<(), Failure> {
    let started = Instant::now();
    let config = args.sampler.resolve();
    info!("sensitivity sweep on example {} with {} replications", args.example, args.reps);
    let report = run_sensitivity(args.example, &default_pi0_settings(), args.reps, &config, config.seed)?;
    for row in &report.rows {
        eprintln!(
            "{:<12} mtm {}  hppm {}",
            row.setting,
            fmt_opt(row.mtm_misclassification),
            fmt_opt(row.hppm_misclassification)
        );
    }
    let cfg = SensitivityConfig { example: args.example, n_reps: args.reps, sampler: &config };
    write_json(&Envelope::new("sensitivity", config.seed, cfg, report, started), args.out.as_deref())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            eprintln!("error: --jobs must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let outcome = match &cli.command {
        Command::Fit(a) => cmd_fit(a),
        Command::Benchmark(a) => cmd_benchmark(a),
        Command::Sensitivity(a) => cmd_sensitivity(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("numerical failure: {msg}");
            ExitCode::from(3)
        }
    }
}
