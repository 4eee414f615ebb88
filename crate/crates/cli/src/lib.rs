//! Command-line front end: `describe`, `infer`, `generate` and `bench`.
//!
//! Exit codes: 0 on success, 1 for usage errors, 2 for model or data errors.

pub mod bench;
pub mod data;
pub mod metrics;
pub mod synth;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use bayesc_core::rewrite::plan_symbolic;
use bayesc_core::runtime::{sample_with, SamplerConfig};
use bayesc_core::{compile_model, lower, CheckedModel, Method, Trace};
use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::data::DataFile;
use crate::metrics::{linear_predictions, rmse, to_csv, Heldout, Row};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Input(String),
}

impl From<bayesc_core::Error> for CliError {
    fn from(e: bayesc_core::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Input(_) => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "bayesc", version, about = "Compile Bayesian-network models to MCMC samplers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the joint density, derived conditionals and sampling plan.
    Describe {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value = "gibbs", value_parser = parse_method)]
        method: Method,
        /// Comma-separated variables to treat as observed.
        #[arg(long, default_value = "")]
        observe: String,
    },
    /// Run inference and write a trace.
    Infer(InferArgs),
    /// Write a synthetic data set.
    Generate(GenerateArgs),
    /// Time sweeps over a series of sizes and print CSV.
    Bench {
        #[arg(long, value_enum)]
        series: bench::Series,
        /// Comma-separated sizes or topic counts.
        #[arg(long, default_value = "")]
        x: String,
        #[arg(long, default_value_t = 10)]
        sweeps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        threads: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Metric {
    Lpp,
    Rmse,
    None,
}

#[derive(Debug, Args)]
struct InferArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "gibbs", value_parser = parse_method)]
    method: Method,
    #[arg(long, default_value_t = 100)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Comma-separated variables whose values in the data file stay fixed.
    #[arg(long, default_value = "")]
    observe: String,
    #[arg(long, default_value_t = 1)]
    thin: usize,
    #[arg(long, default_value_t = 0)]
    burnin: usize,
    /// Random-walk proposal standard deviation for MH steps.
    #[arg(long, default_value_t = 0.5)]
    mh_scale: f64,
    /// Trace output path; the trace goes to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "none")]
    metric: Metric,
    /// Held-out data for the metric.
    #[arg(long)]
    test: Option<PathBuf>,
    /// Comma-separated sample counts at which to evaluate the metric
    /// (default: the final sample).
    #[arg(long)]
    metric_at: Option<String>,
    /// Gibbs sweeps used to fit held-out document topics for `lpp`.
    #[arg(long, default_value_t = 50)]
    test_sweeps: usize,
    /// Metric CSV path; printed to stdout when absent.
    #[arg(long)]
    metrics_out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Fixture {
    Lda,
    Gmm,
    Regression,
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[arg(long, value_enum)]
    fixture: Fixture,
    /// Documents (lda) or data points (gmm, regression).
    #[arg(long)]
    size: Option<usize>,
    #[arg(long, default_value_t = 10)]
    topics: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Also write a held-out split here.
    #[arg(long)]
    test: Option<PathBuf>,
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: bayesc_core::Error| e.to_string())
}

fn names(csv: &str) -> Vec<String> {
    csv.split(',').map(str::trim).filter(|s| !s.is_empty()).map(str::to_string).collect()
}

fn counts(csv: &str) -> Result<Vec<usize>, CliError> {
    names(csv)
        .iter()
        .map(|s| s.parse().map_err(|_| CliError::Usage(format!("expected a count, found {s}"))))
        .collect()
}

pub fn load_model(path: &Path) -> Result<CheckedModel, CliError> {
    let src = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    compile_model(&src).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn emit(text: &str, path: Option<&Path>) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::Input(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Plan report for a model file.
pub fn describe(path: &Path, method: Method, observe: &[String]) -> Result<String, CliError> {
    let model = load_model(path)?;
    let plan = plan_symbolic(&model, &lower(&model), method, observe)?;
    Ok(plan.describe())
}

fn prefix_mean(trace: &Trace, name: &str, n: usize) -> Option<Vec<f64>> {
    let mut acc: Option<Vec<f64>> = None;
    for s in &trace.samples[..n] {
        let v = s.get(name)?;
        match &mut acc {
            None => acc = Some(v),
            Some(a) => a.iter_mut().zip(&v).for_each(|(a, b)| *a += b),
        }
    }
    acc.map(|a| a.into_iter().map(|x| x / n as f64).collect())
}

fn infer(args: &InferArgs) -> Result<(), CliError> {
    let model = load_model(&args.model)?;
    let data = DataFile::read(&args.data)?;
    let observe = names(&args.observe);
    let config = SamplerConfig {
        seed: args.seed,
        threads: args.threads,
        thin: args.thin,
        burnin: args.burnin,
        mh_scale: args.mh_scale,
    };
    if args.metric != Metric::None && args.test.is_none() {
        return Err(CliError::Usage("--metric needs --test".into()));
    }
    let store = data.to_store(&model, &observe, args.seed)?;
    let (mut trace, _) = sample_with(&model, &data.hyper, &store, args.samples, args.method, &observe, &config)?;
    trace.model = args.model.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let total: f64 = trace.timing_ms.iter().sum();
    eprintln!(
        "seed {} method {} samples {} total {:.1} ms ({:.3} ms/sweep)",
        trace.seed,
        trace.method,
        trace.samples.len(),
        total,
        total / trace.timing_ms.len() as f64
    );
    let mut json = trace.to_json();
    json.push('\n');
    emit(&json, args.out.as_deref())?;

    let Some(test_path) = &args.test else { return Ok(()) };
    if args.metric == Metric::None {
        return Ok(());
    }
    let test = DataFile::read(test_path)?;
    let points = match &args.metric_at {
        Some(csv) => counts(csv)?,
        None => vec![trace.samples.len()],
    };
    let per_sample = args.thin.max(1);
    let mut rows = Vec::with_capacity(points.len());
    for &c in &points {
        if c == 0 || c > trace.samples.len() {
            return Err(CliError::Usage(format!("--metric-at {c} is outside 1..={}", trace.samples.len())));
        }
        let value = match args.metric {
            Metric::Lpp => {
                let phi = if observe.iter().any(|n| n == "phi") {
                    data.array("phi").expect("observed arrays are present")
                } else {
                    trace.samples[c - 1].get("phi").ok_or_else(|| CliError::Input("model has no phi".into()))?
                };
                Heldout::new(&data, &test)?.lpp(&model, &phi, args.test_sweeps, &config)?
            }
            Metric::Rmse => {
                let missing = |n: &str| CliError::Input(format!("rmse needs {n}"));
                let w = prefix_mean(&trace, "w", c).ok_or_else(|| missing("w"))?;
                let b = prefix_mean(&trace, "b", c).ok_or_else(|| missing("b"))?[0];
                let x = test.array("x").ok_or_else(|| missing("test x"))?;
                let y = test.array("y").ok_or_else(|| missing("test y"))?;
                rmse(&linear_predictions(&x, &w, b), &y)?
            }
            Metric::None => unreachable!(),
        };
        let upto = ((c - 1) * per_sample + 1).min(trace.timing_ms.len());
        let seconds = trace.timing_ms[..upto].iter().sum::<f64>() / 1e3;
        rows.push(Row { x: c as f64, value, seconds });
    }
    emit(&to_csv(&rows), args.metrics_out.as_deref())
}

fn generate(args: &GenerateArgs) -> Result<(), CliError> {
    match args.fixture {
        Fixture::Lda => {
            let spec = synth::LdaSpec { docs: args.size.unwrap_or(200), topics: args.topics, ..Default::default() };
            let corpus = synth::LdaCorpus::generate(&spec, args.seed);
            match &args.test {
                Some(test) => {
                    let (train, held) = corpus.split(spec.docs / 10);
                    train.write(&args.out)?;
                    held.write(test)
                }
                None => corpus.data(&corpus.docs).write(&args.out),
            }
        }
        Fixture::Gmm => synth::gmm(args.size.unwrap_or(10_000), &[-5.0, 0.0, 5.0], 0.1, args.seed).write(&args.out),
        Fixture::Regression => {
            let data = synth::regression(args.size.unwrap_or(500), &[1.0, -2.0, 0.5], 0.3, 0.1, args.seed);
            match &args.test {
                Some(test) => {
                    let (train, held) = synth::regression_split(&data, 0.9, args.seed);
                    train.write(&args.out)?;
                    held.write(test)
                }
                None => data.write(&args.out),
            }
        }
    }
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Describe { model, method, observe } => {
            let report = describe(&model, method, &names(&observe))?;
            print!("{report}");
            Ok(())
        }
        Command::Infer(args) => infer(&args),
        Command::Generate(args) => generate(&args),
        Command::Bench { series, x, sweeps, seed, threads, out } => {
            let config = SamplerConfig { seed, threads, ..SamplerConfig::default() };
            let rows = bench::run(series, &counts(&x)?, sweeps, &config)?;
            emit(&to_csv(&rows), out.as_deref())
        }
    }
}

/// Parse `args` (including the program name), run, and return the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
