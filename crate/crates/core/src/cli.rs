//! Command-line front end. Exit status 0 on success, 1 on a usage error,
//! 2 on a runtime error; errors print one line on stderr.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::bootstrap::{independence_test, Method};
use crate::dcov::{dist_matrix, sample_dcor, sample_dcov, Correlation, DcovParams};
use crate::error::Error;
use crate::grid::PairedSample;
use crate::harness::{run_experiment, write_rows, ConfigFile, ExperimentId};
use crate::io::{read_pair_file, read_trajectories_file, write_pair};
use crate::rng::RngSpec;
use crate::simulate::simulate_pair;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "fdcov", version, about = "Distance covariance tests for discretized stochastic processes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a paired sample and write it as trajectory CSV.
    Simulate(SimulateArgs),
    /// Print T_n and R_n for a paired sample.
    Stat(StatArgs),
    /// Run an independence test and print the result as JSON.
    Test(TestArgs),
    /// Run an experiment and write its result rows as CSV.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Args)]
struct InputArgs {
    /// Paired sample CSV with x_k and y_k rows.
    #[arg(long, conflicts_with_all = ["x", "y"])]
    input: Option<PathBuf>,
    /// CSV with the X paths.
    #[arg(long, requires = "y")]
    x: Option<PathBuf>,
    /// CSV with the Y paths.
    #[arg(long, requires = "x")]
    y: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// TOML file; the process is read from its [simulate] section.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct StatArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
}

#[derive(Debug, Args)]
struct TestArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    #[arg(long = "B", default_value_t = 200)]
    b: usize,
    #[arg(long, default_value = "bootstrap_paired")]
    method: String,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ExperimentArgs {
    #[arg(long)]
    id: String,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated sample sizes.
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<usize>>,
    /// Comma-separated grid sizes.
    #[arg(long, value_delimiter = ',')]
    p: Option<Vec<usize>>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long = "B")]
    b: Option<usize>,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Runtime(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Runtime(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn one_line(msg: &str) -> String {
    msg.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return EXIT_OK;
        }
        Err(e) => {
            let text = e.to_string();
            let body = text.split("\n\nUsage:").next().unwrap_or(&text);
            let body = body.split("\n\nFor more information").next().unwrap_or(body);
            eprintln!("fdcov: {}", one_line(body.trim_start_matches("error: ")));
            return EXIT_USAGE;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(msg)) => {
            eprintln!("fdcov: {}", one_line(&msg));
            EXIT_USAGE
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("fdcov: {}", one_line(&e.to_string()));
            EXIT_RUNTIME
        }
    }
}

fn dispatch(command: Command) -> Result<(), Failure> {
    match command {
        Command::Simulate(a) => simulate(a),
        Command::Stat(a) => stat(a),
        Command::Test(a) => test(a),
        Command::Experiment(a) => experiment(a),
    }
}

fn params(beta: f64) -> Result<DcovParams, Failure> {
    DcovParams::new(beta).map_err(|e| usage(e.to_string()))
}

fn pool(threads: usize) -> Result<rayon::ThreadPool, Failure> {
    if threads == 0 {
        return Err(usage("--threads must be at least 1"));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Failure::Runtime(Error::invalid(e.to_string())))
}

fn output(out: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    Ok(match out {
        Some(path) => Box::new(BufWriter::new(
            File::create(path).map_err(|e| Error::in_file(path)(e.into()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn load_config(path: Option<&Path>) -> Result<ConfigFile, Failure> {
    match path {
        Some(p) => ConfigFile::load(p).map_err(Failure::Runtime),
        None => Ok(ConfigFile::default()),
    }
}

fn read_input(input: &InputArgs) -> Result<PairedSample, Failure> {
    match (&input.input, &input.x, &input.y) {
        (Some(path), _, _) => Ok(read_pair_file(path)?),
        (None, Some(x), Some(y)) => Ok(PairedSample::new(read_trajectories_file(x)?, read_trajectories_file(y)?)?),
        _ => Err(usage("provide --input, or both --x and --y")),
    }
}

fn simulate(a: SimulateArgs) -> Result<(), Failure> {
    let config = load_config(a.config.as_deref())?;
    let section = config.simulate.unwrap_or_default();
    let process = section.process_pair().map_err(|e| usage(e.to_string()))?;
    let n = a.n.or(section.n).unwrap_or(100);
    let p = a.p.or(section.p).unwrap_or(100);
    let seed = a.seed.or(section.seed).unwrap_or(1);
    if n == 0 || p == 0 {
        return Err(usage("--n and --p must be positive"));
    }
    let sample = pool(a.threads)?.install(|| simulate_pair(&process, n, p, &RngSpec::new(seed)))?;
    let mut w = output(a.out.as_deref())?;
    write_pair(&mut w, &sample)?;
    w.flush()?;
    Ok(())
}

fn correlation_json(r: Correlation) -> serde_json::Value {
    match r {
        Correlation::Defined(v) => json!(v),
        Correlation::Undefined => serde_json::Value::Null,
    }
}

fn stat(a: StatArgs) -> Result<(), Failure> {
    let params = params(a.beta)?;
    let sample = read_input(&a.input)?;
    let dx = dist_matrix(sample.x(), params)?;
    let dy = dist_matrix(sample.y(), params)?;
    let t = sample_dcov(&dx, &dy)?;
    let r = sample_dcor(&dx, &dy)?;
    let value = json!({ "n": sample.len(), "beta": a.beta, "T_n": t, "R_n": correlation_json(r) });
    println!("{value}");
    Ok(())
}

fn test(a: TestArgs) -> Result<(), Failure> {
    let params = params(a.beta)?;
    let method: Method = a.method.parse().map_err(|e: Error| usage(e.to_string()))?;
    if a.b == 0 {
        return Err(usage("--B must be at least 1"));
    }
    let sample = read_input(&a.input)?;
    let result = pool(a.threads)?.install(|| independence_test(&sample, params, a.b, &RngSpec::new(a.seed), method))?;
    let mut w = output(a.out.as_deref())?;
    writeln!(w, "{}", result.to_json()?)?;
    w.flush()?;
    Ok(())
}

fn experiment(a: ExperimentArgs) -> Result<(), Failure> {
    let id: ExperimentId = a.id.parse().map_err(|e: Error| usage(e.to_string()))?;
    let config = load_config(a.config.as_deref())?;
    let mut spec = config.spec(id);
    if let Some(n) = a.n {
        spec.n_values = n;
    }
    if let Some(p) = a.p {
        spec.p_values = p;
    }
    if let Some(beta) = a.beta {
        spec.beta = beta;
    }
    if let Some(reps) = a.reps {
        spec.replications = reps;
    }
    if let Some(seed) = a.seed {
        spec.seed = seed;
    }
    if let Some(b) = a.b {
        spec.bootstrap_b = b;
    }
    if a.threads == 0 {
        return Err(usage("--threads must be at least 1"));
    }
    spec.validate().map_err(|e| usage(e.to_string()))?;
    let rows = run_experiment(&spec, a.threads)?;
    let mut w = output(a.out.as_deref())?;
    write_rows(&mut w, &rows)?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(run(["fdcov"]), EXIT_USAGE);
        assert_eq!(run(["fdcov", "bogus"]), EXIT_USAGE);
        assert_eq!(run(["fdcov", "experiment", "--id", "fig9"]), EXIT_USAGE);
        assert_eq!(run(["fdcov", "stat", "--beta", "2.5", "--input", "x.csv"]), EXIT_USAGE);
        assert_eq!(run(["fdcov", "stat"]), EXIT_USAGE);
        assert_eq!(run(["fdcov", "test", "--input", "x.csv", "--method", "jackknife"]), EXIT_USAGE);
    }

    #[test]
    fn missing_file_is_runtime_error() {
        assert_eq!(run(["fdcov", "stat", "--input", "/nonexistent/pair.csv"]), EXIT_RUNTIME);
    }

    #[test]
    fn help_exits_zero() {
        assert_eq!(run(["fdcov", "--help"]), EXIT_OK);
    }

    #[test]
    fn diagnostics_fit_on_one_line() {
        assert_eq!(one_line("a\n  b\tc"), "a b c");
    }
}
