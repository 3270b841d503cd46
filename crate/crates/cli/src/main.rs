//! `npmix`: generate datasets, cluster samples, diagnose separation and run
//! benchmarks.

mod artifacts;
mod benchmark;
mod cluster;
mod config;
mod diagnose;
mod generate;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use npmix_core::datasets::{DatasetName, DatasetSpec};

use config::RunConfig;

#[derive(Parser)]
#[command(name = "npmix", version, about = "Nonparametric mixture clustering")]
struct Cli {
    /// TOML run config, or a manifest.json from an earlier run to replay it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Print the resolved config as TOML and exit.
    #[arg(long, global = true)]
    print_config: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a synthetic dataset to CSV.
    Generate(GenerateArgs),
    /// Fit, group and partition a sample.
    Cluster(ClusterArgs),
    /// Separation report for a generator and optionally a fitted model.
    Diagnose(DiagnoseArgs),
    /// Compare clustering methods over repeated draws.
    Benchmark(BenchmarkArgs),
}

#[derive(Args)]
struct DatasetArgs {
    #[arg(long)]
    dataset: Option<DatasetName>,
    /// Dataset parameter as KEY=VALUE; repeatable.
    #[arg(long = "param", value_parser = parse_param)]
    params: Vec<(String, f64)>,
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    dataset: DatasetArgs,
    #[arg(long)]
    n: Option<usize>,
    /// Output CSV path.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ClusterArgs {
    /// Sample CSV with columns x0..x{d-1} and an optional label column.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    l: Option<usize>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Cells per axis of the partition grid (d <= 2).
    #[arg(long)]
    grid_res: Option<usize>,
}

#[derive(Args)]
struct DiagnoseArgs {
    /// Generator as JSON: a dataset spec or a mixing measure.
    #[arg(long)]
    generator: Option<PathBuf>,
    #[command(flatten)]
    dataset: DatasetArgs,
    /// model.json written by `cluster`; without it the generator's own
    /// components are diagnosed.
    #[arg(long)]
    model: Option<PathBuf>,
    /// assignment.json; defaults to a single-linkage cut of the model.
    #[arg(long)]
    assignment: Option<PathBuf>,
    #[arg(long)]
    r_wasserstein: Option<f64>,
    /// Random hull points per group for the diameter estimate.
    #[arg(long)]
    n_dirichlet: Option<usize>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

#[derive(Args)]
struct BenchmarkArgs {
    /// Comma-separated methods: npmix,kmeans,spectral,slink,gmm.
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<npmix_core::Method>>,
    /// Comma-separated dataset names with default parameters.
    #[arg(long, value_delimiter = ',')]
    datasets: Option<Vec<DatasetName>>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    l: Option<usize>,
    /// Record wall-clock times per run (makes outputs run-dependent).
    #[arg(long)]
    timing: bool,
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

fn parse_param(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected KEY=VALUE, got {s:?}"))?;
    let v: f64 = v.trim().parse().map_err(|_| format!("{v:?} is not a number"))?;
    Ok((k.trim().to_string(), v))
}

/// Command failure, mapped to the process exit code.
pub enum Failure {
    /// Bad flags or configuration (exit 1).
    Usage(String),
    /// Model, numerical or I/O failure (exit 2).
    Runtime(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Runtime(e.into())
    }
}

pub type Outcome = Result<(), Failure>;

pub fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

impl DatasetArgs {
    fn apply(&self, cfg: &mut RunConfig) -> Result<(), Failure> {
        if let Some(name) = self.dataset {
            let keep = cfg.data.dataset.as_ref().filter(|d| d.name == name).cloned();
            cfg.data.dataset = Some(keep.unwrap_or_else(|| DatasetSpec::new(name, 0)));
        }
        if !self.params.is_empty() {
            let Some(spec) = cfg.data.dataset.as_mut() else {
                return Err(usage("--param needs a dataset"));
            };
            for (k, v) in &self.params {
                spec.params.insert(k.clone(), *v);
            }
        }
        Ok(())
    }
}

fn run(cli: Cli) -> Outcome {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path).map_err(|e| usage(format!("{e:#}")))?,
        None => RunConfig::default(),
    };
    if cli.seed.is_some() {
        cfg.seed = cli.seed;
    }
    if cli.threads.is_some() {
        cfg.threads = cli.threads;
    }
    let command: fn(&RunConfig) -> Outcome = match cli.command {
        Command::Generate(a) => {
            a.dataset.apply(&mut cfg)?;
            set(&mut cfg.data.n, a.n);
            set(&mut cfg.output.file, a.output);
            generate::run
        }
        Command::Cluster(a) => {
            set(&mut cfg.data.input, a.input);
            set(&mut cfg.model.k, a.k);
            set(&mut cfg.model.l, a.l);
            set(&mut cfg.output.dir, a.output_dir);
            set(&mut cfg.grid.resolution, a.grid_res);
            cluster::run
        }
        Command::Diagnose(a) => {
            a.dataset.apply(&mut cfg)?;
            set(&mut cfg.diagnose.generator, a.generator);
            set(&mut cfg.diagnose.model, a.model);
            set(&mut cfg.diagnose.assignment, a.assignment);
            set(&mut cfg.diagnose.r_wasserstein, a.r_wasserstein);
            set(&mut cfg.diagnose.n_dirichlet, a.n_dirichlet);
            set(&mut cfg.output.dir, a.output_dir);
            diagnose::run
        }
        Command::Benchmark(a) => {
            set(&mut cfg.benchmark.methods, a.methods);
            if let Some(names) = a.datasets {
                cfg.benchmark.datasets = Some(names.into_iter().map(|n| DatasetSpec::new(n, 0)).collect());
            }
            set(&mut cfg.benchmark.runs, a.runs);
            set(&mut cfg.benchmark.n, a.n);
            set(&mut cfg.benchmark.l, a.l);
            if a.timing {
                cfg.benchmark.timing = Some(true);
            }
            set(&mut cfg.output.dir, a.output_dir);
            benchmark::run
        }
    };
    if cli.print_config {
        print!("{}", cfg.render()?);
        return Ok(());
    }
    if let Some(t) = cfg.threads {
        if t == 0 {
            return Err(usage("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global()?;
    }
    command(&cfg)
}

fn set<T>(slot: &mut Option<T>, flag: Option<T>) {
    if flag.is_some() {
        *slot = flag;
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
