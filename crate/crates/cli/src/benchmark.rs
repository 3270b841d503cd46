use npmix_core::datasets::{DatasetName, DatasetSpec};
use npmix_core::evaluation::{run_benchmark, BenchmarkOptions, Method};

use crate::artifacts::Artifacts;
use crate::config::RunConfig;
use crate::{usage, Outcome};

pub const DEFAULT_RUNS: usize = 20;
pub const DEFAULT_N: usize = 2000;

pub fn run(cfg: &RunConfig) -> Outcome {
    let b = &cfg.benchmark;
    let dir = cfg.output.dir.as_ref().ok_or_else(|| usage("benchmark needs --output-dir"))?;
    let opts = BenchmarkOptions {
        methods: b.methods.clone().unwrap_or_else(|| Method::ALL.to_vec()),
        datasets: b.datasets.clone().unwrap_or_else(|| {
            vec![
                DatasetSpec::new(DatasetName::MoonsBalanced, 0),
                DatasetSpec::new(DatasetName::MoonsUnbalanced, 0),
            ]
        }),
        runs: b.runs.unwrap_or(DEFAULT_RUNS),
        n: b.n.unwrap_or(DEFAULT_N),
        seed: cfg.seed.unwrap_or(0),
        l: b.l,
        timing: b.timing.unwrap_or(false),
    };
    if opts.methods.is_empty() || opts.datasets.is_empty() {
        return Err(usage("benchmark needs at least one method and one dataset"));
    }
    if opts.runs == 0 {
        return Err(usage("--runs must be at least 1"));
    }
    for (i, d) in opts.datasets.iter().enumerate() {
        if opts.datasets[..i].iter().any(|e| e.name == d.name) {
            return Err(usage(format!("dataset {} is listed twice", d.name)));
        }
        d.validate().map_err(|e| usage(e.to_string()))?;
        let k = d.k().map_err(|e| usage(e.to_string()))?;
        if opts.n < k {
            return Err(usage(format!("--n {} is below K = {k} for {}", opts.n, d.name)));
        }
        if opts.l.is_some_and(|l| l < k) {
            return Err(usage(format!("K = {k} for {} exceeds --l", d.name)));
        }
    }

    let report = run_benchmark(&opts)?;
    let mut out = Artifacts::create(dir)?;
    let mut buf = Vec::new();
    report.write_runs_csv(&mut buf)?;
    out.write("runs.csv", &buf)?;
    buf.clear();
    report.write_summary_csv(&mut buf)?;
    out.write("summary.csv", &buf)?;
    out.finish("benchmark", cfg, Default::default())?;

    print!("{}", report.summary_table());
    let failures: usize = report.results.iter().map(|r| r.failures).sum();
    if failures > 0 {
        println!("{failures} failed runs (scored as ARI 0; see runs.csv)");
        for r in report.records.iter().filter(|r| r.ari.is_none()) {
            println!("  failed: {} on {} run {}", r.method, r.dataset, r.run);
        }
    }
    Ok(())
}
