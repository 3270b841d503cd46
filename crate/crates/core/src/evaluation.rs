//! Clustering accuracy (adjusted Rand index), label matching, baseline
//! clusterers, and the benchmark harness.

use std::collections::HashMap;
use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datasets::{generate_seeded, DatasetSpec};
use crate::em::{fit, EmConfig};
use crate::error::{Error, Result};
use crate::hungarian::max_weight_assignment;
use crate::kmeans::{kmeans, sq_dist, KMeansConfig};
use crate::linkage::{cut, single_linkage, Assignment, Dissimilarity};
use crate::mixture::LabeledSample;
use crate::npmix::{npmix, NpmixConfig};
use crate::partition::PartitionModel;
use crate::rng::derive_seed;
use crate::spectral::spectral_clustering;

fn choose2(x: i128) -> i128 {
    x * (x - 1) / 2
}

/// Adjusted Rand index between two labelings of the same points.
///
/// Computed exactly in integer arithmetic with a single final division. When
/// the denominator vanishes (both labelings are all-singletons or both are a
/// single cluster) the partitions coincide and the result is 1.
pub fn ari(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::InsufficientData { n, required: 2 });
    }
    let mut table: HashMap<(usize, usize), i128> = HashMap::new();
    let mut rows: HashMap<usize, i128> = HashMap::new();
    let mut cols: HashMap<usize, i128> = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    let index: i128 = table.values().map(|&c| choose2(c)).sum();
    let sum_a: i128 = rows.values().map(|&c| choose2(c)).sum();
    let sum_b: i128 = cols.values().map(|&c| choose2(c)).sum();
    let pairs = choose2(n as i128);
    // (index - sa sb / N) / ((sa + sb) / 2 - sa sb / N), cleared of fractions.
    let num = 2 * (pairs * index - sum_a * sum_b);
    let den = pairs * (sum_a + sum_b) - 2 * sum_a * sum_b;
    if den == 0 {
        return Ok(1.0);
    }
    Ok(num as f64 / den as f64)
}

/// Dense `K x K` confusion counts with `K` the larger label range.
fn confusion(a: &[usize], b: &[usize]) -> (Vec<f64>, usize) {
    let k = a.iter().chain(b).copied().max().map_or(0, |m| m + 1);
    let mut table = vec![0.0; k * k];
    for (&x, &y) in a.iter().zip(b) {
        table[x * k + y] += 1.0;
    }
    (table, k)
}

/// Permutation `perm` with `perm[label in a] = label in b` maximizing the
/// number of points where `perm[a_i] == b_i`. The shorter label range is
/// padded with empty groups.
pub fn match_clusters(a: &[usize], b: &[usize]) -> Result<Vec<usize>> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    let (table, k) = confusion(a, b);
    Ok(max_weight_assignment(&table, k))
}

/// Number of points that agree under the best relabeling.
pub fn matched_count(a: &[usize], b: &[usize]) -> Result<usize> {
    let perm = match_clusters(a, b)?;
    Ok(a.iter().zip(b).filter(|(x, y)| perm[**x] == **y).count())
}

pub fn baseline_kmeans(data: &LabeledSample, k: usize, seed: u64) -> Result<Vec<usize>> {
    Ok(kmeans(data.as_flat(), data.dim(), &KMeansConfig::new(k, seed))?.labels)
}

/// Euclidean distances between sample points, computed on demand.
struct PointDistances<'a>(&'a LabeledSample);

impl Dissimilarity for PointDistances<'_> {
    fn size(&self) -> usize {
        self.0.len()
    }

    fn dist(&self, i: usize, j: usize) -> f64 {
        sq_dist(self.0.point(i), self.0.point(j)).sqrt()
    }
}

pub fn baseline_slink_points(data: &LabeledSample, k: usize) -> Result<Vec<usize>> {
    if data.len() < k {
        return Err(Error::InsufficientData { n: data.len(), required: k });
    }
    let dendro = single_linkage(&PointDistances(data));
    Ok(cut(&dendro, k)?.map().to_vec())
}

/// A `K`-component mixture fit, labeling each point by its most likely component.
pub fn baseline_gmm(data: &LabeledSample, k: usize, seed: u64) -> Result<Vec<usize>> {
    let fitted = fit(data, &EmConfig::new(k, seed))?;
    let model = PartitionModel::from_grouping(&fitted.mixture, &Assignment::identity(k))?;
    Ok(model.classify_all(data.as_flat())?.iter().map(|c| c.label).collect())
}

pub fn baseline_spectral(data: &LabeledSample, k: usize, seed: u64) -> Result<Vec<usize>> {
    spectral_clustering(data, k, seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Npmix,
    Kmeans,
    Spectral,
    Slink,
    Gmm,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Npmix, Method::Kmeans, Method::Spectral, Method::Slink, Method::Gmm];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Npmix => "npmix",
            Method::Kmeans => "kmeans",
            Method::Spectral => "spectral",
            Method::Slink => "slink",
            Method::Gmm => "gmm",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown method {s}")))
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Runs one clustering method on a sample.
pub fn cluster_with(method: Method, data: &LabeledSample, k: usize, l: Option<usize>, seed: u64) -> Result<Vec<usize>> {
    match method {
        Method::Npmix => {
            let mut cfg = NpmixConfig::new(k, data.len(), seed);
            if let Some(l) = l {
                cfg.em.l = l;
            }
            Ok(npmix(data, &cfg)?.labels())
        }
        Method::Kmeans => baseline_kmeans(data, k, seed),
        Method::Spectral => baseline_spectral(data, k, seed),
        Method::Slink => baseline_slink_points(data, k),
        Method::Gmm => baseline_gmm(data, k, seed),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkOptions {
    pub methods: Vec<Method>,
    pub datasets: Vec<DatasetSpec>,
    pub runs: usize,
    pub n: usize,
    pub seed: u64,
    /// Overrides the default component count for the npmix method.
    pub l: Option<usize>,
    /// Record wall-clock times; off by default so outputs are reproducible.
    pub timing: bool,
}

/// One (method, dataset, run) outcome; `ari` is `None` when the method failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub method: Method,
    pub dataset: String,
    pub run: usize,
    pub seed: u64,
    pub ari: Option<f64>,
    pub wall_ms: u64,
}

/// Summary over the runs of one (method, dataset) pair. Failed runs enter
/// `ari_values` as 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkResult {
    pub method: Method,
    pub dataset: String,
    pub runs: usize,
    pub failures: usize,
    pub ari_values: Vec<f64>,
    pub mean_ari: f64,
    pub median_ari: f64,
    /// Sample standard deviation (0 for a single run).
    pub std_ari: f64,
}

impl BenchmarkResult {
    pub fn from_values(method: Method, dataset: &str, ari_values: Vec<f64>, failures: usize) -> Self {
        let (mean_ari, median_ari, std_ari) = summarize(&ari_values);
        Self {
            method,
            dataset: dataset.to_string(),
            runs: ari_values.len(),
            failures,
            ari_values,
            mean_ari,
            median_ari,
            std_ari,
        }
    }
}

/// Mean, median and sample standard deviation.
pub fn summarize(values: &[f64]) -> (f64, f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    };
    let std = if n > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    (mean, median, std)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub records: Vec<RunRecord>,
    pub results: Vec<BenchmarkResult>,
}

fn name_stream(name: &str) -> u64 {
    // FNV-1a, so data seeds depend on the dataset name rather than list order.
    name.bytes()
        .fold(0xcbf2_9ce4_8422_2325_u64, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

/// Sampling seed for one run of one dataset.
pub fn run_seed(seed: u64, dataset: &DatasetSpec, run: usize) -> u64 {
    let label = format!("{}:{}", dataset.name, serde_json::to_string(&dataset.params).unwrap_or_default());
    derive_seed(derive_seed(seed, name_stream(&label)), run as u64)
}

/// Draws `runs` samples per dataset, clusters each with every method and
/// scores against the ground truth. Results are ordered by (method, dataset, run).
pub fn run_benchmark(opts: &BenchmarkOptions) -> Result<BenchmarkReport> {
    if opts.runs == 0 {
        return Err(Error::InvalidParameter("runs must be at least 1".into()));
    }
    for (i, d) in opts.datasets.iter().enumerate() {
        d.validate()?;
        if opts.datasets[..i].iter().any(|e| e.name == d.name) {
            return Err(Error::InvalidParameter(format!("dataset {} listed twice", d.name)));
        }
    }
    let jobs: Vec<(usize, usize)> = (0..opts.datasets.len())
        .flat_map(|d| (0..opts.runs).map(move |r| (d, r)))
        .collect();
    let outcomes: Vec<Vec<RunRecord>> = jobs
        .par_iter()
        .map(|&(di, run)| {
            let spec = &opts.datasets[di];
            let seed = run_seed(opts.seed, spec, run);
            let k = spec.k().expect("validated");
            let data = generate_seeded(spec, opts.n, seed);
            opts.methods
                .iter()
                .map(|&method| {
                    let start = Instant::now();
                    let ari = data.as_ref().ok().and_then(|data| {
                        let labels = cluster_with(method, data, k, opts.l, derive_seed(seed, 1)).ok()?;
                        ari(data.labels().expect("generated samples are labeled"), &labels).ok()
                    });
                    RunRecord {
                        method,
                        dataset: spec.name.to_string(),
                        run,
                        seed,
                        ari,
                        wall_ms: if opts.timing { start.elapsed().as_millis() as u64 } else { 0 },
                    }
                })
                .collect()
        })
        .collect();
    let mut records: Vec<RunRecord> = outcomes.into_iter().flatten().collect();
    let method_pos = |m: Method| opts.methods.iter().position(|x| *x == m).unwrap_or(usize::MAX);
    let dataset_pos = |name: &str| opts.datasets.iter().position(|d| d.name.as_str() == name).unwrap_or(usize::MAX);
    records.sort_by_key(|r| (method_pos(r.method), dataset_pos(&r.dataset), r.run));

    let mut results = Vec::new();
    for &method in &opts.methods {
        for spec in &opts.datasets {
            let name = spec.name.to_string();
            let rows: Vec<&RunRecord> = records
                .iter()
                .filter(|r| r.method == method && r.dataset == name)
                .collect();
            let failures = rows.iter().filter(|r| r.ari.is_none()).count();
            let values = rows.iter().map(|r| r.ari.unwrap_or(0.0)).collect();
            results.push(BenchmarkResult::from_values(method, &name, values, failures));
        }
    }
    Ok(BenchmarkReport { records, results })
}

impl BenchmarkReport {
    /// Columns `method,dataset,run,seed,ari,wall_ms`; failed runs leave `ari` empty.
    pub fn write_runs_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "method,dataset,run,seed,ari,wall_ms")?;
        for r in &self.records {
            let ari = r.ari.map(|v| format!("{v:.17e}")).unwrap_or_default();
            writeln!(out, "{},{},{},{},{},{}", r.method, r.dataset, r.run, r.seed, ari, r.wall_ms)?;
        }
        Ok(())
    }

    /// Columns `method,dataset,runs,failures,mean_ari,median_ari,std_ari`.
    pub fn write_summary_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "method,dataset,runs,failures,mean_ari,median_ari,std_ari")?;
        for r in &self.results {
            writeln!(
                out,
                "{},{},{},{},{:.17e},{:.17e},{:.17e}",
                r.method, r.dataset, r.runs, r.failures, r.mean_ari, r.median_ari, r.std_ari
            )?;
        }
        Ok(())
    }

    /// Fixed-width table with one row per method and mean/median/std per dataset.
    pub fn summary_table(&self) -> String {
        let mut datasets: Vec<&str> = Vec::new();
        for r in &self.results {
            if !datasets.contains(&r.dataset.as_str()) {
                datasets.push(&r.dataset);
            }
        }
        let mut out = format!("{:<10}", "method");
        for d in &datasets {
            out.push_str(&format!(" | {:^26}", d));
        }
        out.push('\n');
        out.push_str(&format!("{:<10}", ""));
        for _ in &datasets {
            out.push_str(&format!(" | {:>8} {:>8} {:>8}", "mean", "median", "std"));
        }
        out.push('\n');
        let mut methods: Vec<Method> = Vec::new();
        for r in &self.results {
            if !methods.contains(&r.method) {
                methods.push(r.method);
            }
        }
        for m in methods {
            out.push_str(&format!("{:<10}", m.as_str()));
            for d in &datasets {
                match self.results.iter().find(|r| r.method == m && r.dataset == *d) {
                    Some(r) => out.push_str(&format!(" | {:>8.3} {:>8.3} {:>8.3}", r.mean_ari, r.median_ari, r.std_ari)),
                    None => out.push_str(&format!(" | {:>26}", "")),
                }
            }
            out.push('\n');
        }
        out
    }
}
