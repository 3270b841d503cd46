//! Overfitted Gaussian mixture estimation by EM with covariance regularization
//! and weight clipping.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kmeans::{kmeans_plus_plus, lloyd};
use crate::mixture::{log_sum_exp, GaussianComponent, GaussianMixture, LabeledSample};
use crate::rng::{derive_seed, rng_from_seed};

/// Sufficient statistics are accumulated over fixed-size chunks of points and
/// reduced in chunk order, so results do not depend on the thread count.
const CHUNK: usize = 256;
/// Components with less total responsibility than this keep their parameters.
const MIN_RESPONSIBILITY: f64 = 1e-8;
const HEURISTIC_SUBSAMPLE: usize = 512;
const INIT_LLOYD_ITERS: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmConfig {
    /// Number of mixture components `L`.
    pub l: usize,
    pub max_iters: usize,
    /// Relative log-likelihood change that counts as converged.
    pub tol: f64,
    /// Ridge added to every covariance diagonal. `None` picks `1e-4` times the
    /// median pairwise squared distance of the data.
    pub cov_ridge: Option<f64>,
    /// Lower bound on every weight. `None` means `1 / (10 L)`.
    pub weight_floor: Option<f64>,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self {
            l: 1,
            max_iters: 500,
            tol: 1e-7,
            cov_ridge: None,
            weight_floor: None,
            restarts: 5,
            seed: 0,
        }
    }
}

impl EmConfig {
    pub fn new(l: usize, seed: u64) -> Self {
        Self {
            l,
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.l == 0 {
            return Err(Error::InvalidParameter("L must be at least 1".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidParameter(format!("tol must be positive, got {}", self.tol)));
        }
        if let Some(r) = self.cov_ridge {
            if !(r >= 0.0 && r.is_finite()) {
                return Err(Error::InvalidParameter(format!("cov_ridge must be >= 0, got {r}")));
            }
        }
        if let Some(f) = self.weight_floor {
            if !(f >= 0.0 && f * (self.l as f64) < 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "weight_floor must lie in [0, 1/L), got {f} for L = {}",
                    self.l
                )));
            }
        }
        if self.restarts == 0 {
            return Err(Error::InvalidParameter("restarts must be at least 1".into()));
        }
        Ok(())
    }

    /// Fills in data-dependent defaults.
    pub fn resolve(&self, data: &LabeledSample) -> Self {
        let mut out = self.clone();
        out.weight_floor = Some(self.weight_floor.unwrap_or(1.0 / (10.0 * self.l as f64)));
        out.cov_ridge = Some(self.cov_ridge.unwrap_or_else(|| 1e-4 * median_sq_distance(data)));
        out
    }
}

/// Median pairwise squared distance over an evenly strided subsample.
pub fn median_sq_distance(data: &LabeledSample) -> f64 {
    let n = data.len();
    let stride = n.div_ceil(HEURISTIC_SUBSAMPLE).max(1);
    let idx: Vec<usize> = (0..n).step_by(stride).collect();
    let mut d2 = Vec::with_capacity(idx.len() * idx.len() / 2);
    for (a, &i) in idx.iter().enumerate() {
        for &j in &idx[a + 1..] {
            d2.push(crate::kmeans::sq_dist(data.point(i), data.point(j)));
        }
    }
    if d2.is_empty() {
        return 1.0;
    }
    let mid = d2.len() / 2;
    let (_, m, _) = d2.select_nth_unstable_by(mid, f64::total_cmp);
    if *m > 0.0 {
        *m
    } else {
        1.0
    }
}

/// Result of a fit. Serializes as the mixture JSON plus a `fit_meta` object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "FitFile", from = "FitFile")]
pub struct FitResult {
    pub mixture: GaussianMixture,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub converged: bool,
    pub restart_index: usize,
    /// The configuration with defaults resolved.
    pub config: EmConfig,
    /// Log-likelihood at the start of every iteration, then the final value.
    pub trace: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct FitMeta {
    log_likelihood: f64,
    iterations: usize,
    converged: bool,
    restart_index: usize,
    config: EmConfig,
    trace: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct FitFile {
    #[serde(flatten)]
    mixture: GaussianMixture,
    fit_meta: FitMeta,
}

impl From<FitResult> for FitFile {
    fn from(r: FitResult) -> Self {
        FitFile {
            mixture: r.mixture,
            fit_meta: FitMeta {
                log_likelihood: r.log_likelihood,
                iterations: r.iterations,
                converged: r.converged,
                restart_index: r.restart_index,
                config: r.config,
                trace: r.trace,
            },
        }
    }
}

impl From<FitFile> for FitResult {
    fn from(f: FitFile) -> Self {
        FitResult {
            mixture: f.mixture,
            log_likelihood: f.fit_meta.log_likelihood,
            iterations: f.fit_meta.iterations,
            converged: f.fit_meta.converged,
            restart_index: f.fit_meta.restart_index,
            config: f.fit_meta.config,
            trace: f.fit_meta.trace,
        }
    }
}

/// Total log-likelihood `sum_i log f(x_i)`, evaluated in log space.
pub fn loglik(mixture: &GaussianMixture, data: &LabeledSample) -> Result<f64> {
    if mixture.dim() != data.dim() {
        return Err(Error::DimensionMismatch {
            expected: mixture.dim(),
            found: data.dim(),
        });
    }
    let chunks: Vec<f64> = data
        .as_flat()
        .par_chunks(CHUNK * data.dim())
        .map(|chunk| chunk.chunks(data.dim()).map(|x| mixture.log_density_unchecked(x)).sum())
        .collect();
    Ok(chunks.into_iter().sum())
}

/// Fits an `L`-component mixture, keeping the restart with the highest final
/// log-likelihood (ties to the lowest restart index).
pub fn fit(data: &LabeledSample, cfg: &EmConfig) -> Result<FitResult> {
    cfg.validate()?;
    let n = data.len();
    if n < cfg.l {
        return Err(Error::InsufficientData { n, required: cfg.l });
    }
    let cfg = cfg.resolve(data);
    let d = data.dim();
    // Center the data so second moments do not lose precision far from the origin.
    let mut shift = vec![0.0; d];
    for x in data.points() {
        for a in 0..d {
            shift[a] += x[a] / n as f64;
        }
    }
    let centered: Vec<f64> = data
        .as_flat()
        .chunks(d)
        .flat_map(|x| x.iter().zip(&shift).map(|(v, s)| v - s).collect::<Vec<_>>())
        .collect();

    let runs: Vec<Option<Run>> = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| run_em(&centered, d, &cfg, derive_seed(cfg.seed, r as u64)))
        .collect();
    let (restart_index, best) = runs
        .into_iter()
        .enumerate()
        .filter_map(|(i, r)| r.map(|r| (i, r)))
        .reduce(|best, cur| if cur.1.log_likelihood > best.1.log_likelihood { cur } else { best })
        .ok_or_else(|| Error::FitFailure(format!("all {} restarts diverged", cfg.restarts)))?;

    let components = best
        .components
        .into_iter()
        .map(|c| {
            let mean = c.mean().iter().zip(&shift).map(|(m, s)| m + s).collect();
            GaussianComponent::new(mean, c.covariance().to_vec())
        })
        .collect::<Result<Vec<_>>>()?;
    let mixture = GaussianMixture::new(best.weights, components)?;
    Ok(FitResult {
        mixture,
        log_likelihood: best.log_likelihood,
        iterations: best.iterations,
        converged: best.converged,
        restart_index,
        config: cfg,
        trace: best.trace,
    })
}

struct Run {
    weights: Vec<f64>,
    components: Vec<GaussianComponent>,
    log_likelihood: f64,
    iterations: usize,
    converged: bool,
    trace: Vec<f64>,
}

/// Clips weights to `floor` and rescales the rest proportionally, repeating
/// until no weight is below the floor.
pub fn project_weights(weights: &mut [f64], floor: f64) {
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    if floor <= 0.0 {
        return;
    }
    let mut clipped = vec![false; weights.len()];
    loop {
        let mut changed = false;
        for (w, c) in weights.iter_mut().zip(clipped.iter_mut()) {
            if !*c && *w < floor {
                *w = floor;
                *c = true;
                changed = true;
            }
        }
        if !changed {
            return;
        }
        let fixed = floor * clipped.iter().filter(|c| **c).count() as f64;
        let free: f64 = weights.iter().zip(&clipped).filter(|(_, c)| !**c).map(|(w, _)| w).sum();
        if free <= 0.0 {
            return;
        }
        let scale = (1.0 - fixed) / free;
        for (w, c) in weights.iter_mut().zip(&clipped) {
            if !*c {
                *w *= scale;
            }
        }
    }
}

fn with_ridge(cov: &mut [f64], d: usize, ridge: f64) {
    for a in 0..d {
        cov[a * d + a] += ridge;
    }
}

fn initialize(points: &[f64], d: usize, cfg: &EmConfig, seed: u64) -> Option<(Vec<f64>, Vec<GaussianComponent>)> {
    let l = cfg.l;
    let n = points.len() / d;
    let mut rng = rng_from_seed(seed);
    let init = kmeans_plus_plus(points, d, l, &mut rng);
    let km = lloyd(points, d, init, INIT_LLOYD_ITERS);
    let mut pooled = vec![0.0; d * d];
    let mut counts = vec![0.0_f64; l];
    for (i, &c) in km.labels.iter().enumerate() {
        counts[c] += 1.0;
        let x = &points[i * d..(i + 1) * d];
        let mu = &km.centers[c * d..(c + 1) * d];
        for a in 0..d {
            for b in 0..d {
                pooled[a * d + b] += (x[a] - mu[a]) * (x[b] - mu[b]) / n as f64;
            }
        }
    }
    with_ridge(&mut pooled, d, cfg.cov_ridge.unwrap_or(0.0));
    let comps = (0..l)
        .map(|c| GaussianComponent::new(km.centers[c * d..(c + 1) * d].to_vec(), pooled.clone()).ok())
        .collect::<Option<Vec<_>>>()?;
    let mut weights: Vec<f64> = counts.iter().map(|c| c.max(1.0)).collect();
    project_weights(&mut weights, cfg.weight_floor.unwrap_or(0.0));
    Some((weights, comps))
}

/// Per-chunk responsibilities summed into `(N_k, sum x, sum x x^T)` plus the
/// chunk log-likelihood.
struct Stats {
    nk: Vec<f64>,
    sx: Vec<f64>,
    sxx: Vec<f64>,
    ll: f64,
}

fn e_step(points: &[f64], d: usize, log_w: &[f64], comps: &[GaussianComponent]) -> Stats {
    let l = comps.len();
    let parts: Vec<Stats> = points
        .par_chunks(CHUNK * d)
        .map(|chunk| {
            let mut s = Stats {
                nk: vec![0.0; l],
                sx: vec![0.0; l * d],
                sxx: vec![0.0; l * d * d],
                ll: 0.0,
            };
            let mut lp = vec![0.0; l];
            for x in chunk.chunks(d) {
                for (k, c) in comps.iter().enumerate() {
                    lp[k] = log_w[k] + c.log_density_unchecked(x);
                }
                let lse = log_sum_exp(&lp);
                s.ll += lse;
                for k in 0..l {
                    let r = (lp[k] - lse).exp();
                    if r == 0.0 {
                        continue;
                    }
                    s.nk[k] += r;
                    for a in 0..d {
                        s.sx[k * d + a] += r * x[a];
                        for b in 0..=a {
                            s.sxx[(k * d + a) * d + b] += r * x[a] * x[b];
                        }
                    }
                }
            }
            s
        })
        .collect();
    let mut total = Stats {
        nk: vec![0.0; l],
        sx: vec![0.0; l * d],
        sxx: vec![0.0; l * d * d],
        ll: 0.0,
    };
    for p in parts {
        total.ll += p.ll;
        total.nk.iter_mut().zip(&p.nk).for_each(|(t, v)| *t += v);
        total.sx.iter_mut().zip(&p.sx).for_each(|(t, v)| *t += v);
        total.sxx.iter_mut().zip(&p.sxx).for_each(|(t, v)| *t += v);
    }
    total
}

fn m_step(stats: &Stats, d: usize, n: usize, cfg: &EmConfig, prev: &[GaussianComponent]) -> Option<(Vec<f64>, Vec<GaussianComponent>)> {
    let l = prev.len();
    let ridge = cfg.cov_ridge.unwrap_or(0.0);
    let mut comps = Vec::with_capacity(l);
    for k in 0..l {
        let nk = stats.nk[k];
        if nk < MIN_RESPONSIBILITY {
            comps.push(prev[k].clone());
            continue;
        }
        let mean: Vec<f64> = (0..d).map(|a| stats.sx[k * d + a] / nk).collect();
        let mut cov = vec![0.0; d * d];
        for a in 0..d {
            for b in 0..=a {
                let v = stats.sxx[(k * d + a) * d + b] / nk - mean[a] * mean[b];
                cov[a * d + b] = v;
                cov[b * d + a] = v;
            }
        }
        with_ridge(&mut cov, d, ridge);
        comps.push(GaussianComponent::new(mean, cov).ok()?);
    }
    let mut weights: Vec<f64> = stats.nk.iter().map(|nk| nk / n as f64).collect();
    project_weights(&mut weights, cfg.weight_floor.unwrap_or(0.0));
    Some((weights, comps))
}

fn run_em(points: &[f64], d: usize, cfg: &EmConfig, seed: u64) -> Option<Run> {
    let n = points.len() / d;
    let (mut weights, mut comps) = initialize(points, d, cfg, seed)?;
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut prev_ll = f64::NEG_INFINITY;
    while iterations < cfg.max_iters {
        let log_w: Vec<f64> = weights.iter().map(|w| w.ln()).collect();
        let stats = e_step(points, d, &log_w, &comps);
        if !stats.ll.is_finite() {
            return None;
        }
        trace.push(stats.ll);
        if prev_ll.is_finite() && (stats.ll - prev_ll).abs() <= cfg.tol * prev_ll.abs() {
            converged = true;
            break;
        }
        prev_ll = stats.ll;
        (weights, comps) = m_step(&stats, d, n, cfg, &comps)?;
        iterations += 1;
    }
    let log_w: Vec<f64> = weights.iter().map(|w| w.ln()).collect();
    let final_ll = if converged {
        *trace.last().expect("non-empty trace")
    } else {
        let ll = e_step(points, d, &log_w, &comps).ll;
        if !ll.is_finite() {
            return None;
        }
        trace.push(ll);
        ll
    };
    Some(Run {
        weights,
        components: comps,
        log_likelihood: final_ll,
        iterations,
        converged,
        trace,
    })
}
