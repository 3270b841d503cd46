//! Lloyd's k-means with k-means++ seeding.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed};

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansConfig {
    pub k: usize,
    pub restarts: usize,
    pub max_iters: usize,
    pub seed: u64,
}

impl KMeansConfig {
    pub fn new(k: usize, seed: u64) -> Self {
        Self {
            k,
            restarts: 10,
            max_iters: 300,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    /// Row-major `k x d` centers.
    pub centers: Vec<f64>,
    pub labels: Vec<usize>,
    /// Sum of squared distances to the assigned centers.
    pub inertia: f64,
    pub iterations: usize,
}

#[inline]
pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// k-means++ seeding on flat row-major `points` of dimension `d`.
pub fn kmeans_plus_plus<R: Rng + ?Sized>(points: &[f64], d: usize, k: usize, rng: &mut R) -> Vec<f64> {
    let n = points.len() / d;
    let row = |i: usize| &points[i * d..(i + 1) * d];
    let mut centers = Vec::with_capacity(k * d);
    let first = rng.random_range(0..n);
    centers.extend_from_slice(row(first));
    let mut nearest: Vec<f64> = (0..n).map(|i| sq_dist(row(i), row(first))).collect();
    for _ in 1..k {
        let next = match WeightedIndex::new(&nearest) {
            Ok(dist) => dist.sample(rng),
            // All remaining mass is zero: every point coincides with a center.
            Err(_) => rng.random_range(0..n),
        };
        let c = row(next).to_vec();
        for (i, best) in nearest.iter_mut().enumerate() {
            *best = best.min(sq_dist(row(i), &c));
        }
        centers.extend(c);
    }
    centers
}

fn assign(points: &[f64], d: usize, centers: &[f64], labels: &mut [usize]) -> f64 {
    let k = centers.len() / d;
    let mut inertia = 0.0;
    for (i, label) in labels.iter_mut().enumerate() {
        let x = &points[i * d..(i + 1) * d];
        let (mut best, mut best_d) = (0, f64::INFINITY);
        for c in 0..k {
            let dist = sq_dist(x, &centers[c * d..(c + 1) * d]);
            if dist < best_d {
                best = c;
                best_d = dist;
            }
        }
        *label = best;
        inertia += best_d;
    }
    inertia
}

/// Lloyd iterations from the given centers. Empty clusters are re-seeded at the
/// point farthest from its current center.
pub fn lloyd(points: &[f64], d: usize, mut centers: Vec<f64>, max_iters: usize) -> KMeansResult {
    let n = points.len() / d;
    let k = centers.len() / d;
    let mut labels = vec![usize::MAX; n];
    let mut prev = vec![usize::MAX; n];
    let mut inertia = assign(points, d, &centers, &mut labels);
    let mut iterations = 0;
    while iterations < max_iters && labels != prev {
        iterations += 1;
        prev.copy_from_slice(&labels);
        let mut sums = vec![0.0; k * d];
        let mut counts = vec![0usize; k];
        for (i, &l) in labels.iter().enumerate() {
            counts[l] += 1;
            for a in 0..d {
                sums[l * d + a] += points[i * d + a];
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                let far = (0..n)
                    .map(|i| (i, sq_dist(&points[i * d..(i + 1) * d], &centers[labels[i] * d..(labels[i] + 1) * d])))
                    .fold((0, -1.0), |b, (i, v)| if v > b.1 { (i, v) } else { b })
                    .0;
                centers[c * d..(c + 1) * d].copy_from_slice(&points[far * d..(far + 1) * d]);
            } else {
                for a in 0..d {
                    centers[c * d + a] = sums[c * d + a] / counts[c] as f64;
                }
            }
        }
        inertia = assign(points, d, &centers, &mut labels);
    }
    KMeansResult {
        centers,
        labels,
        inertia,
        iterations,
    }
}

/// Best of `cfg.restarts` seeded k-means runs (lowest inertia, ties to the
/// earliest restart).
pub fn kmeans(points: &[f64], d: usize, cfg: &KMeansConfig) -> Result<KMeansResult> {
    let n = if d == 0 { 0 } else { points.len() / d };
    if cfg.k == 0 {
        return Err(Error::InvalidParameter("k must be positive".into()));
    }
    if n < cfg.k {
        return Err(Error::InsufficientData { n, required: cfg.k });
    }
    let runs: Vec<KMeansResult> = (0..cfg.restarts.max(1))
        .into_par_iter()
        .map(|r| {
            let mut rng = rng_from_seed(derive_seed(cfg.seed, r as u64));
            let init = kmeans_plus_plus(points, d, cfg.k, &mut rng);
            lloyd(points, d, init, cfg.max_iters)
        })
        .collect();
    Ok(runs
        .into_iter()
        .reduce(|best, r| if r.inertia < best.inertia { r } else { best })
        .expect("at least one restart"))
}
