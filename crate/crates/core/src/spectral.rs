//! Normalized spectral clustering (Ng, Jordan and Weiss embedding).

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kmeans::{kmeans, sq_dist, KMeansConfig};
use crate::mixture::LabeledSample;
use crate::rng::{derive_seed, rng_from_seed};

const EXTRA_VECTORS: usize = 8;
const MAX_SWEEPS: usize = 400;
const RITZ_EVERY: usize = 5;
const RITZ_TOL: f64 = 1e-10;
const BANDWIDTH_SUBSAMPLE: usize = 1000;

/// Top-`k` eigenpairs of a symmetric positive semi-definite matrix by
/// block subspace iteration with Rayleigh-Ritz extraction. Eigenvalues are
/// returned in decreasing order with eigenvectors as matrix columns.
pub fn top_eigenpairs(a: &DMatrix<f64>, k: usize, seed: u64) -> (Vec<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let p = (k + EXTRA_VECTORS).min(n);
    if p == n {
        return sorted_eigen(a.clone(), k);
    }
    let mut rng = rng_from_seed(seed);
    let mut q = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
    q = q.qr().q();
    let mut prev = vec![f64::INFINITY; k];
    for sweep in 1..=MAX_SWEEPS {
        q = par_mul(a, &q).qr().q();
        if sweep % RITZ_EVERY == 0 || sweep == MAX_SWEEPS {
            let (vals, vecs) = sorted_eigen(q.transpose() * par_mul(a, &q), p);
            q = &q * vecs;
            let change = vals[..k].iter().zip(&prev).map(|(v, p)| (v - p).abs()).fold(0.0, f64::max);
            prev.copy_from_slice(&vals[..k]);
            if change < RITZ_TOL {
                break;
            }
        }
    }
    let vecs = q.columns(0, k).into_owned();
    (prev, vecs)
}

fn sorted_eigen(m: DMatrix<f64>, k: usize) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]).then(i.cmp(&j)));
    let vals = order[..k].iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = DMatrix::from_fn(eig.eigenvectors.nrows(), k, |r, c| eig.eigenvectors[(r, order[c])]);
    (vals, vecs)
}

/// Dense product with rows computed in parallel.
fn par_mul(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, p) = (a.nrows(), b.ncols());
    let at = a.transpose();
    let cols: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let row = at.column(i);
            (0..p).map(|j| row.dot(&b.column(j))).collect()
        })
        .collect();
    DMatrix::from_fn(n, p, |i, j| cols[i][j])
}

/// Median pairwise Euclidean distance on an evenly strided subsample.
fn median_distance(data: &LabeledSample) -> f64 {
    let stride = data.len().div_ceil(BANDWIDTH_SUBSAMPLE).max(1);
    let idx: Vec<usize> = (0..data.len()).step_by(stride).collect();
    let mut dist = Vec::new();
    for (a, &i) in idx.iter().enumerate() {
        for &j in &idx[a + 1..] {
            dist.push(sq_dist(data.point(i), data.point(j)).sqrt());
        }
    }
    if dist.is_empty() {
        return 0.0;
    }
    let mid = dist.len() / 2;
    *dist.select_nth_unstable_by(mid, f64::total_cmp).1
}

/// Spectral clustering into `k` groups: Gaussian affinity with median-distance
/// bandwidth, symmetric normalization `D^-1/2 W D^-1/2`, top-`k` eigenvectors
/// (the bottom of the normalized Laplacian), row normalization and k-means.
pub fn spectral_clustering(data: &LabeledSample, k: usize, seed: u64) -> Result<Vec<usize>> {
    let n = data.len();
    if k == 0 {
        return Err(Error::InvalidParameter("k must be positive".into()));
    }
    if n < k {
        return Err(Error::InsufficientData { n, required: k });
    }
    let sigma = median_distance(data);
    if !(sigma > 0.0) {
        return Err(Error::DegenerateInput("median pairwise distance is zero".into()));
    }
    let scale = 1.0 / (2.0 * sigma * sigma);
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .map(|j| if i == j { 0.0 } else { (-sq_dist(data.point(i), data.point(j)) * scale).exp() })
                .collect()
        })
        .collect();
    let degree: Vec<f64> = rows.iter().map(|r| r.iter().sum()).collect();
    if degree.iter().any(|d| !(*d > 0.0)) {
        return Err(Error::DegenerateInput("a point has zero affinity to all others".into()));
    }
    let inv_sqrt: Vec<f64> = degree.iter().map(|d| 1.0 / d.sqrt()).collect();
    // (I + D^-1/2 W D^-1/2) / 2 has the same eigenvectors with spectrum in [0, 1].
    let m = DMatrix::from_fn(n, n, |i, j| {
        let off = rows[i][j] * inv_sqrt[i] * inv_sqrt[j];
        0.5 * (off + if i == j { 1.0 } else { 0.0 })
    });
    drop(rows);
    let (_, vecs) = top_eigenpairs(&m, k, derive_seed(seed, 0));
    let mut embedding = Vec::with_capacity(n * k);
    for i in 0..n {
        let row: Vec<f64> = (0..k).map(|c| vecs[(i, c)]).collect();
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        embedding.extend(row.into_iter().map(|v| if norm > 0.0 { v / norm } else { 0.0 }));
    }
    Ok(kmeans(&embedding, k, &KMeansConfig::new(k, derive_seed(seed, 1)))?.labels)
}
