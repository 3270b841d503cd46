//! Independent reference implementations for the integration tests: Gaussian
//! densities written out from the textbook formula and fixed-grid trapezoid
//! integration, sharing no code with the library.

#![allow(dead_code)]

use std::f64::consts::PI;

use npmix_core::mixture::{GaussianComponent, GaussianMixture};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Density of `N(mean, cov)` for `d <= 3` via the explicit inverse and determinant.
pub fn pdf(c: &GaussianComponent, x: &[f64]) -> f64 {
    let m = c.mean();
    let s = c.covariance();
    match c.dim() {
        1 => {
            let v = s[0];
            (-(x[0] - m[0]).powi(2) / (2.0 * v)).exp() / (2.0 * PI * v).sqrt()
        }
        2 => {
            let (a, b, d) = (s[0], s[1], s[3]);
            let det = a * d - b * b;
            let (u, w) = (x[0] - m[0], x[1] - m[1]);
            let q = (d * u * u - 2.0 * b * u * w + a * w * w) / det;
            (-0.5 * q).exp() / (2.0 * PI * det.sqrt())
        }
        3 => {
            let at = |i: usize, j: usize| s[i * 3 + j];
            let cof = |i: usize, j: usize| {
                let r: Vec<usize> = (0..3).filter(|&k| k != i).collect();
                let c: Vec<usize> = (0..3).filter(|&k| k != j).collect();
                let minor = at(r[0], c[0]) * at(r[1], c[1]) - at(r[0], c[1]) * at(r[1], c[0]);
                if (i + j) % 2 == 0 {
                    minor
                } else {
                    -minor
                }
            };
            let det: f64 = (0..3).map(|j| at(0, j) * cof(0, j)).sum();
            let u: Vec<f64> = (0..3).map(|i| x[i] - m[i]).collect();
            let mut q = 0.0;
            for i in 0..3 {
                for j in 0..3 {
                    // inverse[i][j] = cof(j, i) / det
                    q += u[i] * cof(j, i) / det * u[j];
                }
            }
            (-0.5 * q).exp() / ((2.0 * PI).powi(3) * det).sqrt()
        }
        d => panic!("oracle density supports d <= 3, got {d}"),
    }
}

pub fn mix_pdf(q: &GaussianMixture, x: &[f64]) -> f64 {
    q.weights().iter().zip(q.components()).map(|(w, c)| w * pdf(c, x)).sum()
}

/// Composite trapezoid rule on `n` equally spaced nodes.
pub fn trapz_1d(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> f64 {
    let h = (hi - lo) / (n - 1) as f64;
    let mut s = 0.5 * (f(lo) + f(hi));
    for i in 1..n - 1 {
        s += f(lo + h * i as f64);
    }
    s * h
}

/// Tensor-product trapezoid rule on an `n x n` grid.
pub fn trapz_2d(f: impl Fn(f64, f64) -> f64, bx: (f64, f64), by: (f64, f64), n: usize) -> f64 {
    let hx = (bx.1 - bx.0) / (n - 1) as f64;
    let hy = (by.1 - by.0) / (n - 1) as f64;
    let wt = |i: usize| if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
    let mut s = 0.0;
    for i in 0..n {
        let x = bx.0 + hx * i as f64;
        for j in 0..n {
            s += wt(i) * wt(j) * f(x, by.0 + hy * j as f64);
        }
    }
    s * hx * hy
}

/// Per-axis box covering every component out to `span` standard deviations.
pub fn bounding_box(components: &[GaussianComponent], span: f64) -> Vec<(f64, f64)> {
    let d = components[0].dim();
    (0..d)
        .map(|a| {
            components.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), c| {
                let sd = c.covariance()[a * d + a].sqrt();
                (lo.min(c.mean()[a] - span * sd), hi.max(c.mean()[a] + span * sd))
            })
        })
        .collect()
}

/// Hellinger distance between two mixtures in `d <= 2` by trapezoid quadrature
/// of `sqrt(p q)`.
pub fn hellinger_oracle(p: &GaussianMixture, q: &GaussianMixture, n: usize) -> f64 {
    let comps: Vec<GaussianComponent> = p.components().iter().chain(q.components()).cloned().collect();
    let bx = bounding_box(&comps, 12.0);
    let bc = match p.dim() {
        1 => trapz_1d(|x| (mix_pdf(p, &[x]) * mix_pdf(q, &[x])).sqrt(), bx[0].0, bx[0].1, n),
        2 => trapz_2d(|x, y| (mix_pdf(p, &[x, y]) * mix_pdf(q, &[x, y])).sqrt(), bx[0], bx[1], n),
        d => panic!("oracle supports d <= 2, got {d}"),
    };
    (1.0 - bc).max(0.0).sqrt()
}

/// Random component with mean in `[-3, 3]^d` and a well-conditioned covariance.
pub fn random_component<R: Rng>(rng: &mut R, d: usize) -> GaussianComponent {
    let mean: Vec<f64> = (0..d).map(|_| rng.random_range(-3.0..3.0)).collect();
    let a: Vec<f64> = (0..d * d).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut cov = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            cov[i * d + j] = (0..d).map(|k| a[i * d + k] * a[j * d + k]).sum::<f64>();
        }
        cov[i * d + i] += 0.3;
    }
    for i in 0..d {
        for j in 0..i {
            cov[j * d + i] = cov[i * d + j];
        }
    }
    GaussianComponent::new(mean, cov).unwrap()
}

pub fn random_weights<R: Rng>(rng: &mut R, m: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..m).map(|_| rng.random_range(0.1..1.0)).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

pub fn random_mixture<R: Rng>(rng: &mut R, d: usize, m: usize) -> GaussianMixture {
    let comps = (0..m).map(|_| random_component(rng, d)).collect();
    GaussianMixture::new(random_weights(rng, m), comps).unwrap()
}

/// Random surjective map of `l` items onto `k` groups.
pub fn random_surjection<R: Rng>(rng: &mut R, l: usize, k: usize) -> Vec<usize> {
    let mut map: Vec<usize> = (0..l).map(|i| if i < k { i } else { rng.random_range(0..k) }).collect();
    for i in (1..l).rev() {
        map.swap(i, rng.random_range(0..=i));
    }
    map
}

/// Adjusted Rand index by enumerating all point pairs.
pub fn ari_pairs(a: &[usize], b: &[usize]) -> f64 {
    let n = a.len();
    let (mut both, mut only_a, mut only_b, mut neither) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..n {
        for j in (i + 1)..n {
            match (a[i] == a[j], b[i] == b[j]) {
                (true, true) => both += 1,
                (true, false) => only_a += 1,
                (false, true) => only_b += 1,
                (false, false) => neither += 1,
            }
        }
    }
    let num = 2 * (both * neither - only_a * only_b);
    let den = (both + only_a) * (only_a + neither) + (both + only_b) * (only_b + neither);
    if den == 0 {
        1.0
    } else {
        num as f64 / den as f64
    }
}

/// All permutations of `0..n` in lexicographic order.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                rec(prefix, used, out);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; n], &mut out);
    out
}
