//! Gaussian components, finite Gaussian mixtures, and mixing measures whose
//! atoms are themselves Gaussian mixtures.
//!
//! Everything lives in `R^d` with Lebesgue base measure. Covariances are stored
//! as full symmetric matrices together with a cached lower Cholesky factor, which
//! is what density evaluation and sampling use.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linkage::Assignment;
use crate::rng::rng_from_seed;

/// Relative tolerance for covariance symmetry.
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Tolerance on `sum(weights) == 1`.
pub const WEIGHT_SUM_TOL: f64 = 1e-9;
/// Weights below this (after normalization) are rejected.
pub const MIN_WEIGHT: f64 = 1e-12;

/// A multivariate normal distribution `N(mean, covariance)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "RawComponent", into = "RawComponent")]
pub struct GaussianComponent {
    mean: Vec<f64>,
    /// Row-major `d x d`.
    covariance: Vec<f64>,
    /// Row-major lower Cholesky factor of `covariance`.
    chol: Vec<f64>,
    log_det: f64,
}

#[derive(Serialize, Deserialize)]
struct RawComponent {
    mean: Vec<f64>,
    covariance: Vec<Vec<f64>>,
}

impl TryFrom<RawComponent> for GaussianComponent {
    type Error = Error;

    fn try_from(raw: RawComponent) -> Result<Self> {
        let d = raw.mean.len();
        if raw.covariance.len() != d || raw.covariance.iter().any(|row| row.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: raw.covariance.len(),
            });
        }
        GaussianComponent::new(raw.mean, raw.covariance.concat())
    }
}

impl From<GaussianComponent> for RawComponent {
    fn from(c: GaussianComponent) -> Self {
        let d = c.dim();
        RawComponent {
            covariance: c.covariance.chunks(d).map(<[f64]>::to_vec).collect(),
            mean: c.mean,
        }
    }
}

impl PartialEq for GaussianComponent {
    fn eq(&self, other: &Self) -> bool {
        self.mean == other.mean && self.covariance == other.covariance
    }
}

impl GaussianComponent {
    /// Builds a component from a mean and a row-major covariance matrix.
    pub fn new(mean: Vec<f64>, covariance: Vec<f64>) -> Result<Self> {
        let d = mean.len();
        if d == 0 {
            return Err(Error::InvalidParameter("zero-dimensional component".into()));
        }
        if covariance.len() != d * d {
            return Err(Error::DimensionMismatch {
                expected: d * d,
                found: covariance.len(),
            });
        }
        if mean.iter().chain(&covariance).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite component parameter".into()));
        }
        let scale = covariance.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let mut asym = 0.0_f64;
        for i in 0..d {
            for j in (i + 1)..d {
                asym = asym.max((covariance[i * d + j] - covariance[j * d + i]).abs());
            }
        }
        if asym > SYMMETRY_TOL * scale {
            return Err(Error::Asymmetric(asym));
        }
        let mut covariance = covariance;
        for i in 0..d {
            for j in (i + 1)..d {
                let avg = 0.5 * (covariance[i * d + j] + covariance[j * d + i]);
                covariance[i * d + j] = avg;
                covariance[j * d + i] = avg;
            }
        }
        let chol = nalgebra::Cholesky::new(DMatrix::from_row_slice(d, d, &covariance))
            .ok_or_else(|| Error::Singular(format!("{d}x{d} covariance has no Cholesky factor")))?
            .l();
        let mut lower = vec![0.0; d * d];
        let mut log_det = 0.0;
        for i in 0..d {
            for j in 0..=i {
                lower[i * d + j] = chol[(i, j)];
            }
            if chol[(i, i)] <= 0.0 {
                return Err(Error::Singular("zero pivot in Cholesky factor".into()));
            }
            log_det += 2.0 * chol[(i, i)].ln();
        }
        Ok(Self {
            mean,
            covariance,
            chol: lower,
            log_det,
        })
    }

    /// Univariate `N(mean, variance)`.
    pub fn univariate(mean: f64, variance: f64) -> Result<Self> {
        Self::new(vec![mean], vec![variance])
    }

    /// Isotropic `N(mean, variance * I)`.
    pub fn isotropic(mean: Vec<f64>, variance: f64) -> Result<Self> {
        let d = mean.len();
        let mut cov = vec![0.0; d * d];
        for i in 0..d {
            cov[i * d + i] = variance;
        }
        Self::new(mean, cov)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Row-major covariance.
    pub fn covariance(&self) -> &[f64] {
        &self.covariance
    }

    pub fn covariance_matrix(&self) -> DMatrix<f64> {
        let d = self.dim();
        DMatrix::from_row_slice(d, d, &self.covariance)
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    /// Marginal standard deviation along `axis`.
    pub fn std_dev(&self, axis: usize) -> f64 {
        self.covariance[axis * self.dim() + axis].sqrt()
    }

    /// Smallest eigenvalue of the covariance.
    pub fn min_eigenvalue(&self) -> f64 {
        self.covariance_matrix()
            .symmetric_eigenvalues()
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn log_density(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        Ok(self.log_density_unchecked(x))
    }

    pub fn density(&self, x: &[f64]) -> Result<f64> {
        Ok(self.log_density(x)?.exp())
    }

    /// Log density without the dimension check; `x.len()` must equal `dim()`.
    pub(crate) fn log_density_unchecked(&self, x: &[f64]) -> f64 {
        let d = self.dim();
        let mut buf = [0.0_f64; 8];
        let mut heap;
        let z: &mut [f64] = if d <= buf.len() {
            &mut buf[..d]
        } else {
            heap = vec![0.0; d];
            &mut heap
        };
        // forward substitution L z = x - mean
        let mut quad = 0.0;
        for i in 0..d {
            let row = &self.chol[i * d..i * d + i + 1];
            let mut s = x[i] - self.mean[i];
            for j in 0..i {
                s -= row[j] * z[j];
            }
            let zi = s / row[i];
            z[i] = zi;
            quad += zi * zi;
        }
        -0.5 * (d as f64 * (2.0 * PI).ln() + self.log_det + quad)
    }

    pub fn sample_one<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        let d = self.dim();
        let mut z = [0.0_f64; 8];
        let mut zv;
        let z: &mut [f64] = if d <= z.len() {
            &mut z[..d]
        } else {
            zv = vec![0.0; d];
            &mut zv
        };
        for zi in z.iter_mut() {
            *zi = rng.sample(StandardNormal);
        }
        for i in 0..d {
            let mut s = self.mean[i];
            for j in 0..=i {
                s += self.chol[i * d + j] * z[j];
            }
            out[i] = s;
        }
    }
}

fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

/// Numerically stable `log(sum(exp(values)))`.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

pub fn normalize_weights(weights: Vec<f64>) -> Result<Vec<f64>> {
    if weights.is_empty() {
        return Err(Error::InvalidWeights("empty weight vector".into()));
    }
    if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
        return Err(Error::InvalidWeights(format!("weight {w} is negative or not finite")));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > WEIGHT_SUM_TOL {
        return Err(Error::InvalidWeights(format!("weights sum to {total}, not 1")));
    }
    // Leave already-normalized vectors alone so that normalizing is idempotent.
    let weights: Vec<f64> = if (total - 1.0).abs() <= weights.len() as f64 * f64::EPSILON {
        weights
    } else {
        weights.into_iter().map(|w| w / total).collect()
    };
    if let Some(w) = weights.iter().find(|w| **w < MIN_WEIGHT) {
        return Err(Error::InvalidWeights(format!("weight {w:e} below {MIN_WEIGHT:e}")));
    }
    Ok(weights)
}

/// A finite Gaussian mixture `sum_l w_l N(mu_l, Sigma_l)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMixture")]
pub struct GaussianMixture {
    weights: Vec<f64>,
    components: Vec<GaussianComponent>,
}

#[derive(Deserialize)]
struct RawMixture {
    weights: Vec<f64>,
    components: Vec<GaussianComponent>,
}

impl TryFrom<RawMixture> for GaussianMixture {
    type Error = Error;

    fn try_from(raw: RawMixture) -> Result<Self> {
        GaussianMixture::new(raw.weights, raw.components)
    }
}

impl GaussianMixture {
    pub fn new(weights: Vec<f64>, components: Vec<GaussianComponent>) -> Result<Self> {
        if weights.len() != components.len() {
            return Err(Error::LengthMismatch(weights.len(), components.len()));
        }
        let weights = normalize_weights(weights)?;
        let d = components[0].dim();
        for c in &components {
            check_dim(d, c.dim())?;
        }
        Ok(Self {
            weights,
            components,
        })
    }

    /// Mixture with one component and unit weight.
    pub fn single(component: GaussianComponent) -> Self {
        Self {
            weights: vec![1.0],
            components: vec![component],
        }
    }

    /// Skips weight validation; callers guarantee a normalized, positive vector
    /// of the right length.
    pub(crate) fn from_parts_unchecked(weights: Vec<f64>, components: Vec<GaussianComponent>) -> Self {
        debug_assert_eq!(weights.len(), components.len());
        Self {
            weights,
            components,
        }
    }

    /// Equal-weight mixture.
    pub fn uniform(components: Vec<GaussianComponent>) -> Result<Self> {
        let m = components.len();
        Self::new(vec![1.0 / m as f64; m], components)
    }

    pub fn dim(&self) -> usize {
        self.components[0].dim()
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn components(&self) -> &[GaussianComponent] {
        &self.components
    }

    /// Mean of the mixture, `sum_l w_l mu_l`.
    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim()];
        for (w, c) in self.weights.iter().zip(&self.components) {
            for (mi, ci) in m.iter_mut().zip(c.mean()) {
                *mi += w * ci;
            }
        }
        m
    }

    pub fn log_density(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        Ok(self.log_density_unchecked(x))
    }

    pub fn density(&self, x: &[f64]) -> Result<f64> {
        Ok(self.log_density(x)?.exp())
    }

    pub(crate) fn log_density_unchecked(&self, x: &[f64]) -> f64 {
        let mut buf = [0.0_f64; 32];
        let mut heap;
        let terms: &mut [f64] = if self.len() <= buf.len() {
            &mut buf[..self.len()]
        } else {
            heap = vec![0.0; self.len()];
            &mut heap
        };
        for ((t, w), c) in terms.iter_mut().zip(&self.weights).zip(&self.components) {
            *t = w.ln() + c.log_density_unchecked(x);
        }
        log_sum_exp(terms)
    }

    /// Linear-scale density, summed directly. Used on quadrature grids where
    /// the log-space detour is wasted work.
    pub(crate) fn density_unchecked(&self, x: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(&self.components)
            .map(|(w, c)| w * c.log_density_unchecked(x).exp())
            .sum()
    }

    fn sampler(&self) -> WeightedIndex<f64> {
        WeightedIndex::new(&self.weights).expect("validated weights")
    }

    /// Draws one point into `out`, returning the component index.
    pub fn sample_one<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) -> usize {
        let l = self.sampler().sample(rng);
        self.components[l].sample_one(rng, out);
        l
    }

    /// `n` i.i.d. draws; labels record the component index.
    pub fn sample(&self, n: usize, seed: u64) -> LabeledSample {
        let mut rng = rng_from_seed(seed);
        let index = self.sampler();
        let d = self.dim();
        let mut points = vec![0.0; n * d];
        let mut labels = Vec::with_capacity(n);
        for row in points.chunks_mut(d) {
            let l = index.sample(&mut rng);
            self.components[l].sample_one(&mut rng, row);
            labels.push(l);
        }
        LabeledSample {
            dim: d,
            points,
            labels: Some(labels),
        }
    }
}

/// A finite mixing measure whose atoms are Gaussian mixtures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMixing")]
pub struct MixingMeasure {
    weights: Vec<f64>,
    atoms: Vec<GaussianMixture>,
}

#[derive(Deserialize)]
struct RawMixing {
    weights: Vec<f64>,
    atoms: Vec<GaussianMixture>,
}

impl TryFrom<RawMixing> for MixingMeasure {
    type Error = Error;

    fn try_from(raw: RawMixing) -> Result<Self> {
        MixingMeasure::new(raw.weights, raw.atoms)
    }
}

impl MixingMeasure {
    pub fn new(weights: Vec<f64>, atoms: Vec<GaussianMixture>) -> Result<Self> {
        if weights.len() != atoms.len() {
            return Err(Error::LengthMismatch(weights.len(), atoms.len()));
        }
        let weights = normalize_weights(weights)?;
        let d = atoms[0].dim();
        for a in &atoms {
            check_dim(d, a.dim())?;
        }
        for i in 0..atoms.len() {
            for j in (i + 1)..atoms.len() {
                if atoms[i] == atoms[j] {
                    return Err(Error::InvalidParameter(format!(
                        "atoms {} and {} are identical",
                        i + 1,
                        j + 1
                    )));
                }
            }
        }
        Ok(Self { weights, atoms })
    }

    pub fn dim(&self) -> usize {
        self.atoms[0].dim()
    }

    /// Number of atoms `K`.
    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn atoms(&self) -> &[GaussianMixture] {
        &self.atoms
    }

    /// Density of the mixture distribution `sum_k lambda_k f_k(x)`.
    pub fn density(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        Ok(self
            .weights
            .iter()
            .zip(&self.atoms)
            .map(|(w, a)| w * a.log_density_unchecked(x).exp())
            .sum())
    }

    /// `n` i.i.d. draws; labels record the top-level atom index.
    pub fn sample(&self, n: usize, seed: u64) -> LabeledSample {
        let mut rng = rng_from_seed(seed);
        let index = WeightedIndex::new(&self.weights).expect("validated weights");
        let samplers: Vec<_> = self.atoms.iter().map(|a| a.sampler()).collect();
        let d = self.dim();
        let mut points = vec![0.0; n * d];
        let mut labels = Vec::with_capacity(n);
        for row in points.chunks_mut(d) {
            let k = index.sample(&mut rng);
            let l = samplers[k].sample(&mut rng);
            self.atoms[k].components[l].sample_one(&mut rng, row);
            labels.push(k);
        }
        LabeledSample {
            dim: d,
            points,
            labels: Some(labels),
        }
    }

    /// Flattens into a single Gaussian mixture with weights `lambda_k * w_kj`,
    /// returning the assignment of each flattened component to its atom.
    pub fn flatten(&self) -> (GaussianMixture, Assignment) {
        let mut weights = Vec::new();
        let mut components = Vec::new();
        let mut map = Vec::new();
        for (k, (lambda, atom)) in self.weights.iter().zip(&self.atoms).enumerate() {
            for (w, c) in atom.weights.iter().zip(&atom.components) {
                weights.push(lambda * w);
                components.push(c.clone());
                map.push(k);
            }
        }
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        let mixture = GaussianMixture {
            weights,
            components,
        };
        let assignment = Assignment::new(map, self.len()).expect("every atom is non-empty");
        (mixture, assignment)
    }
}

/// An `n x d` point set with optional ground-truth labels (0-based internally).
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    dim: usize,
    points: Vec<f64>,
    labels: Option<Vec<usize>>,
}

impl LabeledSample {
    pub fn new(dim: usize, points: Vec<f64>, labels: Option<Vec<usize>>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("zero-dimensional sample".into()));
        }
        if points.len() % dim != 0 {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: points.len() % dim,
            });
        }
        if let Some(labels) = &labels {
            if labels.len() != points.len() / dim {
                return Err(Error::LengthMismatch(labels.len(), points.len() / dim));
            }
        }
        Ok(Self {
            dim,
            points,
            labels,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], labels: Option<Vec<usize>>) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if let Some(r) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: r.len(),
            });
        }
        Self::new(dim, rows.concat(), labels)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.points.chunks(self.dim)
    }

    /// Row-major flat storage.
    pub fn as_flat(&self) -> &[f64] {
        &self.points
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    /// Number of distinct labels (`max + 1`), if labelled.
    pub fn num_labels(&self) -> Option<usize> {
        self.labels
            .as_ref()
            .map(|l| l.iter().max().map_or(0, |m| m + 1))
    }

    pub fn without_labels(&self) -> Self {
        Self {
            dim: self.dim,
            points: self.points.clone(),
            labels: None,
        }
    }

    /// Concatenates two samples of equal dimension.
    pub fn concat(&self, other: &Self) -> Result<Self> {
        check_dim(self.dim, other.dim)?;
        let labels = match (&self.labels, &other.labels) {
            (Some(a), Some(b)) => Some([a.as_slice(), b.as_slice()].concat()),
            _ => None,
        };
        Self::new(self.dim, [self.points.as_slice(), &other.points].concat(), labels)
    }
}
