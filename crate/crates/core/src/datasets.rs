//! Synthetic benchmark models with exact samplers and ground-truth labels.
//!
//! None of the numeric settings below come from a published source; they are
//! reconstructions chosen to give each model its qualitative character.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::{Gamma, Gumbel, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mixture::{GaussianComponent, GaussianMixture, LabeledSample, MixingMeasure};
use crate::rng::{derive_seed, rng_from_seed, SeededRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetName {
    GaussGamma,
    Gumbel,
    Poly,
    Sobolev,
    MoonsBalanced,
    MoonsUnbalanced,
    Target,
    MogFamily,
}

impl DatasetName {
    pub const ALL: [DatasetName; 8] = [
        DatasetName::GaussGamma,
        DatasetName::Gumbel,
        DatasetName::Poly,
        DatasetName::Sobolev,
        DatasetName::MoonsBalanced,
        DatasetName::MoonsUnbalanced,
        DatasetName::Target,
        DatasetName::MogFamily,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DatasetName::GaussGamma => "gauss_gamma",
            DatasetName::Gumbel => "gumbel",
            DatasetName::Poly => "poly",
            DatasetName::Sobolev => "sobolev",
            DatasetName::MoonsBalanced => "moons_balanced",
            DatasetName::MoonsUnbalanced => "moons_unbalanced",
            DatasetName::Target => "target",
            DatasetName::MogFamily => "mog_family",
        }
    }

    fn allowed_params(self) -> &'static [&'static str] {
        match self {
            DatasetName::MoonsBalanced | DatasetName::MoonsUnbalanced => &["noise"],
            DatasetName::Sobolev => &["coef_seed"],
            DatasetName::MogFamily => &["k", "atoms", "gap", "scale", "d", "family_seed"],
            _ => &[],
        }
    }
}

impl fmt::Display for DatasetName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DatasetName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DatasetName::ALL
            .into_iter()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| Error::UnknownDataset(s.to_string()))
    }
}

/// A named model plus its numeric parameters and sampling seed.
///
/// Parameters: moons take `noise` (default 0.12); sobolev takes `coef_seed`
/// (default 0); mog_family takes `k` (3), `atoms` per group (3), `gap` (20),
/// `scale` (1), `d` (2) and `family_seed` (0).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub name: DatasetName,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    #[serde(default)]
    pub seed: u64,
}

impl DatasetSpec {
    pub fn new(name: DatasetName, seed: u64) -> Self {
        Self {
            name,
            params: BTreeMap::new(),
            seed,
        }
    }

    pub fn with_param(mut self, key: &str, value: f64) -> Self {
        self.params.insert(key.to_string(), value);
        self
    }

    fn param(&self, key: &str, default: f64) -> f64 {
        self.params.get(key).copied().unwrap_or(default)
    }

    fn count_param(&self, key: &str, default: usize) -> Result<usize> {
        let v = self.param(key, default as f64);
        if v.fract() != 0.0 || v < 1.0 {
            return Err(Error::InvalidParameter(format!("{key} must be a positive integer, got {v}")));
        }
        Ok(v as usize)
    }

    pub fn validate(&self) -> Result<()> {
        let allowed = self.name.allowed_params();
        if let Some(k) = self.params.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(Error::InvalidParameter(format!("{} does not take parameter {k}", self.name)));
        }
        Generator::new(self).map(|_| ())
    }

    /// Number of ground-truth groups.
    pub fn k(&self) -> Result<usize> {
        Ok(match self.name {
            DatasetName::GaussGamma => 4,
            DatasetName::Gumbel | DatasetName::Sobolev => 3,
            DatasetName::Poly | DatasetName::MoonsBalanced | DatasetName::MoonsUnbalanced => 2,
            DatasetName::Target => 6,
            DatasetName::MogFamily => self.count_param("k", 3)?,
        })
    }

    pub fn dim(&self) -> Result<usize> {
        Ok(match self.name {
            DatasetName::GaussGamma | DatasetName::Gumbel | DatasetName::Poly | DatasetName::Sobolev => 1,
            DatasetName::MoonsBalanced | DatasetName::MoonsUnbalanced | DatasetName::Target => 2,
            DatasetName::MogFamily => self.count_param("d", 2)?,
        })
    }

    /// The exact mixing measure for models that are mixtures of Gaussian mixtures.
    pub fn mixing_measure(&self) -> Result<Option<MixingMeasure>> {
        Ok(match Generator::new(self)?.model {
            Model::Mixing(m) => Some(m),
            _ => None,
        })
    }
}

/// `n` labeled draws using `spec.seed`.
pub fn generate(spec: &DatasetSpec, n: usize) -> Result<LabeledSample> {
    generate_seeded(spec, n, spec.seed)
}

/// `n` labeled draws with an explicit sampling seed.
pub fn generate_seeded(spec: &DatasetSpec, n: usize, seed: u64) -> Result<LabeledSample> {
    spec.validate()?;
    let k = spec.k()?;
    if n < k {
        return Err(Error::InsufficientData { n, required: k });
    }
    Generator::new(spec)?.sample(n, seed)
}

/// `n` draws from group `label` alone, for checking generated labels against
/// their source distribution.
pub fn sample_group(spec: &DatasetSpec, label: usize, n: usize, seed: u64) -> Result<LabeledSample> {
    let g = Generator::new(spec)?;
    if label >= g.weights.len() {
        return Err(Error::InvalidParameter(format!("label {label} out of range")));
    }
    let d = spec.dim()?;
    let mut rng = rng_from_seed(seed);
    let mut points = vec![0.0; n * d];
    for row in points.chunks_mut(d) {
        g.draw(label, &mut rng, row);
    }
    LabeledSample::new(d, points, Some(vec![label; n]))
}

const SOBOLEV_TERMS: usize = 10;
const SOBOLEV_CENTERS: [f64; 3] = [-7.0, 0.0, 7.0];
const MIN_ACCEPTANCE: f64 = 0.1;
const TARGET_SEED: u64 = 0x7A26_E7;

enum Model {
    GaussGamma,
    Gumbel,
    Poly,
    Sobolev { coefs: Vec<Vec<f64>>, bounds: Vec<f64> },
    Moons { noise: f64 },
    Mixing(MixingMeasure),
}

struct Generator {
    weights: Vec<f64>,
    model: Model,
}

impl Generator {
    fn new(spec: &DatasetSpec) -> Result<Self> {
        let equal = |k: usize| vec![1.0 / k as f64; k];
        Ok(match spec.name {
            DatasetName::GaussGamma => Generator {
                weights: equal(4),
                model: Model::GaussGamma,
            },
            DatasetName::Gumbel => Generator {
                weights: equal(3),
                model: Model::Gumbel,
            },
            DatasetName::Poly => Generator {
                weights: equal(2),
                model: Model::Poly,
            },
            DatasetName::Sobolev => {
                let coef_seed = spec.param("coef_seed", 0.0);
                if coef_seed < 0.0 || coef_seed.fract() != 0.0 {
                    return Err(Error::InvalidParameter("coef_seed must be a non-negative integer".into()));
                }
                let (coefs, bounds) = sobolev_coefficients(coef_seed as u64);
                Generator {
                    weights: equal(3),
                    model: Model::Sobolev { coefs, bounds },
                }
            }
            DatasetName::MoonsBalanced | DatasetName::MoonsUnbalanced => {
                let noise = spec.param("noise", 0.12);
                if !(noise >= 0.0 && noise.is_finite()) {
                    return Err(Error::InvalidParameter(format!("noise must be >= 0, got {noise}")));
                }
                let weights = if spec.name == DatasetName::MoonsBalanced {
                    vec![0.5, 0.5]
                } else {
                    vec![0.85, 0.15]
                };
                Generator {
                    weights,
                    model: Model::Moons { noise },
                }
            }
            DatasetName::Target => {
                let m = target_mixing();
                Generator {
                    weights: m.weights().to_vec(),
                    model: Model::Mixing(m),
                }
            }
            DatasetName::MogFamily => {
                let k = spec.count_param("k", 3)?;
                let atoms = spec.count_param("atoms", 3)?;
                let d = spec.count_param("d", 2)?;
                let family_seed = spec.param("family_seed", 0.0);
                if family_seed < 0.0 || family_seed.fract() != 0.0 {
                    return Err(Error::InvalidParameter("family_seed must be a non-negative integer".into()));
                }
                let m = make_mog(
                    k,
                    &vec![atoms; k],
                    spec.param("gap", 20.0),
                    spec.param("scale", 1.0),
                    d,
                    family_seed as u64,
                )?;
                Generator {
                    weights: m.weights().to_vec(),
                    model: Model::Mixing(m),
                }
            }
        })
    }

    fn sample(&self, n: usize, seed: u64) -> Result<LabeledSample> {
        if let Model::Mixing(m) = &self.model {
            return Ok(m.sample(n, seed));
        }
        let d = match self.model {
            Model::Moons { .. } => 2,
            _ => 1,
        };
        let mut rng = rng_from_seed(seed);
        let index = WeightedIndex::new(&self.weights).expect("fixed weights");
        let mut points = vec![0.0; n * d];
        let mut labels = Vec::with_capacity(n);
        for row in points.chunks_mut(d) {
            let k = index.sample(&mut rng);
            self.draw(k, &mut rng, row);
            labels.push(k);
        }
        LabeledSample::new(d, points, Some(labels))
    }

    fn draw(&self, k: usize, rng: &mut SeededRng, out: &mut [f64]) {
        let normal = |rng: &mut SeededRng| -> f64 { rng.sample(StandardNormal) };
        match &self.model {
            Model::GaussGamma => {
                out[0] = match k {
                    0 => -6.0 + normal(rng),
                    1 => 0.8_f64.sqrt() * normal(rng),
                    2 => 4.0 + rng.sample(Gamma::new(3.0, 1.0).expect("valid gamma")),
                    _ => {
                        let m = if rng.random::<bool>() { 10.0 } else { 12.0 };
                        m + 0.5_f64.sqrt() * normal(rng)
                    }
                };
            }
            Model::Gumbel => {
                let center = [-8.0, 0.0, 8.0][k];
                out[0] = center + normal(rng) + rng.sample(Gumbel::new(0.0, 0.8).expect("valid gumbel"));
            }
            Model::Poly => {
                out[0] = if k == 0 {
                    // (1 - x^2)^2 on [-1, 1], peak 1.
                    let x = rejection(rng, |r| r.random_range(-1.0..=1.0), |x| (1.0 - x * x).powi(2));
                    x - 1.2
                } else {
                    // x (1 - x) on [0, 1], peak 1/4.
                    let x = rejection(rng, |r| r.random_range(0.0..=1.0), |x| 4.0 * x * (1.0 - x));
                    x + 0.2
                };
            }
            Model::Sobolev { coefs, bounds } => {
                let c = &coefs[k];
                let bound = bounds[k];
                let x = rejection(rng, |r| r.sample::<f64, _>(StandardNormal), |x| sobolev_ratio(c, x) / bound);
                out[0] = SOBOLEV_CENTERS[k] + x;
            }
            Model::Moons { noise } => {
                let t = rng.random_range(0.0..=PI);
                let (x, y) = if k == 0 {
                    (t.cos(), t.sin())
                } else {
                    (1.0 - t.cos(), 0.5 - t.sin())
                };
                out[0] = x + noise * normal(rng);
                out[1] = y + noise * normal(rng);
            }
            Model::Mixing(m) => {
                m.atoms()[k].sample_one(rng, out);
            }
        }
    }
}

/// Draws from `propose` until a uniform falls below `accept(x)` (in [0, 1]).
fn rejection<P, A>(rng: &mut SeededRng, mut propose: P, accept: A) -> f64
where
    P: FnMut(&mut SeededRng) -> f64,
    A: Fn(f64) -> f64,
{
    loop {
        let x = propose(rng);
        if rng.random::<f64>() <= accept(x) {
            return x;
        }
    }
}

fn sobolev_expansion(c: &[f64], x: f64) -> f64 {
    1.0 + c
        .iter()
        .enumerate()
        .map(|(j, cj)| cj * (PI * (j + 1) as f64 * x / 4.0).cos())
        .sum::<f64>()
}

/// Density relative to the standard normal envelope: the squared expansion.
fn sobolev_ratio(c: &[f64], x: f64) -> f64 {
    sobolev_expansion(c, x).powi(2)
}

/// Acceptance probability `E[(1 + S(Z))^2] / (1 + sum |c_j|)^2` for `Z ~ N(0, 1)`,
/// by trapezoid quadrature on [-12, 12].
fn sobolev_acceptance(c: &[f64]) -> f64 {
    let bound = (1.0 + c.iter().map(|v| v.abs()).sum::<f64>()).powi(2);
    let steps = 4800;
    let h = 24.0 / steps as f64;
    let mut total = 0.0;
    for i in 0..=steps {
        let x = -12.0 + i as f64 * h;
        let w = if i == 0 || i == steps { 0.5 } else { 1.0 };
        total += w * sobolev_ratio(c, x) * (-x * x / 2.0).exp();
    }
    total * h / (2.0 * PI).sqrt() / bound
}

/// Coefficients `c_j ~ N(0, j^-2)` per group, shrunk by 0.8 until the
/// rejection sampler accepts at least 10% of proposals, with their envelope bounds.
fn sobolev_coefficients(coef_seed: u64) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut coefs = Vec::new();
    let mut bounds = Vec::new();
    for k in 0..SOBOLEV_CENTERS.len() {
        let mut rng = rng_from_seed(derive_seed(coef_seed, k as u64));
        let mut c: Vec<f64> = (1..=SOBOLEV_TERMS)
            .map(|j| rng.sample::<f64, _>(StandardNormal) / j as f64)
            .collect();
        while sobolev_acceptance(&c) < MIN_ACCEPTANCE {
            c.iter_mut().for_each(|v| *v *= 0.8);
        }
        bounds.push((1.0 + c.iter().map(|v| v.abs()).sum::<f64>()).powi(2));
        coefs.push(c);
    }
    (coefs, bounds)
}

/// A 143-component, 6-group Gaussian mixture in the plane: a center disk, a
/// ring around it, and four corner clouds. Fixed regardless of sampling seed.
pub fn target_mixing() -> MixingMeasure {
    let mut rng = rng_from_seed(TARGET_SEED);
    let iso = |m: Vec<f64>, sd: f64| GaussianComponent::isotropic(m, sd * sd).expect("positive variance");
    let mut atoms = Vec::new();

    let center: Vec<GaussianComponent> = (0..25)
        .map(|_| {
            let r = 0.7 * rng.random::<f64>().sqrt();
            let t = rng.random_range(0.0..2.0 * PI);
            iso(vec![r * t.cos(), r * t.sin()], 0.25)
        })
        .collect();
    atoms.push(GaussianMixture::uniform(center).expect("non-empty"));

    let ring: Vec<GaussianComponent> = (0..100)
        .map(|i| {
            let t = 2.0 * PI * (i as f64 + 0.5 * rng.random::<f64>()) / 100.0;
            iso(vec![3.5 * t.cos(), 3.5 * t.sin()], 0.2)
        })
        .collect();
    atoms.push(GaussianMixture::uniform(ring).expect("non-empty"));

    for (corner, count) in [((5.5, 5.5), 5), ((-5.5, 5.5), 5), ((-5.5, -5.5), 4), ((5.5, -5.5), 4)] {
        let comps: Vec<GaussianComponent> = (0..count)
            .map(|_| {
                let dx = rng.random_range(-0.4..0.4);
                let dy = rng.random_range(-0.4..0.4);
                iso(vec![corner.0 + dx, corner.1 + dy], 0.25)
            })
            .collect();
        atoms.push(GaussianMixture::uniform(comps).expect("non-empty"));
    }
    MixingMeasure::new(vec![0.3, 0.55, 0.0375, 0.0375, 0.0375, 0.0375], atoms).expect("valid target model")
}

/// Random mixture of Gaussian mixtures with `k` groups.
///
/// Group centers are at least `mean_gap` apart: sequential on a line when
/// `d = 1`, otherwise placed by rejection in a box. Component means sit within
/// `0.2 * within_scale` of their center along each axis; covariances are
/// `within_scale^2 * diag(1 + 0.3 u)`. Components are never shared between groups.
pub fn make_mog(
    k: usize,
    atoms_per_group: &[usize],
    mean_gap: f64,
    within_scale: f64,
    d: usize,
    seed: u64,
) -> Result<MixingMeasure> {
    if k == 0 || atoms_per_group.len() != k || atoms_per_group.contains(&0) {
        return Err(Error::InvalidParameter(
            "need k >= 1 groups, each with at least one atom".into(),
        ));
    }
    if !(mean_gap > 0.0 && within_scale > 0.0 && mean_gap.is_finite() && within_scale.is_finite()) {
        return Err(Error::InvalidParameter("mean_gap and within_scale must be positive".into()));
    }
    if d == 0 {
        return Err(Error::InvalidParameter("d must be at least 1".into()));
    }
    let mut rng = rng_from_seed(seed);
    let centers = group_centers(k, mean_gap, d, &mut rng);
    let mut atoms = Vec::with_capacity(k);
    let mut weights = Vec::with_capacity(k);
    for (center, &m) in centers.iter().zip(atoms_per_group) {
        let comps = (0..m)
            .map(|_| {
                let mean: Vec<f64> = center
                    .iter()
                    .map(|c| c + within_scale * rng.random_range(-0.2..=0.2))
                    .collect();
                let mut cov = vec![0.0; d * d];
                for a in 0..d {
                    cov[a * d + a] = within_scale * within_scale * (1.0 + 0.3 * rng.random::<f64>());
                }
                GaussianComponent::new(mean, cov)
            })
            .collect::<Result<Vec<_>>>()?;
        let raw: Vec<f64> = (0..m).map(|_| 0.5 + rng.random::<f64>()).collect();
        let total: f64 = raw.iter().sum();
        atoms.push(GaussianMixture::new(raw.iter().map(|w| w / total).collect(), comps)?);
        weights.push(0.5 + rng.random::<f64>());
    }
    let total: f64 = weights.iter().sum();
    MixingMeasure::new(weights.into_iter().map(|w| w / total).collect(), atoms)
}

fn group_centers(k: usize, gap: f64, d: usize, rng: &mut SeededRng) -> Vec<Vec<f64>> {
    if d == 1 {
        let mut x = 0.0;
        return (0..k)
            .map(|i| {
                if i > 0 {
                    x += gap * (1.0 + 0.25 * rng.random::<f64>());
                }
                vec![x]
            })
            .collect();
    }
    let mut half = gap * (k as f64).powf(1.0 / d as f64);
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut failures = 0;
    while centers.len() < k {
        let c: Vec<f64> = (0..d).map(|_| rng.random_range(-half..=half)).collect();
        let far = centers
            .iter()
            .all(|o| crate::kmeans::sq_dist(o, &c).sqrt() >= gap);
        if far {
            centers.push(c);
        } else {
            failures += 1;
            if failures % 1000 == 0 {
                half *= 1.5;
            }
        }
    }
    centers
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for n in DatasetName::ALL {
            assert_eq!(n.as_str().parse::<DatasetName>().unwrap(), n);
        }
        assert!(matches!("blobs".parse::<DatasetName>(), Err(Error::UnknownDataset(_))));
    }

    #[test]
    fn shapes_match_definitions() {
        for (name, k, d) in [
            (DatasetName::GaussGamma, 4, 1),
            (DatasetName::Gumbel, 3, 1),
            (DatasetName::Poly, 2, 1),
            (DatasetName::Sobolev, 3, 1),
            (DatasetName::MoonsBalanced, 2, 2),
            (DatasetName::MoonsUnbalanced, 2, 2),
            (DatasetName::Target, 6, 2),
        ] {
            let spec = DatasetSpec::new(name, 1);
            let s = generate(&spec, 200).unwrap();
            assert_eq!((spec.k().unwrap(), s.dim()), (k, d));
            assert_eq!(s.num_labels(), Some(k), "{name}");
        }
    }

    #[test]
    fn target_has_143_components() {
        let m = target_mixing();
        let sizes: Vec<usize> = m.atoms().iter().map(|a| a.len()).collect();
        assert_eq!(sizes, vec![25, 100, 5, 5, 4, 4]);
    }

    #[test]
    fn unknown_params_are_rejected() {
        let spec = DatasetSpec::new(DatasetName::Poly, 0).with_param("noise", 0.1);
        assert!(generate(&spec, 10).is_err());
    }

    #[test]
    fn sobolev_acceptance_bound_holds() {
        let (coefs, _) = sobolev_coefficients(0);
        for c in &coefs {
            assert!(sobolev_acceptance(c) >= MIN_ACCEPTANCE);
        }
    }

    #[test]
    fn make_mog_single_group() {
        let m = make_mog(1, &[3], 5.0, 1.0, 2, 4).unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(m.atoms()[0].len(), 3);
    }
}
