//! Hellinger geometry on Gaussian components and mixtures.
//!
//! Throughout, `rho(p, q) = sqrt(1 - BC(p, q))` with `BC = integral sqrt(p q)`,
//! so distances live in `[0, 1]`. Gaussian pairs use the closed-form
//! Bhattacharyya coefficient; mixtures have no closed form and go through
//! [`QuadratureSpec`].

use std::io::Write;

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::match_clusters;
use crate::linkage::{group, Assignment};
use crate::mixture::{GaussianComponent, GaussianMixture, MixingMeasure};
use crate::quadrature::{Domain, QuadratureSpec};
use crate::rng::{derive_seed, rng_from_seed};

/// Default number of Dirichlet-sampled hull pairs in [`hellinger_diameter`].
pub const DEFAULT_DIRICHLET_PAIRS: usize = 256;

/// Closed-form Hellinger distance between two Gaussians.
pub fn hellinger_gaussian(a: &GaussianComponent, b: &GaussianComponent) -> Result<f64> {
    let d = a.dim();
    if b.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: b.dim(),
        });
    }
    if a == b {
        return Ok(0.0);
    }
    let blended = DMatrix::from_fn(d, d, |i, j| {
        0.5 * (a.covariance()[i * d + j] + b.covariance()[i * d + j])
    });
    let chol = Cholesky::new(blended)
        .ok_or_else(|| Error::Singular("blended covariance (Sa + Sb) / 2".into()))?;
    let log_det: f64 = chol.l_dirty().diagonal().iter().map(|v| 2.0 * v.ln()).sum();
    let delta = DVector::from_iterator(d, a.mean().iter().zip(b.mean()).map(|(x, y)| x - y));
    let maha = delta.dot(&chol.solve(&delta));
    // Bhattacharyya distance; BC = exp(-db)
    let db = (maha / 8.0 + 0.5 * (log_det - 0.5 * (a.log_det() + b.log_det()))).max(0.0);
    Ok((-(-db).exp_m1()).sqrt().clamp(0.0, 1.0))
}

/// Quadrature-based Hellinger distance with its error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HellingerEstimate {
    pub value: f64,
    /// Change in the normalized affinity between the last two refinement levels.
    pub affinity_error: f64,
    pub points_per_axis: usize,
}

fn mixture_domain(mixtures: &[&GaussianMixture], span: f64) -> Domain {
    let d = mixtures[0].dim();
    let mut lower = vec![f64::INFINITY; d];
    let mut upper = vec![f64::NEG_INFINITY; d];
    let mut min_scale = f64::INFINITY;
    for c in mixtures.iter().flat_map(|m| m.components()) {
        for a in 0..d {
            let s = c.std_dev(a);
            lower[a] = lower[a].min(c.mean()[a] - span * s);
            upper[a] = upper[a].max(c.mean()[a] + span * s);
        }
        let narrowest = if d == 1 { c.std_dev(0) } else { c.min_eigenvalue().sqrt() };
        min_scale = min_scale.min(narrowest);
    }
    Domain {
        lower,
        upper,
        min_scale: vec![min_scale; d],
    }
}

/// Hellinger distance between two Gaussian mixtures by tensor-grid quadrature
/// over a box covering every component mean +- `sigma_span` standard deviations.
///
/// The affinity is self-normalized, `BC = S_pq / sqrt(S_p S_q)` with all three
/// integrals taken on the same grid, which cancels the leading discretization
/// error in the two masses.
pub fn hellinger_mixture(
    p: &GaussianMixture,
    q: &GaussianMixture,
    quad: &QuadratureSpec,
) -> Result<HellingerEstimate> {
    if p.dim() != q.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            found: q.dim(),
        });
    }
    let domain = mixture_domain(&[p, q], quad.sigma_span);
    let affinity = |v: &[f64]| {
        if v[1] <= 0.0 || v[2] <= 0.0 {
            0.0
        } else {
            v[0] / (v[1] * v[2]).sqrt()
        }
    };
    let (integrals, err) = quad.integrate(
        &domain,
        3,
        |x, out| {
            let fp = p.density_unchecked(x);
            let fq = q.density_unchecked(x);
            out[0] = (fp * fq).sqrt();
            out[1] = fp;
            out[2] = fq;
        },
        affinity,
    )?;
    let bc = affinity(&integrals.values);
    Ok(HellingerEstimate {
        value: (1.0 - bc).max(0.0).sqrt().clamp(0.0, 1.0),
        affinity_error: err,
        points_per_axis: integrals.points_per_axis,
    })
}

/// Symmetric `L x L` matrix of pairwise Hellinger distances.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl DistanceMatrix {
    /// Validates symmetry, zero diagonal and `[0, 1]` range.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidParameter("distance matrix must be square".into()));
        }
        for i in 0..n {
            if rows[i][i] != 0.0 {
                return Err(Error::InvalidParameter(format!("non-zero diagonal at {i}")));
            }
            for j in 0..n {
                let v = rows[i][j];
                if !(0.0..=1.0 + 1e-9).contains(&v) || v != rows[j][i] {
                    return Err(Error::InvalidParameter(format!(
                        "entry ({i}, {j}) = {v} is out of range or asymmetric"
                    )));
                }
            }
        }
        Ok(Self {
            n,
            entries: rows.concat(),
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }

    /// Full matrix, row-major, 17 significant digits, no header.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for i in 0..self.n {
            let line: Vec<String> = self.row(i).iter().map(|v| format!("{v:.16e}")).collect();
            writeln!(out, "{}", line.join(","))?;
        }
        Ok(())
    }
}

/// Hellinger distance matrix of a mixture's components.
pub fn distance_matrix(q: &GaussianMixture) -> Result<DistanceMatrix> {
    let comps = q.components();
    let n = comps.len();
    let upper: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            ((i + 1)..n)
                .map(|j| hellinger_gaussian(&comps[i], &comps[j]))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let mut entries = vec![0.0; n * n];
    for (i, row) in upper.iter().enumerate() {
        for (off, &v) in row.iter().enumerate() {
            let j = i + 1 + off;
            entries[i * n + j] = v;
            entries[j * n + i] = v;
        }
    }
    Ok(DistanceMatrix { n, entries })
}

fn dirichlet_uniform<R: Rng>(rng: &mut R, m: usize) -> Vec<f64> {
    // Dirichlet(1, ..., 1) via normalized Exp(1) draws
    let draws: Vec<f64> = (0..m).map(|_| rng.sample::<f64, _>(Exp1) + 1e-9).collect();
    let total: f64 = draws.iter().sum();
    draws.into_iter().map(|w| w / total).collect()
}

/// Lower-bound estimate of the Hellinger diameter of the convex hull of a
/// mixture's components: the max over all component pairs and over
/// `n_dirichlet` random pairs of hull points with Dirichlet(1) coefficients.
pub fn hellinger_diameter(
    omega: &GaussianMixture,
    n_dirichlet: usize,
    seed: u64,
    quad: &QuadratureSpec,
) -> Result<f64> {
    let comps = omega.components();
    let m = comps.len();
    if m == 1 {
        return Ok(0.0);
    }
    let mut best = 0.0_f64;
    for i in 0..m {
        for j in (i + 1)..m {
            best = best.max(hellinger_gaussian(&comps[i], &comps[j])?);
        }
    }
    let hull: Vec<f64> = (0..n_dirichlet)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng_from_seed(derive_seed(seed, t as u64));
            let p = GaussianMixture::from_parts_unchecked(dirichlet_uniform(&mut rng, m), comps.to_vec());
            let q = GaussianMixture::from_parts_unchecked(dirichlet_uniform(&mut rng, m), comps.to_vec());
            hellinger_mixture(&p, &q, quad).map(|h| h.value)
        })
        .collect::<Result<_>>()?;
    Ok(hull.into_iter().fold(best, f64::max))
}

/// Options for [`eta`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EtaOptions {
    pub n_dirichlet: usize,
    pub seed: u64,
    pub quad: QuadratureSpec,
}

impl Default for EtaOptions {
    fn default() -> Self {
        Self {
            n_dirichlet: DEFAULT_DIRICHLET_PAIRS,
            seed: 0,
            quad: QuadratureSpec::default(),
        }
    }
}

/// Separation diagnostics for a mixing measure against a grouped fit.
///
/// `satisfied` holds when the smallest Hellinger distance between true atoms
/// exceeds `4 * eta`; `xi_margin = min_between / eta - 4`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationReport {
    pub eta: f64,
    /// `sup_k` diameter of the grouped components.
    pub diameter_term: f64,
    /// `sup_k rho(gamma_k, Q_k(alpha))`.
    pub approximation_term: f64,
    /// Smallest distance between distinct true atoms (infinite when `K = 1`).
    #[serde(with = "nullable_inf")]
    pub min_between: f64,
    /// Largest within-group entry of the fitted distance matrix.
    pub max_within: f64,
    pub satisfied: bool,
    #[serde(with = "nullable_inf")]
    pub xi_margin: f64,
}

/// Serializes infinities as JSON `null` and reads `null` back as `+inf`.
mod nullable_inf {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

/// Computes `eta(alpha)` and the separation test for `lambda` against the
/// fitted mixture grouped by `alpha`. Group `k` of `alpha` is compared with
/// atom `k` of `lambda`; see [`align_assignment`] to establish that matching.
pub fn eta(
    lambda: &MixingMeasure,
    fitted: &GaussianMixture,
    alpha: &Assignment,
    opts: &EtaOptions,
) -> Result<SeparationReport> {
    let k = lambda.len();
    if alpha.k() != k {
        return Err(Error::InvalidAssignment(format!(
            "assignment has {} groups, mixing measure has {k} atoms",
            alpha.k()
        )));
    }
    let grouped = group(fitted, alpha)?;
    let mut diameter_term = 0.0_f64;
    let mut approximation_term = 0.0_f64;
    for (idx, (atom, aggregate)) in lambda.atoms().iter().zip(grouped.atoms()).enumerate() {
        let seed = derive_seed(opts.seed, idx as u64);
        diameter_term = diameter_term.max(hellinger_diameter(aggregate, opts.n_dirichlet, seed, &opts.quad)?);
        let approx = if atom == aggregate {
            0.0
        } else {
            hellinger_mixture(atom, aggregate, &opts.quad)?.value
        };
        approximation_term = approximation_term.max(approx);
    }
    let eta = diameter_term + approximation_term;

    let mut min_between = f64::INFINITY;
    for i in 0..k {
        for j in (i + 1)..k {
            let h = hellinger_mixture(&lambda.atoms()[i], &lambda.atoms()[j], &opts.quad)?;
            min_between = min_between.min(h.value);
        }
    }

    let dm = distance_matrix(fitted)?;
    let mut max_within = 0.0_f64;
    for i in 0..dm.len() {
        for j in (i + 1)..dm.len() {
            if alpha.group_of(i) == alpha.group_of(j) {
                max_within = max_within.max(dm.get(i, j));
            }
        }
    }

    let xi_margin = if k == 1 || eta == 0.0 {
        f64::INFINITY
    } else {
        min_between / eta - 4.0
    };
    Ok(SeparationReport {
        eta,
        diameter_term,
        approximation_term,
        min_between,
        max_within,
        satisfied: min_between > 4.0 * eta,
        xi_margin,
    })
}

/// Relabels `alpha` so that group `k` corresponds to atom `k` of `lambda`.
///
/// Each fitted component is given the atom that wins the Bayes rule
/// `argmax_k lambda_k f_k` at its mean; the two labelings are then matched by
/// optimal assignment on their confusion matrix.
pub fn align_assignment(
    lambda: &MixingMeasure,
    fitted: &GaussianMixture,
    alpha: &Assignment,
) -> Result<Assignment> {
    if alpha.len() != fitted.len() {
        return Err(Error::LengthMismatch(alpha.len(), fitted.len()));
    }
    let reference: Vec<usize> = fitted
        .components()
        .iter()
        .map(|c| {
            lambda
                .weights()
                .iter()
                .zip(lambda.atoms())
                .map(|(w, a)| w.ln() + a.log_density_unchecked(c.mean()))
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (k, v)| if v > best.1 { (k, v) } else { best })
                .0
        })
        .collect();
    let perm = match_clusters(alpha.map(), &reference)?;
    let map = alpha.map().iter().map(|&g| perm[g]).collect();
    Assignment::new(map, lambda.len().max(alpha.k()))
}
