//! Bayes classification from grouped mixtures, exceptional-set mass, and
//! partition grids for visualization and agreement checks.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::match_clusters;
use crate::linkage::{group, Assignment};
use crate::mixture::{normalize_weights, GaussianMixture, MixingMeasure};

/// Group weights and densities behind the classifier `argmax_k w_k f_k(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPartitionModel")]
pub struct PartitionModel {
    group_weights: Vec<f64>,
    group_densities: Vec<GaussianMixture>,
    #[serde(skip)]
    log_weights: Vec<f64>,
    #[serde(skip)]
    group_means: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
struct RawPartitionModel {
    group_weights: Vec<f64>,
    group_densities: Vec<GaussianMixture>,
}

impl TryFrom<RawPartitionModel> for PartitionModel {
    type Error = Error;

    fn try_from(raw: RawPartitionModel) -> Result<Self> {
        PartitionModel::new(raw.group_weights, raw.group_densities)
    }
}

/// Outcome of classifying one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    /// 0-based group index.
    pub label: usize,
    /// Largest weighted density minus the runner-up; 0 at ties.
    pub margin: f64,
    /// Every weighted density underflowed; the label is the nearest group mean.
    pub extrapolated: bool,
}

impl PartitionModel {
    pub fn new(group_weights: Vec<f64>, group_densities: Vec<GaussianMixture>) -> Result<Self> {
        if group_weights.len() != group_densities.len() {
            return Err(Error::LengthMismatch(group_weights.len(), group_densities.len()));
        }
        if group_densities.is_empty() {
            return Err(Error::InvalidParameter("a partition model needs K >= 1 groups".into()));
        }
        let d = group_densities[0].dim();
        if let Some(bad) = group_densities.iter().find(|g| g.dim() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: bad.dim(),
            });
        }
        let group_weights = normalize_weights(group_weights)?;
        let log_weights = group_weights.iter().map(|w| w.ln()).collect();
        let group_means = group_densities.iter().map(|g| g.mean()).collect();
        Ok(Self {
            group_weights,
            group_densities,
            log_weights,
            group_means,
        })
    }

    pub fn from_mixing(m: &MixingMeasure) -> Self {
        Self::new(m.weights().to_vec(), m.atoms().to_vec()).expect("mixing measures satisfy the model invariants")
    }

    /// Groups the fitted mixture by `alpha` and wraps the result.
    pub fn from_grouping(q: &GaussianMixture, alpha: &Assignment) -> Result<Self> {
        Ok(Self::from_mixing(&group(q, alpha)?))
    }

    pub fn k(&self) -> usize {
        self.group_weights.len()
    }

    pub fn dim(&self) -> usize {
        self.group_densities[0].dim()
    }

    pub fn group_weights(&self) -> &[f64] {
        &self.group_weights
    }

    pub fn group_densities(&self) -> &[GaussianMixture] {
        &self.group_densities
    }

    pub fn to_mixing(&self) -> Result<MixingMeasure> {
        MixingMeasure::new(self.group_weights.clone(), self.group_densities.clone())
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        Ok(())
    }

    /// `w_k f_k(x)` for every group.
    pub fn weighted_densities(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        Ok(self.log_scores(x).into_iter().map(f64::exp).collect())
    }

    fn log_scores(&self, x: &[f64]) -> Vec<f64> {
        self.log_weights
            .iter()
            .zip(&self.group_densities)
            .map(|(lw, g)| lw + g.log_density_unchecked(x))
            .collect()
    }

    pub fn classify(&self, x: &[f64]) -> Result<Classification> {
        self.check_dim(x)?;
        Ok(self.classify_unchecked(x))
    }

    pub(crate) fn classify_unchecked(&self, x: &[f64]) -> Classification {
        let scores = self.log_scores(x);
        let mut best = 0;
        for k in 1..scores.len() {
            if scores[k] > scores[best] {
                best = k;
            }
        }
        if scores[best].exp() == 0.0 {
            let label = self
                .group_means
                .iter()
                .map(|m| crate::kmeans::sq_dist(m, x))
                .enumerate()
                .fold((0, f64::INFINITY), |b, (k, v)| if v < b.1 { (k, v) } else { b })
                .0;
            return Classification {
                label,
                margin: 0.0,
                extrapolated: true,
            };
        }
        let second = scores
            .iter()
            .enumerate()
            .filter(|(k, _)| *k != best)
            .map(|(_, s)| *s)
            .fold(f64::NEG_INFINITY, f64::max);
        let margin = (scores[best].exp() - second.exp()).max(0.0);
        Classification {
            label: best,
            margin,
            extrapolated: false,
        }
    }

    /// Smallest `|w_i f_i(x) - w_j f_j(x)|` over pairs `i != j`; `+inf` when `K = 1`.
    /// A point lies in the fattened exceptional set `E0(t)` iff this is `<= t`.
    pub fn min_pairwise_gap(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        Ok(self.min_gap_unchecked(x))
    }

    fn min_gap_unchecked(&self, x: &[f64]) -> f64 {
        let mut v: Vec<f64> = self.log_scores(x).into_iter().map(f64::exp).collect();
        v.sort_by(f64::total_cmp);
        v.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
    }

    /// Monte Carlo estimate of the reference-measure mass of `E0(t)`.
    pub fn exceptional_mass(&self, t: f64, reference: &GaussianMixture, mc_n: usize, seed: u64) -> Result<f64> {
        if mc_n == 0 {
            return Err(Error::InvalidParameter("mc_n must be positive".into()));
        }
        if reference.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: reference.dim(),
            });
        }
        if self.k() == 1 {
            return Ok(0.0);
        }
        let sample = reference.sample(mc_n, seed);
        let inside = sample.points().filter(|x| self.min_gap_unchecked(x) <= t).count();
        Ok(inside as f64 / mc_n as f64)
    }

    /// Labels every point of a sample.
    pub fn classify_all(&self, points: &[f64]) -> Result<Vec<Classification>> {
        let d = self.dim();
        if points.len() % d != 0 {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: points.len() % d,
            });
        }
        Ok(points.par_chunks(d).map(|x| self.classify_unchecked(x)).collect())
    }
}

/// A classifier evaluated on a regular grid, `d` in {1, 2}. Cells are stored
/// with the first axis varying fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionGrid {
    pub bounds: Vec<(f64, f64)>,
    pub resolution: usize,
    /// 0-based labels.
    pub labels: Vec<usize>,
    pub margin: Vec<f64>,
}

impl PartitionGrid {
    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Coordinates of cell `idx`.
    pub fn point(&self, idx: usize) -> Vec<f64> {
        grid_point(&self.bounds, self.resolution, idx)
    }

    pub fn same_grid(&self, other: &Self) -> bool {
        self.bounds == other.bounds && self.resolution == other.resolution
    }

    /// Writes `x0[,x1],label,margin` rows with 1-based labels.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let header: Vec<String> = (0..self.dim()).map(|a| format!("x{a}")).collect();
        writeln!(out, "{},label,margin", header.join(","))?;
        for idx in 0..self.len() {
            for x in self.point(idx) {
                write!(out, "{x:.16e},")?;
            }
            writeln!(out, "{},{:.16e}", self.labels[idx] + 1, self.margin[idx])?;
        }
        Ok(())
    }

    /// Minimal SVG raster, one rect per cell, second axis pointing up.
    pub fn write_svg<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        const PALETTE: [&str; 10] = [
            "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
        ];
        const CELL: usize = 4;
        let cols = self.resolution;
        let rows = if self.dim() == 1 { 1 } else { self.resolution };
        writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" shape-rendering="crispEdges">"#,
            cols * CELL,
            rows * CELL
        )?;
        for idx in 0..self.len() {
            let (c, r) = (idx % cols, idx / cols);
            writeln!(
                out,
                r#"<rect x="{}" y="{}" width="{CELL}" height="{CELL}" fill="{}"/>"#,
                c * CELL,
                (rows - 1 - r) * CELL,
                PALETTE[self.labels[idx] % PALETTE.len()]
            )?;
        }
        writeln!(out, "</svg>")
    }
}

fn grid_point(bounds: &[(f64, f64)], resolution: usize, idx: usize) -> Vec<f64> {
    let mut rest = idx;
    bounds
        .iter()
        .map(|(lo, hi)| {
            let i = rest % resolution;
            rest /= resolution;
            lo + (hi - lo) * i as f64 / (resolution - 1) as f64
        })
        .collect()
}

/// Classifies every cell of a `resolution^d` grid over `bounds`.
pub fn partition_grid(model: &PartitionModel, bounds: &[(f64, f64)], resolution: usize) -> Result<PartitionGrid> {
    let d = bounds.len();
    if !(d == 1 || d == 2) {
        return Err(Error::InvalidParameter(format!("partition grids need d in {{1, 2}}, got {d}")));
    }
    if d != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            found: d,
        });
    }
    if resolution < 2 {
        return Err(Error::InvalidParameter("grid resolution must be at least 2".into()));
    }
    if bounds.iter().any(|(lo, hi)| !(lo.is_finite() && hi.is_finite() && lo < hi)) {
        return Err(Error::InvalidParameter("grid bounds must be finite with min < max".into()));
    }
    let cells: Vec<Classification> = (0..resolution.pow(d as u32))
        .into_par_iter()
        .map(|idx| model.classify_unchecked(&grid_point(bounds, resolution, idx)))
        .collect();
    Ok(PartitionGrid {
        bounds: bounds.to_vec(),
        resolution,
        labels: cells.iter().map(|c| c.label).collect(),
        margin: cells.iter().map(|c| c.margin).collect(),
    })
}

/// Fraction of points whose labels agree after optimally relabeling `b`,
/// ignoring points whose `a`-margin is `<= exclude_margin`. A zero
/// `exclude_margin` keeps every point, which makes the result symmetric.
pub fn labeling_agreement(a: &[usize], b: &[usize], a_margin: Option<&[f64]>, exclude_margin: f64) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    let keep: Vec<usize> = match a_margin {
        Some(m) if exclude_margin > 0.0 => {
            if m.len() != a.len() {
                return Err(Error::LengthMismatch(m.len(), a.len()));
            }
            (0..a.len()).filter(|&i| m[i] > exclude_margin).collect()
        }
        _ => (0..a.len()).collect(),
    };
    if keep.is_empty() {
        return Ok(1.0);
    }
    let ka: Vec<usize> = keep.iter().map(|&i| a[i]).collect();
    let kb: Vec<usize> = keep.iter().map(|&i| b[i]).collect();
    let perm = match_clusters(&ka, &kb)?;
    let hits = ka.iter().zip(&kb).filter(|(x, y)| perm[**x] == **y).count();
    Ok(hits as f64 / keep.len() as f64)
}

/// Grid version of [`labeling_agreement`], margins taken from `a`.
pub fn partition_agreement(a: &PartitionGrid, b: &PartitionGrid, exclude_margin: f64) -> Result<f64> {
    if !a.same_grid(b) {
        return Err(Error::GridMismatch);
    }
    labeling_agreement(&a.labels, &b.labels, Some(&a.margin), exclude_margin)
}
