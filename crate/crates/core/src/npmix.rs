//! The end-to-end clustering pipeline: overfit a Gaussian mixture, cluster its
//! components by single linkage on Hellinger distances, aggregate the groups,
//! and label points with the resulting Bayes classifier.

use serde::{Deserialize, Serialize};

use crate::em::{fit, EmConfig, FitResult};
use crate::error::{Error, Result};
use crate::linkage::{cut, hierarchical, Assignment, Dendrogram, Linkage};
use crate::metrics::{distance_matrix, DistanceMatrix};
use crate::mixture::LabeledSample;
use crate::partition::{Classification, PartitionModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NpmixConfig {
    /// Number of clusters `K`.
    pub k: usize,
    /// Overfitted mixture settings; `em.l` is the component count `L`.
    pub em: EmConfig,
    #[serde(default)]
    pub linkage: Linkage,
}

impl NpmixConfig {
    /// `L` from [`default_l`] and default EM settings.
    pub fn new(k: usize, n: usize, seed: u64) -> Self {
        Self {
            k,
            em: EmConfig::new(default_l(k, n), seed),
            linkage: Linkage::Single,
        }
    }
}

/// `min(5K + 10, n / 20)`, but never below `K`.
pub fn default_l(k: usize, n: usize) -> usize {
    (5 * k + 10).min(n / 20).max(k)
}

#[derive(Debug, Clone)]
pub struct NpmixResult {
    pub fit: FitResult,
    pub distances: DistanceMatrix,
    pub dendrogram: Dendrogram,
    pub assignment: Assignment,
    pub model: PartitionModel,
    pub classifications: Vec<Classification>,
}

impl NpmixResult {
    /// 0-based cluster label of every input point.
    pub fn labels(&self) -> Vec<usize> {
        self.classifications.iter().map(|c| c.label).collect()
    }
}

pub fn npmix(data: &LabeledSample, cfg: &NpmixConfig) -> Result<NpmixResult> {
    if cfg.k == 0 {
        return Err(Error::InvalidParameter("K must be at least 1".into()));
    }
    if cfg.k > cfg.em.l {
        return Err(Error::TooManyGroups { k: cfg.k, l: cfg.em.l });
    }
    let fit = fit(data, &cfg.em)?;
    let distances = distance_matrix(&fit.mixture)?;
    let dendrogram = hierarchical(&distances, cfg.linkage);
    let assignment = cut(&dendrogram, cfg.k)?;
    let model = PartitionModel::from_grouping(&fit.mixture, &assignment)?;
    let classifications = model.classify_all(data.as_flat())?;
    Ok(NpmixResult {
        fit,
        distances,
        dendrogram,
        assignment,
        model,
        classifications,
    })
}
