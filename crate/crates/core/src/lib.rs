//! Nonparametric mixture clustering.
//!
//! Clusters are modeled as groups of components of an overfitted Gaussian
//! mixture. The pipeline fits the mixture by EM, measures Hellinger distances
//! between its components, groups them by single linkage, and classifies points
//! with the Bayes rule of the grouped mixture. Diagnostics cover the separation
//! condition under which the grouping is exact, Wasserstein distances between
//! mixing measures, and the exceptional set where the partition is ambiguous.

pub mod datasets;
pub mod em;
pub mod error;
pub mod evaluation;
pub mod hungarian;
pub mod io;
pub mod kmeans;
pub mod linkage;
pub mod metrics;
pub mod mixture;
pub mod npmix;
pub mod partition;
pub mod quadrature;
pub mod rng;
pub mod spectral;
pub mod transport;

pub use datasets::{generate, make_mog, DatasetName, DatasetSpec};
pub use em::{fit, loglik, EmConfig, FitResult};
pub use error::{Error, Result};
pub use evaluation::{ari, match_clusters, run_benchmark, BenchmarkOptions, BenchmarkResult, Method};
pub use linkage::{cut, group, single_linkage, threshold_check, Assignment, Dendrogram};
pub use metrics::{distance_matrix, eta, hellinger_gaussian, hellinger_mixture, DistanceMatrix, SeparationReport};
pub use mixture::{GaussianComponent, GaussianMixture, LabeledSample, MixingMeasure};
pub use npmix::{npmix, NpmixConfig, NpmixResult};
pub use partition::{partition_agreement, partition_grid, PartitionGrid, PartitionModel};
pub use quadrature::QuadratureSpec;
pub use transport::wasserstein;
