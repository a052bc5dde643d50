//! Monte Carlo estimators for cluster statistics of the random connection
//! model, and the quadrature oracle for small clusters.

mod cluster;
mod pairconn;
mod stats;
mod table;

pub use cluster::{
    cluster_size_exact_small, estimate_cluster_density, estimate_cluster_size_dist, estimate_mean_cluster_size,
    ClusterDensity, MeanClusterEstimate, BOUNDARY_WARNING_FRACTION,
};
pub use pairconn::{estimate_pairconn, estimate_radial_profile, radial_probes, RadialProfile};
pub use stats::{batch_means, Estimate, BATCHES};
pub use table::{EstimateRow, EstimateTable, InputDescriptor, RunMetadata, TABLE_HEADER};
