//! Incremental partitional clustering for numerical data. Clusters are
//! summarized as compact cluster features and new points are admitted via an
//! inverse proximity estimate that combines centroid distance with a
//! farthest-point bias, so chunked data arrivals update the solution without
//! re-clustering from scratch.
//!
//! The typical lifecycle:
//! 1. [`engine::Model::bootstrap`] clusters the first chunk with k-means and
//!    builds one [`cf::ClusterFeature`] per cluster.
//! 2. [`engine::Model::ingest_chunk`] assigns each later point to the cluster
//!    minimizing its IPE (or founds a singleton past the lambda gate),
//!    refreshes drifting clusters, and runs a theta-gated merge pass.
//! 3. [`snapshot`] persists the full state between process runs and
//!    [`eval::purity`] scores the result against ground-truth labels.

pub mod cf;
pub mod engine;
pub mod error;
pub mod eval;
pub mod kmeans;
pub mod proximity;
pub mod snapshot;
pub mod store;
pub mod vecmath;

pub use cf::{ClusterFeature, HyperParams};
pub use engine::{DriftMode, IngestReport, Model};
pub use error::{Error, Result};
pub use eval::{purity, PurityReport};
pub use kmeans::{kmeans_fit, KMeansConfig};
pub use proximity::{ipe, ProximityResult};
pub use snapshot::{load_snapshot, save_snapshot};
pub use store::{ClusterId, Point, PointId, PointStore};
pub use vecmath::Vector;
