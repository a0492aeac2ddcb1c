//! Error types shared across the crate.

use std::path::PathBuf;

use thiserror::Error;

use crate::store::{ClusterId, PointId};

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("need at least k = {k} points, got {points}")]
    TooFewPoints { k: usize, points: usize },

    #[error("duplicate point id {0}")]
    DuplicatePointId(PointId),

    #[error("unknown cluster {0}")]
    UnknownCluster(ClusterId),

    #[error("non-finite feature value in point {0}")]
    NonFiniteFeature(PointId),

    #[error("unlabeled points: {}", format_ids(.0))]
    UnlabeledPoints(Vec<PointId>),

    #[error("store and cluster feature diverged for cluster {cluster}: store has {store_count} points, CF says {cf_count}")]
    StoreDivergence {
        cluster: ClusterId,
        store_count: usize,
        cf_count: u64,
    },

    #[error("internal corruption: {0}")]
    Corrupt(String),

    #[error("snapshot {path}: {reason}")]
    Snapshot { path: PathBuf, reason: String },

    #[error("snapshot version mismatch: file has {found}, supported is {supported}")]
    SnapshotVersion { found: String, supported: u32 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn format_ids(ids: &[PointId]) -> String {
    let shown: Vec<String> = ids.iter().take(10).map(|id| id.to_string()).collect();
    if ids.len() > 10 {
        format!("{} … ({} total)", shown.join(", "), ids.len())
    } else {
        shown.join(", ")
    }
}
