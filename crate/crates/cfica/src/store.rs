//! Persistent point store: every ingested point with its current cluster
//! assignment. Held in memory; the snapshot file (see `snapshot`) is the
//! durability boundary.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::error::{Error, Result};
use crate::vecmath::Vector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PointId(pub u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ClusterId(pub u64);

impl fmt::Display for PointId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for ClusterId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A data point: id, features, and an optional class label. The label is
/// held for evaluation only and is never visible to clustering.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    pub id: PointId,
    pub features: Vector,
    pub label: Option<String>,
}

impl Point {
    pub fn new(id: PointId, features: impl Into<Vector>, label: Option<String>) -> Self {
        Point {
            id,
            features: features.into(),
            label,
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        self.features.check_dim(dim)?;
        if !self.features.is_finite() {
            return Err(Error::NonFiniteFeature(self.id));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct StoredPoint {
    pub features: Vector,
    pub label: Option<String>,
    pub cluster: ClusterId,
}

/// In-memory record of every ingested point keyed by id, with a per-cluster
/// membership index. Single-writer between engine operations.
#[derive(Debug, Clone, PartialEq)]
pub struct PointStore {
    dimension: usize,
    points: BTreeMap<PointId, StoredPoint>,
    by_cluster: BTreeMap<ClusterId, BTreeSet<PointId>>,
}

impl PointStore {
    pub fn new(dimension: usize) -> Self {
        PointStore {
            dimension,
            points: BTreeMap::new(),
            by_cluster: BTreeMap::new(),
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn contains_point(&self, id: PointId) -> bool {
        self.points.contains_key(&id)
    }

    /// Smallest id strictly greater than every stored point id. Points are
    /// never deleted, so this is a safe fresh-id source across process runs.
    pub fn next_point_id(&self) -> u64 {
        self.points.keys().next_back().map_or(0, |id| id.0 + 1)
    }

    /// Ids of clusters known to the store, in order.
    pub fn cluster_ids(&self) -> impl Iterator<Item = ClusterId> + '_ {
        self.by_cluster.keys().copied()
    }

    /// Registers a cluster id so points can be assigned to it.
    pub fn register_cluster(&mut self, cluster: ClusterId) {
        self.by_cluster.entry(cluster).or_default();
    }

    /// Records a point with its assignment. The cluster must already be
    /// registered and the point id must be fresh.
    pub fn append_point(&mut self, point: &Point, cluster: ClusterId) -> Result<()> {
        point.validate(self.dimension)?;
        if !self.by_cluster.contains_key(&cluster) {
            return Err(Error::UnknownCluster(cluster));
        }
        if self.points.contains_key(&point.id) {
            return Err(Error::DuplicatePointId(point.id));
        }
        self.points.insert(
            point.id,
            StoredPoint {
                features: point.features.clone(),
                label: point.label.clone(),
                cluster,
            },
        );
        self.by_cluster.get_mut(&cluster).unwrap().insert(point.id);
        Ok(())
    }

    /// Points currently assigned to `cluster`, in point-id order.
    pub fn members_of(&self, cluster: ClusterId) -> Result<Vec<Point>> {
        let ids = self
            .by_cluster
            .get(&cluster)
            .ok_or(Error::UnknownCluster(cluster))?;
        Ok(ids
            .iter()
            .map(|id| {
                let sp = &self.points[id];
                Point {
                    id: *id,
                    features: sp.features.clone(),
                    label: sp.label.clone(),
                }
            })
            .collect())
    }

    pub fn member_count(&self, cluster: ClusterId) -> Result<usize> {
        self.by_cluster
            .get(&cluster)
            .map(|s| s.len())
            .ok_or(Error::UnknownCluster(cluster))
    }

    /// Moves every point of `from` into `to` and retires `from`.
    pub fn reassign_cluster(&mut self, from: ClusterId, to: ClusterId) -> Result<()> {
        if !self.by_cluster.contains_key(&to) {
            return Err(Error::UnknownCluster(to));
        }
        let ids = self
            .by_cluster
            .remove(&from)
            .ok_or(Error::UnknownCluster(from))?;
        for id in &ids {
            self.points.get_mut(id).unwrap().cluster = to;
        }
        self.by_cluster.get_mut(&to).unwrap().extend(ids);
        Ok(())
    }

    /// Current assignment map point id -> cluster id.
    pub fn assignments(&self) -> BTreeMap<PointId, ClusterId> {
        self.points.iter().map(|(id, sp)| (*id, sp.cluster)).collect()
    }

    /// Label map for labeled points only.
    pub fn labels(&self) -> BTreeMap<PointId, String> {
        self.points
            .iter()
            .filter_map(|(id, sp)| sp.label.clone().map(|l| (*id, l)))
            .collect()
    }

    pub(crate) fn iter(&self) -> impl Iterator<Item = (&PointId, &StoredPoint)> {
        self.points.iter()
    }

}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(id: u64, f: &[f64]) -> Point {
        Point::new(PointId(id), f.to_vec(), None)
    }

    #[test]
    fn append_and_members() {
        let mut s = PointStore::new(2);
        s.register_cluster(ClusterId(0));
        s.append_point(&pt(1, &[0.0, 0.0]), ClusterId(0)).unwrap();
        s.append_point(&pt(2, &[1.0, 1.0]), ClusterId(0)).unwrap();
        let members = s.members_of(ClusterId(0)).unwrap();
        assert_eq!(members.len(), 2);
        assert_eq!(members[0].id, PointId(1));
    }

    #[test]
    fn duplicate_id_rejected_store_unchanged() {
        let mut s = PointStore::new(2);
        s.register_cluster(ClusterId(0));
        s.append_point(&pt(1, &[0.0, 0.0]), ClusterId(0)).unwrap();
        let before = s.clone();
        let err = s.append_point(&pt(1, &[1.0, 1.0]), ClusterId(0)).unwrap_err();
        assert!(matches!(err, Error::DuplicatePointId(PointId(1))));
        assert_eq!(s, before);
    }

    #[test]
    fn unknown_cluster_rejected() {
        let mut s = PointStore::new(2);
        let err = s.append_point(&pt(1, &[0.0, 0.0]), ClusterId(9)).unwrap_err();
        assert!(matches!(err, Error::UnknownCluster(ClusterId(9))));
        assert!(s.members_of(ClusterId(9)).is_err());
    }

    #[test]
    fn empty_store_any_cluster_errors() {
        let s = PointStore::new(3);
        assert!(s.members_of(ClusterId(0)).is_err());
    }

    #[test]
    fn reassign_merges_membership() {
        let mut s = PointStore::new(1);
        s.register_cluster(ClusterId(0));
        s.register_cluster(ClusterId(1));
        s.register_cluster(ClusterId(2));
        s.append_point(&pt(1, &[0.0]), ClusterId(0)).unwrap();
        s.append_point(&pt(2, &[1.0]), ClusterId(1)).unwrap();
        s.reassign_cluster(ClusterId(0), ClusterId(2)).unwrap();
        s.reassign_cluster(ClusterId(1), ClusterId(2)).unwrap();
        assert_eq!(s.members_of(ClusterId(2)).unwrap().len(), 2);
        assert!(s.members_of(ClusterId(0)).is_err());
        assert!(s.members_of(ClusterId(1)).is_err());
    }

    #[test]
    fn non_finite_rejected() {
        let mut s = PointStore::new(1);
        s.register_cluster(ClusterId(0));
        let err = s
            .append_point(&pt(1, &[f64::NAN]), ClusterId(0))
            .unwrap_err();
        assert!(matches!(err, Error::NonFiniteFeature(_)));
    }
}
