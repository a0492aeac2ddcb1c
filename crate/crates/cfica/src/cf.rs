//! The Cluster Feature quintuple {n, m, m_new, Q, SS} and its algebra:
//! construction, incremental insertion, singleton creation, merge, variance,
//! drift deviation, and refresh.
//!
//! `m` is the mean snapshot the farthest-point list Q was computed against;
//! `m_new` is the running mean that tracks every insertion. They coincide
//! right after construction, refresh, or merge, and diverge as points are
//! inserted until the next refresh.

use crate::error::{Error, Result};
use crate::store::{ClusterId, Point, PointId};
use crate::vecmath::{self, euclidean, squared_components, Vector};

/// Hyperparameters of a model. All strictly positive.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperParams {
    /// Target number of clusters (initial k-means order and merge pressure).
    pub k: usize,
    /// Size of the farthest-point list Q.
    pub p: usize,
    /// Assignment threshold: a point joins its argmin cluster only if its
    /// inverse proximity estimate is below lambda.
    pub lambda: f64,
    /// Merge gate: only centroid pairs closer than theta are merge-eligible.
    pub theta: f64,
    /// Drift threshold on the relative deviation between running and
    /// snapshot means.
    pub delta: f64,
}

impl HyperParams {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.p == 0 {
            return Err(Error::Corrupt("k and p must be positive".into()));
        }
        for (name, v) in [
            ("lambda", self.lambda),
            ("theta", self.theta),
            ("delta", self.delta),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Corrupt(format!("{name} must be strictly positive")));
            }
        }
        Ok(())
    }
}

/// Relative deviation of the running mean from the snapshot mean. When the
/// snapshot mean is the zero vector the deviation falls back to the absolute
/// distance, flagged via `absolute_fallback`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftDeviation {
    pub value: f64,
    pub absolute_fallback: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterFeature {
    cluster_id: ClusterId,
    n: u64,
    m: Vector,
    m_new: Vector,
    q: Vec<(PointId, Vector)>,
    ss: Vector,
}

/// Sorts candidate (id, vector, distance) triples descending by distance,
/// ties toward lower point id, and keeps the top `p`.
fn top_p_farthest(mut candidates: Vec<(PointId, Vector, f64)>, p: usize) -> Vec<(PointId, Vector)> {
    candidates.sort_by(|a, b| b.2.partial_cmp(&a.2).unwrap().then(a.0.cmp(&b.0)));
    candidates
        .into_iter()
        .take(p)
        .map(|(id, v, _)| (id, v))
        .collect()
}

impl ClusterFeature {
    /// Builds a CF from raw member points: n, m = m_new = mean,
    /// SS = component-wise sum of squares, Q = top-min(p, n) members by
    /// distance to the mean, descending.
    pub fn build(cluster_id: ClusterId, members: &[Point], p: usize) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::EmptyInput("cf_build: no members"));
        }
        let features: Vec<Vector> = members.iter().map(|pt| pt.features.clone()).collect();
        let m = vecmath::mean_of(&features)?;
        let mut ss = squared_components(&features[0]);
        for f in &features[1..] {
            ss = vecmath::add(&ss, &squared_components(f))?;
        }
        let candidates = members
            .iter()
            .map(|pt| {
                euclidean(&pt.features, &m).map(|d| (pt.id, pt.features.clone(), d))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ClusterFeature {
            cluster_id,
            n: members.len() as u64,
            m_new: m.clone(),
            m,
            q: top_p_farthest(candidates, p),
            ss,
        })
    }

    /// A fresh singleton cluster around one point.
    pub fn singleton(cluster_id: ClusterId, y: &Point) -> Self {
        ClusterFeature {
            cluster_id,
            n: 1,
            m: y.features.clone(),
            m_new: y.features.clone(),
            q: vec![(y.id, y.features.clone())],
            ss: squared_components(&y.features),
        }
    }

    /// Incremental insertion: updates n, m_new, and SS; m and Q stay frozen
    /// until the next refresh.
    pub fn insert(&self, y: &Point) -> Result<Self> {
        y.features.check_dim(self.dim())?;
        let n = self.n as f64;
        let m_new = vecmath::weighted_sum(&self.m_new, n / (n + 1.0), &y.features, 1.0 / (n + 1.0))?;
        let ss = vecmath::add(&self.ss, &squared_components(&y.features))?;
        Ok(ClusterFeature {
            cluster_id: self.cluster_id,
            n: self.n + 1,
            m: self.m.clone(),
            m_new,
            q: self.q.clone(),
            ss,
        })
    }

    /// Merges two CFs into a new cluster: counts and squared sums add, the
    /// mean is the weighted mean, and Q is re-ranked from the union of both
    /// farthest-point lists against the merged mean.
    pub fn merge(a: &Self, b: &Self, new_id: ClusterId, p: usize) -> Result<Self> {
        b.m_new.check_dim(a.dim())?;
        let n = a.n + b.n;
        let m = vecmath::weighted_sum(
            &a.m_new,
            a.n as f64 / n as f64,
            &b.m_new,
            b.n as f64 / n as f64,
        )?;
        let ss = vecmath::add(&a.ss, &b.ss)?;
        let candidates = a
            .q
            .iter()
            .chain(b.q.iter())
            .map(|(id, v)| euclidean(v, &m).map(|d| (*id, v.clone(), d)))
            .collect::<Result<Vec<_>>>()?;
        Ok(ClusterFeature {
            cluster_id: new_id,
            n,
            m_new: m.clone(),
            m,
            q: top_p_farthest(candidates, p.min(n as usize)),
            ss,
        })
    }

    /// Total per-cluster variance: sum over dimensions of SS_d/n − mean_d².
    /// Small negative floating-point residue is clamped to zero.
    pub fn variance(&self) -> Result<f64> {
        let n = self.n as f64;
        let v: f64 = self
            .ss
            .components()
            .iter()
            .zip(self.m_new.components())
            .map(|(ss, m)| ss / n - m * m)
            .sum();
        if v < -1e-9 {
            return Err(Error::Corrupt(format!(
                "negative variance {v} in cluster {}",
                self.cluster_id
            )));
        }
        Ok(v.max(0.0))
    }

    /// Deviation of the running mean from the snapshot mean, relative to the
    /// snapshot mean's norm.
    pub fn drift_deviation(&self) -> DriftDeviation {
        let num = euclidean(&self.m_new, &self.m).expect("same dimension by construction");
        let denom = self.m.norm();
        if denom == 0.0 {
            DriftDeviation {
                value: num,
                absolute_fallback: true,
            }
        } else {
            DriftDeviation {
                value: num / denom,
                absolute_fallback: false,
            }
        }
    }

    /// Recomputes the CF from the cluster's stored points: m is reset to the
    /// current mean and Q is recomputed against it.
    pub fn refresh(&self, members: &[Point], p: usize) -> Result<Self> {
        if members.len() as u64 != self.n {
            return Err(Error::StoreDivergence {
                cluster: self.cluster_id,
                store_count: members.len(),
                cf_count: self.n,
            });
        }
        Self::build(self.cluster_id, members, p)
    }

    pub fn cluster_id(&self) -> ClusterId {
        self.cluster_id
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn mean_snapshot(&self) -> &Vector {
        &self.m
    }

    pub fn mean_running(&self) -> &Vector {
        &self.m_new
    }

    pub fn farthest_points(&self) -> &[(PointId, Vector)] {
        &self.q
    }

    pub fn squared_sum(&self) -> &Vector {
        &self.ss
    }

    pub fn dim(&self) -> usize {
        self.m.dim()
    }

    /// Reassembles a CF from its raw fields, checking basic invariants.
    /// Used when deserializing and for constructing controlled fixtures.
    pub fn from_parts(
        cluster_id: ClusterId,
        n: u64,
        m: Vector,
        m_new: Vector,
        q: Vec<(PointId, Vector)>,
        ss: Vector,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::Corrupt(format!("cluster {cluster_id} has n = 0")));
        }
        if q.is_empty() {
            return Err(Error::Corrupt(format!("cluster {cluster_id} has empty Q")));
        }
        let dim = m.dim();
        m_new.check_dim(dim)?;
        ss.check_dim(dim)?;
        for (_, v) in &q {
            v.check_dim(dim)?;
        }
        Ok(ClusterFeature {
            cluster_id,
            n,
            m,
            m_new,
            q,
            ss,
        })
    }
}

/// Exact increase in total within-cluster SSE caused by merging two clusters,
/// computable from the CFs alone: n_a·n_b/(n_a+n_b) · ED(m_a, m_b)².
pub fn merge_cost(a: &ClusterFeature, b: &ClusterFeature) -> Result<f64> {
    let d = euclidean(&a.m_new, &b.m_new)?;
    let (na, nb) = (a.n as f64, b.n as f64);
    Ok(na * nb / (na + nb) * d * d)
}
