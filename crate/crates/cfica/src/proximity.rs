//! The Inverse Proximity Estimate: distance to the cluster mean plus a bias
//! that grows with the distance from the incoming point to the farthest
//! cluster member in its vicinity, and with that member's distance to the
//! mean. Smaller means more acceptable.

use crate::cf::ClusterFeature;
use crate::error::{Error, Result};
use crate::store::{ClusterId, PointId};
use crate::vecmath::{euclidean, Vector};

#[derive(Debug, Clone, PartialEq)]
pub struct ProximityResult {
    pub cluster_id: ClusterId,
    pub ipe: f64,
    pub ed_to_mean: f64,
    pub bias: f64,
    /// The vicinity farthest point the bias was computed against.
    pub q_used: PointId,
}

/// The element of Q nearest to `y`; ties break toward the lower point id.
pub fn vicinity_farthest<'a>(
    cf: &'a ClusterFeature,
    y: &Vector,
) -> Result<(&'a PointId, &'a Vector)> {
    let mut best: Option<(&PointId, &Vector, f64)> = None;
    for (id, v) in cf.farthest_points() {
        let d = euclidean(v, y)?;
        let better = match best {
            None => true,
            Some((bid, _, bd)) => d < bd || (d == bd && id < bid),
        };
        if better {
            best = Some((id, v, d));
        }
    }
    best.map(|(id, v, _)| (id, v)).ok_or_else(|| {
        Error::Corrupt(format!("cluster {} has an empty Q", cf.cluster_id()))
    })
}

/// IPE of `y` with respect to one cluster. Distances are measured against the
/// snapshot mean the farthest-point list was computed from.
pub fn ipe(cf: &ClusterFeature, y: &Vector) -> Result<ProximityResult> {
    y.check_dim(cf.dim())?;
    let (q_id, q) = vicinity_farthest(cf, y)?;
    let m = cf.mean_snapshot();
    let ed_to_mean = euclidean(m, y)?;
    let bias = euclidean(q, y)? * euclidean(m, q)?;
    Ok(ProximityResult {
        cluster_id: cf.cluster_id(),
        ipe: ed_to_mean + bias,
        ed_to_mean,
        bias,
        q_used: *q_id,
    })
}
