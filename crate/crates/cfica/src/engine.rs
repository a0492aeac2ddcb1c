//! Orchestration of the incremental clustering lifecycle: bootstrap from the
//! first chunk via k-means, per-point assignment or singleton creation under
//! the lambda gate, the theta-gated merge pass, and drift-triggered refresh.

use std::collections::BTreeMap;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::cf::{merge_cost, ClusterFeature, HyperParams};
use crate::error::{Error, Result};
use crate::kmeans::{kmeans_fit, KMeansConfig};
use crate::proximity::{ipe, ProximityResult};
use crate::store::{ClusterId, Point, PointStore};
use crate::vecmath::{euclidean, Vector};

/// When the drift test runs: after every insertion (as in the per-point
/// branch of the core loop) or once per chunk before merging.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DriftMode {
    PerPoint,
    PerChunk,
}

impl DriftMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            DriftMode::PerPoint => "per-point",
            DriftMode::PerChunk => "per-chunk",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "per-point" => Some(DriftMode::PerPoint),
            "per-chunk" => Some(DriftMode::PerChunk),
            _ => None,
        }
    }
}

/// One existing-cluster assignment, kept for gate auditing.
#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentAudit {
    pub point_id: crate::store::PointId,
    pub cluster_id: ClusterId,
    pub ipe: f64,
    pub lambda: f64,
}

/// One executed merge, kept for gate auditing.
#[derive(Debug, Clone, PartialEq)]
pub struct MergeAudit {
    pub absorbed: (ClusterId, ClusterId),
    pub new_cluster: ClusterId,
    pub centroid_distance: f64,
    pub cost: f64,
    pub theta: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IngestReport {
    pub points_processed: usize,
    pub assigned_existing: usize,
    pub singletons_created: usize,
    pub merges_performed: usize,
    pub refreshes_performed: usize,
    pub final_cluster_count: usize,
    pub assignment_audit: Vec<AssignmentAudit>,
    pub merge_audit: Vec<MergeAudit>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    params: HyperParams,
    drift_mode: DriftMode,
    clusters: BTreeMap<ClusterId, ClusterFeature>,
    dimension: usize,
    generation: u64,
    next_cluster_id: u64,
}

impl Model {
    pub fn params(&self) -> &HyperParams {
        &self.params
    }

    pub fn drift_mode(&self) -> DriftMode {
        self.drift_mode
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn generation(&self) -> u64 {
        self.generation
    }

    pub fn active_count(&self) -> usize {
        self.clusters.len()
    }

    pub fn clusters(&self) -> impl Iterator<Item = &ClusterFeature> {
        self.clusters.values()
    }

    pub fn cluster(&self, id: ClusterId) -> Option<&ClusterFeature> {
        self.clusters.get(&id)
    }

    pub fn total_points(&self) -> u64 {
        self.clusters.values().map(|cf| cf.n()).sum()
    }

    pub(crate) fn from_parts(
        params: HyperParams,
        drift_mode: DriftMode,
        clusters: BTreeMap<ClusterId, ClusterFeature>,
        dimension: usize,
        generation: u64,
        next_cluster_id: u64,
    ) -> Result<Self> {
        params.validate()?;
        if clusters.is_empty() {
            return Err(Error::EmptyInput("model has no clusters"));
        }
        for cf in clusters.values() {
            if cf.dim() != dimension {
                return Err(Error::DimensionMismatch {
                    expected: dimension,
                    actual: cf.dim(),
                });
            }
        }
        Ok(Model {
            params,
            drift_mode,
            clusters,
            dimension,
            generation,
            next_cluster_id,
        })
    }

    pub(crate) fn next_cluster_id(&self) -> u64 {
        self.next_cluster_id
    }

    fn fresh_cluster_id(&mut self) -> ClusterId {
        let id = ClusterId(self.next_cluster_id);
        self.next_cluster_id += 1;
        id
    }

    /// Initial clustering of the first chunk: k-means, one CF per cluster,
    /// all points written to the store.
    pub fn bootstrap(
        points: &[Point],
        params: HyperParams,
        drift_mode: DriftMode,
        kconfig: &KMeansConfig,
        store: &mut PointStore,
    ) -> Result<Model> {
        params.validate()?;
        if kconfig.k != params.k {
            return Err(Error::Corrupt(format!(
                "k mismatch between params ({}) and k-means config ({})",
                params.k, kconfig.k
            )));
        }
        if points.is_empty() {
            return Err(Error::EmptyInput("bootstrap: no points"));
        }
        let dimension = points[0].features.dim();
        let partition = kmeans_fit(points, kconfig)?;

        let store_backup = store.clone();
        let result = (|| {
            let mut by_cluster: BTreeMap<usize, Vec<Point>> = BTreeMap::new();
            for p in points {
                by_cluster
                    .entry(partition.assignments[&p.id])
                    .or_default()
                    .push(p.clone());
            }
            let mut clusters = BTreeMap::new();
            let mut next_id = 0u64;
            for (_, members) in by_cluster {
                let id = ClusterId(next_id);
                next_id += 1;
                store.register_cluster(id);
                for p in &members {
                    store.append_point(p, id)?;
                }
                clusters.insert(id, ClusterFeature::build(id, &members, params.p)?);
            }
            Ok(Model {
                params,
                drift_mode,
                clusters,
                dimension,
                generation: 0,
                next_cluster_id: next_id,
            })
        })();
        if result.is_err() {
            *store = store_backup;
        }
        result
    }

    /// IPE of `y` against every cluster; argmin with ties toward the lower
    /// cluster id. Evaluated in parallel when the `parallel` feature is on.
    pub fn best_proximity(&self, y: &Vector) -> Result<ProximityResult> {
        #[cfg(feature = "parallel")]
        {
            scan_parallel(self.clusters.values(), y)
        }
        #[cfg(not(feature = "parallel"))]
        {
            scan_sequential(self.clusters.values(), y)
        }
    }

    /// Processes one point: joins the argmin cluster when its IPE clears the
    /// lambda gate (with a drift-triggered refresh in per-point mode),
    /// otherwise founds a singleton cluster. On error the model is unchanged.
    pub fn ingest_point(
        &mut self,
        y: &Point,
        store: &mut PointStore,
        report: &mut IngestReport,
    ) -> Result<()> {
        y.validate(self.dimension)?;
        if store.contains_point(y.id) {
            return Err(Error::DuplicatePointId(y.id));
        }
        let best = self.best_proximity(&y.features)?;
        if best.ipe < self.params.lambda {
            let j = best.cluster_id;
            let updated = self.clusters[&j].insert(y)?;
            store.append_point(y, j)?;
            report.assignment_audit.push(AssignmentAudit {
                point_id: y.id,
                cluster_id: j,
                ipe: best.ipe,
                lambda: self.params.lambda,
            });
            report.assigned_existing += 1;
            let drifted = self.drift_mode == DriftMode::PerPoint
                && updated.drift_deviation().value > self.params.delta;
            let final_cf = if drifted {
                let members = store.members_of(j)?;
                report.refreshes_performed += 1;
                updated.refresh(&members, self.params.p)?
            } else {
                updated
            };
            self.clusters.insert(j, final_cf);
        } else {
            let id = self.fresh_cluster_id();
            store.register_cluster(id);
            store.append_point(y, id)?;
            self.clusters.insert(id, ClusterFeature::singleton(id, y));
            report.singletons_created += 1;
        }
        report.points_processed += 1;
        Ok(())
    }

    /// While the cluster count exceeds k, merges the cheapest pair among
    /// those with centroid distance below theta; stops when no pair passes
    /// the gate. Reverts to the pre-pass state if a store update fails.
    pub fn merge_pass(&mut self, store: &mut PointStore, report: &mut IngestReport) -> Result<()> {
        let backup = (self.clone(), store.clone());
        let result = self.merge_pass_inner(store, report);
        if result.is_err() {
            *self = backup.0;
            *store = backup.1;
        }
        result
    }

    fn merge_pass_inner(
        &mut self,
        store: &mut PointStore,
        report: &mut IngestReport,
    ) -> Result<()> {
        while self.clusters.len() > self.params.k {
            let ids: Vec<ClusterId> = self.clusters.keys().copied().collect();
            let mut best: Option<(ClusterId, ClusterId, f64, f64)> = None;
            for (i, a) in ids.iter().enumerate() {
                for b in &ids[i + 1..] {
                    let d = euclidean(
                        self.clusters[a].mean_running(),
                        self.clusters[b].mean_running(),
                    )?;
                    if d >= self.params.theta {
                        continue;
                    }
                    let cost = merge_cost(&self.clusters[a], &self.clusters[b])?;
                    let better = match &best {
                        None => true,
                        Some((ba, bb, _, bc)) => {
                            cost < *bc || (cost == *bc && (*a, *b) < (*ba, *bb))
                        }
                    };
                    if better {
                        best = Some((*a, *b, d, cost));
                    }
                }
            }
            let Some((a, b, dist, cost)) = best else {
                break; // no cluster pair is mergable
            };
            let new_id = self.fresh_cluster_id();
            let merged = ClusterFeature::merge(
                &self.clusters[&a],
                &self.clusters[&b],
                new_id,
                self.params.p,
            )?;
            store.register_cluster(new_id);
            store.reassign_cluster(a, new_id)?;
            store.reassign_cluster(b, new_id)?;
            self.clusters.remove(&a);
            self.clusters.remove(&b);
            self.clusters.insert(new_id, merged);
            report.merges_performed += 1;
            report.merge_audit.push(MergeAudit {
                absorbed: (a, b),
                new_cluster: new_id,
                centroid_distance: dist,
                cost,
                theta: self.params.theta,
            });
        }
        Ok(())
    }

    /// Processes a whole chunk: every point in order, a per-chunk drift pass
    /// when configured, then one merge pass. Atomic: a failure rolls model
    /// and store back to the chunk start.
    pub fn ingest_chunk(
        &mut self,
        chunk: &[Point],
        store: &mut PointStore,
    ) -> Result<IngestReport> {
        let backup = (self.clone(), store.clone());
        match self.ingest_chunk_inner(chunk, store) {
            Ok(report) => Ok(report),
            Err(e) => {
                *self = backup.0;
                *store = backup.1;
                Err(e)
            }
        }
    }

    fn ingest_chunk_inner(
        &mut self,
        chunk: &[Point],
        store: &mut PointStore,
    ) -> Result<IngestReport> {
        let mut report = IngestReport::default();
        for y in chunk {
            self.ingest_point(y, store, &mut report)?;
        }
        if self.drift_mode == DriftMode::PerChunk {
            let ids: Vec<ClusterId> = self.clusters.keys().copied().collect();
            for id in ids {
                if self.clusters[&id].drift_deviation().value > self.params.delta {
                    let members = store.members_of(id)?;
                    let refreshed = self.clusters[&id].refresh(&members, self.params.p)?;
                    self.clusters.insert(id, refreshed);
                    report.refreshes_performed += 1;
                }
            }
        }
        self.merge_pass_inner(store, &mut report)?;
        self.generation += 1;
        report.final_cluster_count = self.clusters.len();
        Ok(report)
    }

    /// Consistency check between the model and its store: conservation of
    /// counts and referential integrity.
    pub fn check_consistency(&self, store: &PointStore) -> Result<()> {
        if self.total_points() != store.len() as u64 {
            return Err(Error::Corrupt(format!(
                "CF counts sum to {} but store holds {} points",
                self.total_points(),
                store.len()
            )));
        }
        for cf in self.clusters.values() {
            let count = store.member_count(cf.cluster_id())?;
            if count as u64 != cf.n() {
                return Err(Error::StoreDivergence {
                    cluster: cf.cluster_id(),
                    store_count: count,
                    cf_count: cf.n(),
                });
            }
        }
        for cid in store.cluster_ids() {
            if !self.clusters.contains_key(&cid) {
                return Err(Error::UnknownCluster(cid));
            }
        }
        Ok(())
    }
}

fn pick_better(a: ProximityResult, b: ProximityResult) -> ProximityResult {
    if b.ipe < a.ipe || (b.ipe == a.ipe && b.cluster_id < a.cluster_id) {
        b
    } else {
        a
    }
}

/// Sequential per-cluster IPE scan; the reference reduction order.
pub fn scan_sequential<'a>(
    clusters: impl Iterator<Item = &'a ClusterFeature>,
    y: &Vector,
) -> Result<ProximityResult> {
    let mut best: Option<ProximityResult> = None;
    for cf in clusters {
        let r = ipe(cf, y)?;
        best = Some(match best {
            None => r,
            Some(b) => pick_better(b, r),
        });
    }
    best.ok_or(Error::EmptyInput("no clusters to scan"))
}

/// Parallel per-cluster IPE scan. Reduces to the same argmin as the
/// sequential scan: strict-minimum on ipe with ties toward the lower
/// cluster id, both order-independent.
#[cfg(feature = "parallel")]
pub fn scan_parallel<'a>(
    clusters: impl Iterator<Item = &'a ClusterFeature>,
    y: &Vector,
) -> Result<ProximityResult> {
    let clusters: Vec<&ClusterFeature> = clusters.collect();
    clusters
        .par_iter()
        .map(|cf| ipe(cf, y))
        .try_reduce_with(|a, b| Ok(pick_better(a, b)))
        .unwrap_or(Err(Error::EmptyInput("no clusters to scan")))
}
