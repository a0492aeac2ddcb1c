//! Cluster-quality evaluation: purity against ground-truth labels.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::store::{ClusterId, PointId};

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterPurity {
    pub cluster_id: ClusterId,
    pub size: usize,
    pub majority_label: String,
    pub majority_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PurityReport {
    pub total_points: usize,
    pub per_cluster: Vec<ClusterPurity>,
    pub purity: f64,
}

/// Purity = (1/N) Σ_i X_i where X_i is the majority-class count of cluster i.
/// Majority ties break toward the lexicographically smaller class name.
pub fn purity(
    assignments: &BTreeMap<PointId, ClusterId>,
    labels: &BTreeMap<PointId, String>,
) -> Result<PurityReport> {
    if assignments.is_empty() {
        return Err(Error::EmptyInput("purity: no assignments"));
    }
    let missing: Vec<PointId> = assignments
        .keys()
        .filter(|id| !labels.contains_key(id))
        .copied()
        .collect();
    if !missing.is_empty() {
        return Err(Error::UnlabeledPoints(missing));
    }

    let mut counts: BTreeMap<ClusterId, BTreeMap<&str, usize>> = BTreeMap::new();
    for (pid, cid) in assignments {
        *counts
            .entry(*cid)
            .or_default()
            .entry(labels[pid].as_str())
            .or_insert(0) += 1;
    }

    let mut per_cluster = Vec::with_capacity(counts.len());
    let mut majority_sum = 0usize;
    for (cid, by_label) in counts {
        let size: usize = by_label.values().sum();
        // BTreeMap iterates labels in lexicographic order, so the first
        // maximum is the tie-break winner
        let (label, count) = by_label
            .iter()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
            .expect("cluster has at least one point");
        majority_sum += count;
        per_cluster.push(ClusterPurity {
            cluster_id: cid,
            size,
            majority_label: (*label).to_string(),
            majority_count: *count,
        });
    }
    let total_points = assignments.len();
    Ok(PurityReport {
        total_points,
        per_cluster,
        purity: majority_sum as f64 / total_points as f64,
    })
}

impl PurityReport {
    /// Aligned human-readable table.
    pub fn text_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:>10}  {:>6}  {:<16}  {:>9}\n",
            "cluster", "size", "majority", "count"
        ));
        for c in &self.per_cluster {
            out.push_str(&format!(
                "{:>10}  {:>6}  {:<16}  {:>9}\n",
                c.cluster_id.to_string(),
                c.size,
                c.majority_label,
                c.majority_count
            ));
        }
        out.push_str(&format!(
            "purity = {} over {} points in {} clusters\n",
            self.purity,
            self.total_points,
            self.per_cluster.len()
        ));
        out
    }

    /// One metric per line, for scripting.
    pub fn key_value_lines(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("total_points={}\n", self.total_points));
        out.push_str(&format!("cluster_count={}\n", self.per_cluster.len()));
        for c in &self.per_cluster {
            out.push_str(&format!(
                "cluster.{}.size={}\ncluster.{}.majority_label={}\ncluster.{}.majority_count={}\n",
                c.cluster_id, c.size, c.cluster_id, c.majority_label, c.cluster_id, c.majority_count
            ));
        }
        out.push_str(&format!("purity={}\n", self.purity));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn setup(pairs: &[(u64, u64, &str)]) -> (BTreeMap<PointId, ClusterId>, BTreeMap<PointId, String>) {
        let mut a = BTreeMap::new();
        let mut l = BTreeMap::new();
        for (pid, cid, lab) in pairs {
            a.insert(PointId(*pid), ClusterId(*cid));
            l.insert(PointId(*pid), lab.to_string());
        }
        (a, l)
    }

    #[test]
    fn single_class_clusters_are_pure() {
        let (a, l) = setup(&[(0, 0, "x"), (1, 0, "x"), (2, 1, "y")]);
        let r = purity(&a, &l).unwrap();
        assert_eq!(r.purity, 1.0);
    }

    #[test]
    fn two_thirds_majority() {
        let (a, l) = setup(&[(0, 0, "A"), (1, 0, "A"), (2, 0, "B")]);
        let r = purity(&a, &l).unwrap();
        assert_eq!(r.purity, 2.0 / 3.0);
        assert_eq!(r.per_cluster[0].majority_label, "A");
        assert_eq!(r.per_cluster[0].majority_count, 2);
    }

    #[test]
    fn mixed_clusters() {
        let (a, l) = setup(&[(0, 0, "A"), (1, 0, "A"), (2, 1, "B"), (3, 1, "A")]);
        let r = purity(&a, &l).unwrap();
        assert_eq!(r.purity, 0.75);
    }

    #[test]
    fn majority_tie_breaks_lexicographically() {
        let (a, l) = setup(&[(0, 0, "b"), (1, 0, "a")]);
        let r = purity(&a, &l).unwrap();
        assert_eq!(r.per_cluster[0].majority_label, "a");
        assert_eq!(r.per_cluster[0].majority_count, 1);
    }

    #[test]
    fn unlabeled_points_listed() {
        let (a, mut l) = setup(&[(0, 0, "A"), (1, 0, "A")]);
        l.remove(&PointId(1));
        match purity(&a, &l) {
            Err(Error::UnlabeledPoints(ids)) => assert_eq!(ids, vec![PointId(1)]),
            other => panic!("expected UnlabeledPoints, got {other:?}"),
        }
    }

    fn arb_labeled_partition() -> impl Strategy<Value = Vec<(u64, u64, String)>> {
        proptest::collection::vec((0u64..6, proptest::sample::select(vec!["a", "b", "c"])), 1..60)
            .prop_map(|rows| {
                rows.into_iter()
                    .enumerate()
                    .map(|(i, (c, lab))| (i as u64, c, lab.to_string()))
                    .collect()
            })
    }

    proptest! {
        #[test]
        fn bounds_and_relabel_invariance(rows in arb_labeled_partition()) {
            let pairs: Vec<(u64, u64, &str)> =
                rows.iter().map(|(p, c, l)| (*p, *c, l.as_str())).collect();
            let (a, l) = setup(&pairs);
            let n = a.len() as f64;
            let r = purity(&a, &l).unwrap();
            prop_assert!(r.purity >= 1.0 / n - 1e-12 && r.purity <= 1.0);
            let all_pure = r.per_cluster.iter().all(|c| c.majority_count == c.size);
            prop_assert_eq!(r.purity == 1.0, all_pure);
            // relabel cluster ids (order-reversing bijection): purity unchanged
            let remapped: BTreeMap<PointId, ClusterId> = a
                .iter()
                .map(|(p, c)| (*p, ClusterId(1000 - c.0)))
                .collect();
            let r2 = purity(&remapped, &l).unwrap();
            prop_assert_eq!(r.purity, r2.purity);
        }

        #[test]
        fn refinement_never_decreases_purity(rows in arb_labeled_partition(), split_bit in proptest::collection::vec(any::<bool>(), 60)) {
            let pairs: Vec<(u64, u64, &str)> =
                rows.iter().map(|(p, c, l)| (*p, *c, l.as_str())).collect();
            let (a, l) = setup(&pairs);
            let r = purity(&a, &l).unwrap();
            // split every cluster in two by point parity of the split mask
            let refined: BTreeMap<PointId, ClusterId> = a
                .iter()
                .map(|(p, c)| {
                    let half = split_bit[p.0 as usize % split_bit.len()] as u64;
                    (*p, ClusterId(c.0 * 2 + half))
                })
                .collect();
            let r2 = purity(&refined, &l).unwrap();
            prop_assert!(r2.purity >= r.purity - 1e-12);
        }
    }
}
