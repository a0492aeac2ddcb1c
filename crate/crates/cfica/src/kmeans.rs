//! Lloyd k-means with k-means++ seeding, used once to cluster the initial
//! chunk. Deterministic given the seed; ties in nearest-centroid assignment
//! break toward the lower cluster index.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::store::{Point, PointId};
use crate::vecmath::{euclidean, mean_of, Vector};

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansConfig {
    pub k: usize,
    pub max_iterations: usize,
    pub convergence_tol: f64,
    pub rng_seed: u64,
}

impl KMeansConfig {
    pub fn new(k: usize, rng_seed: u64) -> Self {
        KMeansConfig {
            k,
            max_iterations: 100,
            convergence_tol: 1e-6,
            rng_seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    pub assignments: BTreeMap<PointId, usize>,
    pub centroids: Vec<Vector>,
}

fn nearest_centroid(y: &Vector, centroids: &[Vector]) -> Result<(usize, f64)> {
    let mut best = (0usize, f64::INFINITY);
    for (i, c) in centroids.iter().enumerate() {
        let d = euclidean(y, c)?;
        if d < best.1 {
            best = (i, d);
        }
    }
    Ok(best)
}

/// k-means++ seeding: first centroid uniform, then each next centroid drawn
/// with probability proportional to squared distance from the nearest chosen
/// centroid. When all remaining mass is zero (duplicate points), falls back
/// to the first not-yet-chosen point.
fn seed_plus_plus(points: &[Point], k: usize, rng: &mut ChaCha8Rng) -> Result<Vec<Vector>> {
    let mut centroids: Vec<Vector> = Vec::with_capacity(k);
    let mut chosen: BTreeSet<usize> = BTreeSet::new();
    let first = rng.random_range(0..points.len());
    centroids.push(points[first].features.clone());
    chosen.insert(first);

    let mut d2: Vec<f64> = points
        .iter()
        .map(|p| {
            let d = euclidean(&p.features, &centroids[0]).unwrap();
            d * d
        })
        .collect();

    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let idx = if total > 0.0 {
            let mut r = rng.random::<f64>() * total;
            let mut picked = points.len() - 1;
            for (i, w) in d2.iter().enumerate() {
                if r < *w {
                    picked = i;
                    break;
                }
                r -= w;
            }
            picked
        } else {
            match (0..points.len()).find(|i| !chosen.contains(i)) {
                Some(i) => i,
                None => {
                    return Err(Error::Corrupt(
                        "k-means++ seeding exhausted distinct points".into(),
                    ))
                }
            }
        };
        chosen.insert(idx);
        centroids.push(points[idx].features.clone());
        let newest = centroids.last().unwrap();
        for (i, p) in points.iter().enumerate() {
            let d = euclidean(&p.features, newest)?;
            d2[i] = d2[i].min(d * d);
        }
    }
    Ok(centroids)
}

/// Runs Lloyd iterations until the largest centroid shift falls below the
/// tolerance or the iteration cap is hit. No empty cluster is returned:
/// an empty cluster is reseeded with the point farthest from its assigned
/// centroid.
pub fn kmeans_fit(points: &[Point], config: &KMeansConfig) -> Result<Partition> {
    let k = config.k;
    if k == 0 {
        return Err(Error::Corrupt("k must be positive".into()));
    }
    if points.len() < k {
        return Err(Error::TooFewPoints {
            k,
            points: points.len(),
        });
    }
    let dim = points[0].features.dim();
    let mut seen = BTreeSet::new();
    for p in points {
        p.validate(dim)?;
        if !seen.insert(p.id) {
            return Err(Error::DuplicatePointId(p.id));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let mut centroids = seed_plus_plus(points, k, &mut rng)?;
    let mut labels = vec![0usize; points.len()];
    let mut prev_sse = f64::INFINITY;

    for _ in 0..config.max_iterations {
        // assignment step
        let mut sse = 0.0;
        for (i, p) in points.iter().enumerate() {
            let (j, d) = nearest_centroid(&p.features, &centroids)?;
            labels[i] = j;
            sse += d * d;
        }
        debug_assert!(
            sse <= prev_sse + 1e-9 * prev_sse.abs().max(1.0),
            "SSE increased across Lloyd iterations: {prev_sse} -> {sse}"
        );
        prev_sse = sse;

        // update step
        let mut new_centroids = Vec::with_capacity(k);
        let mut repaired: BTreeSet<usize> = BTreeSet::new();
        for j in 0..k {
            let members: Vec<Vector> = points
                .iter()
                .zip(&labels)
                .filter(|(_, l)| **l == j)
                .map(|(p, _)| p.features.clone())
                .collect();
            if members.is_empty() {
                // reseed with the point farthest from its assigned centroid
                let (far_idx, _) = points
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| !repaired.contains(i))
                    .map(|(i, p)| {
                        let d = euclidean(&p.features, &centroids[labels[i]]).unwrap();
                        (i, d)
                    })
                    .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(b.0.cmp(&a.0)))
                    .expect("points outnumber clusters");
                repaired.insert(far_idx);
                new_centroids.push(points[far_idx].features.clone());
            } else {
                new_centroids.push(mean_of(&members)?);
            }
        }

        let mut shift = 0.0f64;
        for (old, new) in centroids.iter().zip(&new_centroids) {
            shift = shift.max(euclidean(old, new)?);
        }
        centroids = new_centroids;
        if shift < config.convergence_tol && repaired.is_empty() {
            break;
        }
    }

    // final assignment: every point to its nearest centroid at termination
    for (i, p) in points.iter().enumerate() {
        labels[i] = nearest_centroid(&p.features, &centroids)?.0;
    }
    // repair any cluster emptied by the final assignment
    loop {
        let counts = {
            let mut c = vec![0usize; k];
            for l in &labels {
                c[*l] += 1;
            }
            c
        };
        let Some(empty) = counts.iter().position(|c| *c == 0) else {
            break;
        };
        let (far_idx, _) = points
            .iter()
            .enumerate()
            .filter(|(i, _)| counts[labels[*i]] > 1)
            .map(|(i, p)| (i, euclidean(&p.features, &centroids[labels[i]]).unwrap()))
            .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(b.0.cmp(&a.0)))
            .expect("points outnumber clusters");
        centroids[empty] = points[far_idx].features.clone();
        labels[far_idx] = empty;
    }

    let assignments = points
        .iter()
        .zip(&labels)
        .map(|(p, l)| (p.id, *l))
        .collect();
    Ok(Partition {
        assignments,
        centroids,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(id: u64, f: &[f64]) -> Point {
        Point::new(PointId(id), f.to_vec(), None)
    }

    fn sse_of(points: &[Point], part: &Partition) -> f64 {
        points
            .iter()
            .map(|p| {
                let c = &part.centroids[part.assignments[&p.id]];
                euclidean(&p.features, c).unwrap().powi(2)
            })
            .sum()
    }

    /// Brute-force minimum SSE over all assignments of points to 2 groups.
    fn brute_force_two_cluster_sse(points: &[Point]) -> f64 {
        let n = points.len();
        let mut best = f64::INFINITY;
        for mask in 1..(1u32 << n) - 1 {
            let (mut a, mut b) = (Vec::new(), Vec::new());
            for (i, p) in points.iter().enumerate() {
                if mask & (1 << i) != 0 {
                    a.push(p.features.clone());
                } else {
                    b.push(p.features.clone());
                }
            }
            let sse = |g: &[Vector]| -> f64 {
                let m = mean_of(g).unwrap();
                g.iter().map(|v| euclidean(v, &m).unwrap().powi(2)).sum()
            };
            best = best.min(sse(&a) + sse(&b));
        }
        best
    }

    #[test]
    fn two_separated_pairs() {
        let points = vec![
            pt(0, &[0.0, 0.0]),
            pt(1, &[0.0, 1.0]),
            pt(2, &[10.0, 10.0]),
            pt(3, &[10.0, 11.0]),
        ];
        let part = kmeans_fit(&points, &KMeansConfig::new(2, 0)).unwrap();
        assert_eq!(part.assignments[&PointId(0)], part.assignments[&PointId(1)]);
        assert_eq!(part.assignments[&PointId(2)], part.assignments[&PointId(3)]);
        assert_ne!(part.assignments[&PointId(0)], part.assignments[&PointId(2)]);
        let oracle = brute_force_two_cluster_sse(&points);
        assert!((sse_of(&points, &part) - oracle).abs() < 1e-9);
    }

    #[test]
    fn singleton_input() {
        let points = vec![pt(0, &[5.0, 5.0])];
        let part = kmeans_fit(&points, &KMeansConfig::new(1, 0)).unwrap();
        assert_eq!(part.centroids[0].components(), &[5.0, 5.0]);
        assert_eq!(part.assignments[&PointId(0)], 0);
    }

    #[test]
    fn k_equals_n_gives_zero_sse() {
        let points = vec![
            pt(0, &[0.0]),
            pt(1, &[3.0]),
            pt(2, &[7.0]),
            pt(3, &[11.0]),
        ];
        let part = kmeans_fit(&points, &KMeansConfig::new(4, 9)).unwrap();
        let clusters: BTreeSet<usize> = part.assignments.values().copied().collect();
        assert_eq!(clusters.len(), 4);
        assert_eq!(sse_of(&points, &part), 0.0);
    }

    #[test]
    fn too_few_points_errors() {
        let points = vec![pt(0, &[0.0])];
        assert!(matches!(
            kmeans_fit(&points, &KMeansConfig::new(2, 0)),
            Err(Error::TooFewPoints { .. })
        ));
    }

    #[test]
    fn duplicate_ids_error() {
        let points = vec![pt(0, &[0.0]), pt(0, &[1.0])];
        assert!(matches!(
            kmeans_fit(&points, &KMeansConfig::new(1, 0)),
            Err(Error::DuplicatePointId(_))
        ));
    }

    #[test]
    fn deterministic_given_seed() {
        use rand::prelude::*;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let points: Vec<Point> = (0..60)
            .map(|i| {
                pt(
                    i,
                    &[rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0)],
                )
            })
            .collect();
        let cfg = KMeansConfig::new(5, 123);
        let a = kmeans_fit(&points, &cfg).unwrap();
        let b = kmeans_fit(&points, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn every_point_nearest_its_centroid_at_termination() {
        use rand::prelude::*;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let points: Vec<Point> = (0..80)
            .map(|i| {
                pt(
                    i,
                    &[rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0)],
                )
            })
            .collect();
        let part = kmeans_fit(&points, &KMeansConfig::new(4, 5)).unwrap();
        for p in &points {
            let assigned = part.assignments[&p.id];
            let (nearest, _) = nearest_centroid(&p.features, &part.centroids).unwrap();
            let da = euclidean(&p.features, &part.centroids[assigned]).unwrap();
            let dn = euclidean(&p.features, &part.centroids[nearest]).unwrap();
            assert!(da <= dn + 1e-12);
        }
    }

    #[test]
    fn no_empty_clusters() {
        // many duplicate points force empty-cluster repair paths
        let mut points: Vec<Point> = (0..10).map(|i| pt(i, &[0.0, 0.0])).collect();
        points.push(pt(10, &[5.0, 5.0]));
        points.push(pt(11, &[5.0, 5.0]));
        let part = kmeans_fit(&points, &KMeansConfig::new(3, 1)).unwrap();
        let mut counts = vec![0usize; 3];
        for l in part.assignments.values() {
            counts[*l] += 1;
        }
        assert!(counts.iter().all(|c| *c > 0), "counts: {counts:?}");
    }
}
