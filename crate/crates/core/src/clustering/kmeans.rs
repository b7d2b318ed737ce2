//! k-means with k-means++ seeding and restarts.

use super::{ClusterAssignment, ClusterError, Result};
use crate::rng::SplitMix64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansParams {
    pub restarts: usize,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for KMeansParams {
    fn default() -> Self {
        Self {
            restarts: 10,
            max_iter: 300,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub assignment: ClusterAssignment,
    pub centroids: Vec<Vec<f64>>,
    /// Within-cluster sum of squared distances.
    pub wcss: f64,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Nearest centroid, ties to the smaller index.
fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centroid) in centroids.iter().enumerate() {
        let d = sq_dist(point, centroid);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn plus_plus_init(points: &[Vec<f64>], k: usize, rng: &mut SplitMix64) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut centroids = vec![points[rng.below(n)].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.next_f64() * total;
            let mut acc = 0.0;
            let mut chosen = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                acc += d;
                if acc > target && d > 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng.below(n)
        };
        let c = points[pick].clone();
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, &c));
        }
        centroids.push(c);
    }
    centroids
}

/// One Lloyd run from the given centroids. Returns labels, centroids and the
/// objective after every assignment step.
pub(crate) fn lloyd(
    points: &[Vec<f64>],
    mut centroids: Vec<Vec<f64>>,
    max_iter: usize,
    tol: f64,
) -> (Vec<usize>, Vec<Vec<f64>>, Vec<f64>) {
    let k = centroids.len();
    let dim = points[0].len();
    let mut labels = vec![0usize; points.len()];
    let mut history = Vec::new();

    for _ in 0..max_iter.max(1) {
        let mut dists = vec![0.0; points.len()];
        for (i, p) in points.iter().enumerate() {
            let (c, d) = nearest(p, &centroids);
            labels[i] = c;
            dists[i] = d;
        }
        history.push(dists.iter().sum());

        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &l) in points.iter().zip(&labels) {
            counts[l] += 1;
            for (s, x) in sums[l].iter_mut().zip(p) {
                *s += x;
            }
        }
        let mut moved: f64 = 0.0;
        let mut reseeded = false;
        for c in 0..k {
            let new_centroid = if counts[c] > 0 {
                sums[c].iter().map(|s| s / counts[c] as f64).collect()
            } else {
                // empty cluster: take the point farthest from its centroid
                let far = dists
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
                    .map(|(i, _)| i)
                    .unwrap_or(0);
                dists[far] = 0.0;
                reseeded = true;
                points[far].clone()
            };
            moved = moved.max(sq_dist(&new_centroid, &centroids[c]).sqrt());
            centroids[c] = new_centroid;
        }
        if moved < tol && !reseeded {
            break;
        }
    }
    for (i, p) in points.iter().enumerate() {
        labels[i] = nearest(p, &centroids).0;
    }
    (labels, centroids, history)
}

/// Best of `restarts` k-means++/Lloyd runs by within-cluster sum of squares.
/// All restarts draw from one generator seeded with `seed`.
pub fn kmeans(
    points: &[Vec<f64>],
    k: usize,
    seed: u64,
    params: &KMeansParams,
) -> Result<KMeansResult> {
    let n = points.len();
    if n == 0 {
        return Err(ClusterError::Empty);
    }
    if k == 0 || k > n {
        return Err(ClusterError::BadK { k, n });
    }
    let mut rng = SplitMix64::new(seed);
    let mut best: Option<(Vec<usize>, Vec<Vec<f64>>, f64)> = None;
    for _ in 0..params.restarts.max(1) {
        let init = plus_plus_init(points, k, &mut rng);
        let (labels, centroids, _) = lloyd(points, init, params.max_iter, params.tol);
        let wcss: f64 = points
            .iter()
            .zip(&labels)
            .map(|(p, &l)| sq_dist(p, &centroids[l]))
            .sum();
        if best.as_ref().is_none_or(|b| wcss < b.2) {
            best = Some((labels, centroids, wcss));
        }
    }
    let (labels, centroids, wcss) = best.expect("at least one restart");

    // renumber by first appearance and drop centroids that ended up unused
    let assignment = ClusterAssignment::from_raw(&labels);
    let mut ordered = vec![Vec::new(); assignment.k];
    for (raw, &new) in labels.iter().zip(&assignment.labels) {
        if ordered[new].is_empty() {
            ordered[new] = centroids[*raw].clone();
        }
    }
    Ok(KMeansResult {
        assignment,
        centroids: ordered,
        wcss,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cloud(center: (f64, f64), n: usize, rng: &mut SplitMix64) -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| {
                vec![
                    center.0 + rng.uniform(-0.5, 0.5),
                    center.1 + rng.uniform(-0.5, 0.5),
                ]
            })
            .collect()
    }

    #[test]
    fn single_cluster_centroid_is_mean() {
        let points = vec![vec![0.0, 0.0], vec![2.0, 0.0], vec![1.0, 3.0]];
        let r = kmeans(&points, 1, 0, &KMeansParams::default()).unwrap();
        assert_eq!(r.assignment.labels, vec![0, 0, 0]);
        assert!((r.centroids[0][0] - 1.0).abs() < 1e-12);
        assert!((r.centroids[0][1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn separates_two_clouds() {
        let mut rng = SplitMix64::new(3);
        let mut points = cloud((0.0, 0.0), 15, &mut rng);
        points.extend(cloud((10.0, 10.0), 15, &mut rng));
        let r = kmeans(&points, 2, 9, &KMeansParams::default()).unwrap();
        assert_eq!(r.assignment.k, 2);
        assert!(r.assignment.labels[..15].iter().all(|&l| l == 0));
        assert!(r.assignment.labels[15..].iter().all(|&l| l == 1));
    }

    #[test]
    fn three_points_three_clusters() {
        let points = vec![vec![0.0], vec![5.0], vec![-3.0]];
        let r = kmeans(&points, 3, 1, &KMeansParams::default()).unwrap();
        assert_eq!(r.assignment.k, 3);
        assert_eq!(r.wcss, 0.0);
        assert_eq!(r.assignment.labels, vec![0, 1, 2]);
    }

    #[test]
    fn k_larger_than_n() {
        let points = vec![vec![0.0], vec![1.0]];
        assert_eq!(
            kmeans(&points, 3, 0, &KMeansParams::default()),
            Err(ClusterError::BadK { k: 3, n: 2 })
        );
    }

    #[test]
    fn deterministic_for_seed() {
        let mut rng = SplitMix64::new(12);
        let points: Vec<Vec<f64>> = (0..60)
            .map(|_| vec![rng.uniform(0.0, 1.0), rng.uniform(0.0, 1.0)])
            .collect();
        let a = kmeans(&points, 4, 5, &KMeansParams::default()).unwrap();
        let b = kmeans(&points, 4, 5, &KMeansParams::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn lloyd_objective_never_increases() {
        let mut rng = SplitMix64::new(21);
        for trial in 0..20 {
            let points: Vec<Vec<f64>> = (0..80)
                .map(|_| (0..3).map(|_| rng.uniform(-1.0, 1.0)).collect())
                .collect();
            let k = 2 + trial % 5;
            let init = plus_plus_init(&points, k, &mut rng);
            let (_, _, history) = lloyd(&points, init, 300, 0.0);
            for w in history.windows(2) {
                assert!(w[1] <= w[0] + 1e-12, "{history:?}");
            }
        }
    }
}
