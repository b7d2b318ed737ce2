//! Average-linkage agglomerative clustering on cosine distance.
//!
//! Candidate partitions for k in 2..=min(k_max, n) are cut from one
//! dendrogram and scored by silhouette. The best one wins unless its
//! silhouette is not positive (or there are fewer than 3 points), in which
//! case the dendrogram is cut at the distance threshold instead.

use super::{ClusterAssignment, ClusterError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AhcParams {
    pub distance_threshold: f64,
    pub k_max: usize,
    /// Fixed number of clusters; skips silhouette selection.
    pub k_override: Option<usize>,
}

impl Default for AhcParams {
    fn default() -> Self {
        Self {
            distance_threshold: 0.5,
            k_max: 8,
            k_override: None,
        }
    }
}

/// One dendrogram step: clusters `a` and `b` (ids of their smallest member)
/// merged at `distance`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Merge {
    pub a: usize,
    pub b: usize,
    pub distance: f64,
}

fn cosine_distances(embeddings: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = embeddings.len();
    let mut d = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..i {
            let dot: f64 = embeddings[i]
                .iter()
                .zip(&embeddings[j])
                .map(|(a, b)| a * b)
                .sum();
            let v = (1.0 - dot).max(0.0);
            d[i][j] = v;
            d[j][i] = v;
        }
    }
    d
}

/// Full average-linkage dendrogram, `n - 1` merges in order. Closest pair
/// first, ties broken by the smaller (a, b).
pub fn average_linkage(distances: &[Vec<f64>]) -> Vec<Merge> {
    let n = distances.len();
    let mut d: Vec<Vec<f64>> = distances.to_vec();
    let mut size = vec![1usize; n];
    let mut active: Vec<bool> = vec![true; n];
    let mut merges = Vec::with_capacity(n.saturating_sub(1));

    for _ in 1..n {
        let mut best = (usize::MAX, usize::MAX, f64::INFINITY);
        for i in 0..n {
            if !active[i] {
                continue;
            }
            for j in i + 1..n {
                if active[j] && d[i][j] < best.2 {
                    best = (i, j, d[i][j]);
                }
            }
        }
        let (a, b, dist) = best;
        merges.push(Merge {
            a,
            b,
            distance: dist,
        });
        let (sa, sb) = (size[a] as f64, size[b] as f64);
        for k in 0..n {
            if active[k] && k != a && k != b {
                let v = (sa * d[a][k] + sb * d[b][k]) / (sa + sb);
                d[a][k] = v;
                d[k][a] = v;
            }
        }
        size[a] += size[b];
        active[b] = false;
    }
    merges
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Applies the first `steps` merges and returns the labels.
fn cut(n: usize, merges: &[Merge], steps: usize) -> ClusterAssignment {
    let mut parent: Vec<usize> = (0..n).collect();
    for m in &merges[..steps] {
        let ra = find(&mut parent, m.a);
        let rb = find(&mut parent, m.b);
        let (lo, hi) = (ra.min(rb), ra.max(rb));
        parent[hi] = lo;
    }
    let roots: Vec<usize> = (0..n).map(|i| find(&mut parent, i)).collect();
    ClusterAssignment::from_raw(&roots)
}

/// Mean silhouette under a precomputed distance matrix. Points in singleton
/// clusters score 0, as do points where both mean distances are 0.
pub fn silhouette_score(distances: &[Vec<f64>], assignment: &ClusterAssignment) -> f64 {
    let n = assignment.labels.len();
    if n == 0 || assignment.k < 2 {
        return 0.0;
    }
    let clusters = assignment.clusters();
    let total: f64 = (0..n)
        .map(|i| {
            let own = assignment.labels[i];
            if clusters[own].len() < 2 {
                return 0.0;
            }
            let mean_to = |members: &Vec<usize>| -> f64 {
                members.iter().map(|&j| distances[i][j]).sum::<f64>()
            };
            let a = mean_to(&clusters[own]) / (clusters[own].len() - 1) as f64;
            let b = clusters
                .iter()
                .enumerate()
                .filter(|(c, m)| *c != own && !m.is_empty())
                .map(|(_, m)| mean_to(m) / m.len() as f64)
                .fold(f64::INFINITY, f64::min);
            let denom = a.max(b);
            if denom > 0.0 {
                (b - a) / denom
            } else {
                0.0
            }
        })
        .sum();
    total / n as f64
}

pub fn ahc_cluster(embeddings: &[Vec<f64>], params: &AhcParams) -> Result<ClusterAssignment> {
    let n = embeddings.len();
    if n == 0 {
        return Err(ClusterError::Empty);
    }
    let distances = cosine_distances(embeddings);
    let merges = average_linkage(&distances);
    if let Some(k) = params.k_override {
        if k == 0 || k > n {
            return Err(ClusterError::BadK { k, n });
        }
        return Ok(cut(n, &merges, n - k));
    }

    let threshold_cut = || {
        let steps = merges
            .iter()
            .take_while(|m| m.distance <= params.distance_threshold)
            .count();
        cut(n, &merges, steps)
    };
    if n < 3 {
        return Ok(threshold_cut());
    }

    let mut best: Option<(f64, ClusterAssignment)> = None;
    for k in 2..=params.k_max.min(n) {
        let candidate = cut(n, &merges, n - k);
        let score = silhouette_score(&distances, &candidate);
        if best.as_ref().is_none_or(|(s, _)| score > *s) {
            best = Some((score, candidate));
        }
    }
    match best {
        Some((score, assignment)) if score > 0.0 => Ok(assignment),
        _ => Ok(threshold_cut()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(v: &[f64]) -> Vec<f64> {
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter().map(|x| x / n).collect()
    }

    #[test]
    fn two_tight_blocks() {
        let mut pts = Vec::new();
        for i in 0..6 {
            pts.push(unit(&[1.0, 0.05 * i as f64, 0.0]));
        }
        for i in 0..6 {
            pts.push(unit(&[0.0, 0.05 * i as f64, 1.0]));
        }
        let r = ahc_cluster(&pts, &AhcParams::default()).unwrap();
        assert_eq!(r.k, 2);
        assert_eq!(r.labels, [vec![0; 6], vec![1; 6]].concat());
    }

    #[test]
    fn identical_points_form_one_cluster() {
        let pts = vec![unit(&[0.3, 0.4]); 7];
        let r = ahc_cluster(&pts, &AhcParams::default()).unwrap();
        assert_eq!(r.k, 1);
    }

    #[test]
    fn two_points_split_by_threshold() {
        // cos 0.2 -> distance 0.8 > 0.5
        let a = vec![1.0, 0.0];
        let b = vec![0.2, (1.0f64 - 0.04).sqrt()];
        let r = ahc_cluster(&[a.clone(), b], &AhcParams::default()).unwrap();
        assert_eq!(r.k, 2);
        // cos 0.9 -> distance 0.1 merges
        let c = vec![0.9, (1.0f64 - 0.81).sqrt()];
        let r = ahc_cluster(&[a, c], &AhcParams::default()).unwrap();
        assert_eq!(r.k, 1);
    }

    #[test]
    fn linkage_heights_are_monotone() {
        let mut rng = crate::rng::SplitMix64::new(6);
        let pts: Vec<Vec<f64>> = (0..25)
            .map(|_| {
                unit(&[
                    rng.uniform(-1.0, 1.0),
                    rng.uniform(-1.0, 1.0),
                    rng.uniform(-1.0, 1.0),
                ])
            })
            .collect();
        let merges = average_linkage(&cosine_distances(&pts));
        assert_eq!(merges.len(), 24);
        for w in merges.windows(2) {
            assert!(w[1].distance >= w[0].distance - 1e-12);
        }
    }

    #[test]
    fn silhouette_hand_example() {
        // points on a line: 0, 1 | 10, 11
        let xs = [0.0, 1.0, 10.0, 11.0];
        let d: Vec<Vec<f64>> = xs
            .iter()
            .map(|a| xs.iter().map(|b| f64::abs(a - b)).collect())
            .collect();
        let assignment = ClusterAssignment::from_raw(&[0, 0, 1, 1]);
        // point 0: a = 1, b = 10.5 -> 9.5/10.5; point 1: a = 1, b = 9.5 -> 8.5/9.5
        let expected = (9.5 / 10.5 + 8.5 / 9.5) / 2.0;
        assert!((silhouette_score(&d, &assignment) - expected).abs() < 1e-12);
    }
}
