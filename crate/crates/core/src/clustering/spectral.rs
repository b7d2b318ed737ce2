use super::{
    cosine_similarity_matrix, kmeans, normalized_laplacian, symmetric_eigendecomposition,
    ClusterAssignment, ClusterError, KMeansParams, Result,
};

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralParams {
    /// Fixed number of clusters; skips the eigengap estimate.
    pub k_override: Option<usize>,
    pub k_max: usize,
    pub seed: u64,
    pub kmeans: KMeansParams,
}

impl Default for SpectralParams {
    fn default() -> Self {
        Self {
            k_override: None,
            k_max: 8,
            seed: 42,
            kmeans: KMeansParams::default(),
        }
    }
}

/// Index `i` in `1..=min(k_max, n-1)` maximizing `lambda[i] - lambda[i-1]`
/// (1-based: the gap after the i-th smallest eigenvalue). Ties go to the
/// smaller `i`.
pub fn estimate_k_eigengap(eigenvalues: &[f64], k_max: usize) -> usize {
    let n = eigenvalues.len();
    if n < 2 || k_max == 0 {
        return 1;
    }
    let upper = k_max.min(n - 1);
    let mut best_k = 1;
    let mut best_gap = f64::NEG_INFINITY;
    for i in 1..=upper {
        let gap = eigenvalues[i] - eigenvalues[i - 1];
        if gap > best_gap {
            best_gap = gap;
            best_k = i;
        }
    }
    best_k
}

pub fn spectral_cluster(
    embeddings: &[Vec<f64>],
    params: &SpectralParams,
) -> Result<ClusterAssignment> {
    let n = embeddings.len();
    if n == 0 {
        return Err(ClusterError::Empty);
    }
    if n == 1 {
        return Ok(ClusterAssignment {
            labels: vec![0],
            k: 1,
        });
    }

    let affinity = cosine_similarity_matrix(embeddings);
    let laplacian = normalized_laplacian(&affinity);
    let eig = symmetric_eigendecomposition(&laplacian)?;

    let k = match params.k_override {
        Some(k) if k == 0 || k > n => return Err(ClusterError::BadK { k, n }),
        Some(k) => k,
        None => estimate_k_eigengap(&eig.eigenvalues, params.k_max),
    };
    if k == 1 {
        return Ok(ClusterAssignment {
            labels: vec![0; n],
            k: 1,
        });
    }

    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let row: Vec<f64> = (0..k).map(|j| eig.eigenvectors.get(i, j)).collect();
            let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 {
                row.iter().map(|x| x / norm).collect()
            } else {
                row
            }
        })
        .collect();
    Ok(kmeans(&rows, k, params.seed, &params.kmeans)?.assignment)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigengap_examples() {
        assert_eq!(estimate_k_eigengap(&[0.0, 0.0, 0.9, 1.0, 1.1], 8), 2);
        assert_eq!(estimate_k_eigengap(&[0.5; 6], 8), 1);
        assert_eq!(estimate_k_eigengap(&[0.0, 1.0, 1.05, 1.1], 8), 1);
        // cap respected: largest gap lies beyond k_max
        assert_eq!(estimate_k_eigengap(&[0.0, 0.1, 0.2, 0.3, 1.5], 2), 1);
        assert_eq!(estimate_k_eigengap(&[0.0, 0.1, 0.3, 0.35, 1.5], 3), 2);
    }

    #[test]
    fn single_point_and_identical() {
        let one = spectral_cluster(&[vec![1.0, 0.0]], &SpectralParams::default()).unwrap();
        assert_eq!(one.labels, vec![0]);
        let same = vec![vec![0.6, 0.8]; 12];
        let r = spectral_cluster(&same, &SpectralParams::default()).unwrap();
        assert_eq!(r.k, 1);
        assert!(r.labels.iter().all(|&l| l == 0));
    }

    #[test]
    fn override_out_of_range() {
        let pts = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let params = SpectralParams {
            k_override: Some(3),
            ..SpectralParams::default()
        };
        assert_eq!(
            spectral_cluster(&pts, &params),
            Err(ClusterError::BadK { k: 3, n: 2 })
        );
    }
}
