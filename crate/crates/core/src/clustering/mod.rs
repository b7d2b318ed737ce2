//! Speaker clustering over subsegment embeddings.
//!
//! Spectral clustering runs cosine affinity -> normalized Laplacian ->
//! Jacobi eigendecomposition -> eigengap estimate of k -> k-means on the
//! row-normalized first k eigenvectors. Agglomerative clustering with
//! average linkage and silhouette-based selection is the baseline.

mod ahc;
mod eigen;
mod kmeans;
mod matrix;
mod similarity;
mod spectral;

use thiserror::Error;

pub use ahc::{ahc_cluster, average_linkage, silhouette_score, AhcParams, Merge};
pub use eigen::{symmetric_eigendecomposition, EigenDecomposition, MAX_SWEEPS};
pub use kmeans::{kmeans, KMeansParams, KMeansResult};
pub use matrix::SymMatrix;
pub use similarity::{cosine_similarity_matrix, normalized_laplacian};
pub use spectral::{estimate_k_eigengap, spectral_cluster, SpectralParams};

#[derive(Debug, Error, PartialEq)]
pub enum ClusterError {
    #[error("Jacobi iteration did not converge after {sweeps} sweeps (largest off-diagonal {residual:e})")]
    NoConvergence { sweeps: usize, residual: f64 },
    #[error("cannot form {k} clusters from {n} points")]
    BadK { k: usize, n: usize },
    #[error("no points to cluster")]
    Empty,
    #[error("matrix is not symmetric at ({row}, {col})")]
    NotSymmetric { row: usize, col: usize },
}

pub type Result<T> = std::result::Result<T, ClusterError>;

/// Which clusterer the pipeline uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Clusterer {
    Spectral,
    Ahc,
}

impl Clusterer {
    pub fn name(self) -> &'static str {
        match self {
            Clusterer::Spectral => "spectral",
            Clusterer::Ahc => "ahc",
        }
    }
}

impl std::str::FromStr for Clusterer {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "spectral" | "sc" => Ok(Clusterer::Spectral),
            "ahc" => Ok(Clusterer::Ahc),
            other => Err(format!(
                "unknown clusterer {other:?} (expected spectral or ahc)"
            )),
        }
    }
}

/// Cluster ids `0..k`, one per point, numbered in order of first appearance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterAssignment {
    pub labels: Vec<usize>,
    pub k: usize,
}

impl ClusterAssignment {
    /// Renumbers arbitrary labels to `0..k` by first appearance.
    pub fn from_raw(raw: &[usize]) -> Self {
        let mut map = std::collections::HashMap::new();
        let labels: Vec<usize> = raw
            .iter()
            .map(|&l| {
                let next = map.len();
                *map.entry(l).or_insert(next)
            })
            .collect();
        Self {
            k: map.len(),
            labels,
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Points grouped by cluster id.
    pub fn clusters(&self) -> Vec<Vec<usize>> {
        let mut groups = vec![Vec::new(); self.k];
        for (i, &l) in self.labels.iter().enumerate() {
            groups[l].push(i);
        }
        groups
    }
}
