use super::SymMatrix;

/// Cosine affinity between unit-norm rows, negatives clamped to 0 and a zero
/// diagonal.
pub fn cosine_similarity_matrix(embeddings: &[Vec<f64>]) -> SymMatrix {
    let n = embeddings.len();
    let mut s = SymMatrix::zeros(n);
    for i in 0..n {
        for j in 0..i {
            let dot: f64 = embeddings[i]
                .iter()
                .zip(&embeddings[j])
                .map(|(a, b)| a * b)
                .sum();
            let v = dot.clamp(0.0, 1.0);
            s.set(i, j, v);
            s.set(j, i, v);
        }
    }
    s
}

/// `I - D^-1/2 S D^-1/2`; isolated nodes (zero degree) get a unit diagonal.
pub fn normalized_laplacian(s: &SymMatrix) -> SymMatrix {
    let n = s.n;
    let inv_sqrt_deg: Vec<f64> = (0..n)
        .map(|i| {
            let d: f64 = s.row(i).iter().sum();
            if d > 0.0 {
                1.0 / d.sqrt()
            } else {
                0.0
            }
        })
        .collect();
    let mut l = SymMatrix::zeros(n);
    for i in 0..n {
        l.set(i, i, 1.0);
        for j in 0..i {
            let v = -s.get(i, j) * inv_sqrt_deg[i] * inv_sqrt_deg[j];
            l.set(i, j, v);
            l.set(j, i, v);
        }
    }
    l
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clustering::symmetric_eigendecomposition;

    #[test]
    fn cosine_cases() {
        let s = cosine_similarity_matrix(&[vec![1.0, 0.0], vec![1.0, 0.0]]);
        assert_eq!(s.get(0, 1), 1.0);
        assert_eq!(s.get(0, 0), 0.0);
        let s = cosine_similarity_matrix(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert_eq!(s.get(0, 1), 0.0);
        let s = cosine_similarity_matrix(&[vec![1.0, 0.0], vec![-1.0, 0.0]]);
        assert_eq!(s.get(1, 0), 0.0);
        assert!(s.is_symmetric());
    }

    #[test]
    fn isolated_nodes_give_identity() {
        let l = normalized_laplacian(&SymMatrix::zeros(3));
        assert_eq!(l, SymMatrix::identity(3));
    }

    #[test]
    fn two_node_laplacian() {
        let s = SymMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        let l = normalized_laplacian(&s);
        assert_eq!(l, SymMatrix::from_rows(&[vec![1.0, -1.0], vec![-1.0, 1.0]]));
        let eig = symmetric_eigendecomposition(&l).unwrap();
        assert!(eig.eigenvalues[0].abs() < 1e-12);
        assert!((eig.eigenvalues[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn block_diagonal_has_zero_multiplicity_two() {
        let mut s = SymMatrix::zeros(6);
        for block in [0..3, 3..6] {
            for i in block.clone() {
                for j in block.clone() {
                    if i != j {
                        s.set(i, j, 0.8);
                    }
                }
            }
        }
        let eig = symmetric_eigendecomposition(&normalized_laplacian(&s)).unwrap();
        let zeros = eig.eigenvalues.iter().filter(|v| v.abs() < 1e-8).count();
        assert_eq!(zeros, 2);
    }
}
