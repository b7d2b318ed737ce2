//! Cyclic Jacobi eigensolver for real symmetric matrices.

use super::{ClusterError, Result, SymMatrix};

pub const MAX_SWEEPS: usize = 100;
const REL_TOL: f64 = 1e-12;

/// Eigenvalues in ascending order with matching orthonormal eigenvectors.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenDecomposition {
    pub eigenvalues: Vec<f64>,
    /// Column `j` (stored row-major, `n x n`) is the eigenvector of `eigenvalues[j]`.
    pub eigenvectors: SymMatrix,
}

impl EigenDecomposition {
    pub fn n(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn vector(&self, j: usize) -> Vec<f64> {
        (0..self.n()).map(|i| self.eigenvectors.get(i, j)).collect()
    }

    /// `V diag(lambda) V^T`.
    pub fn reconstruct(&self) -> SymMatrix {
        let n = self.n();
        let v = &self.eigenvectors;
        let mut out = SymMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                let x: f64 = (0..n)
                    .map(|k| v.get(i, k) * self.eigenvalues[k] * v.get(j, k))
                    .sum();
                out.set(i, j, x);
            }
        }
        out
    }
}

fn max_off_diagonal(a: &[f64], n: usize) -> f64 {
    let mut m: f64 = 0.0;
    for i in 0..n {
        for x in &a[i * n + i + 1..(i + 1) * n] {
            m = m.max(x.abs());
        }
    }
    m
}

/// Sweeps rotations over every `(p, q)` pair until the largest off-diagonal
/// entry is at most `1e-12 * ||A||_F`, giving up after [`MAX_SWEEPS`].
pub fn symmetric_eigendecomposition(input: &SymMatrix) -> Result<EigenDecomposition> {
    let n = input.n;
    for i in 0..n {
        for j in 0..i {
            if input.get(i, j) != input.get(j, i) {
                return Err(ClusterError::NotSymmetric { row: i, col: j });
            }
        }
    }

    let mut a = input.data.clone();
    let mut v = SymMatrix::identity(n).data;
    let tol = REL_TOL * input.frobenius_norm();

    let mut converged = false;
    for _sweep in 0..MAX_SWEEPS {
        if max_off_diagonal(&a, n) <= tol {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq.abs() <= tol {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                for k in 0..n {
                    if k == p || k == q {
                        continue;
                    }
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    let new_kp = c * akp - s * akq;
                    let new_kq = s * akp + c * akq;
                    a[k * n + p] = new_kp;
                    a[p * n + k] = new_kp;
                    a[k * n + q] = new_kq;
                    a[q * n + k] = new_kq;
                }
                a[p * n + p] = app - t * apq;
                a[q * n + q] = aqq + t * apq;
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;

                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    if !converged {
        let residual = max_off_diagonal(&a, n);
        if residual > tol {
            return Err(ClusterError::NoConvergence {
                sweeps: MAX_SWEEPS,
                residual,
            });
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[i * n + i].total_cmp(&a[j * n + j]).then(i.cmp(&j)));
    let eigenvalues = order.iter().map(|&i| a[i * n + i]).collect();
    let mut vectors = SymMatrix::zeros(n);
    for (col, &src) in order.iter().enumerate() {
        for row in 0..n {
            vectors.set(row, col, v[row * n + src]);
        }
    }
    Ok(EigenDecomposition {
        eigenvalues,
        eigenvectors: vectors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    fn random_symmetric(n: usize, rng: &mut SplitMix64) -> SymMatrix {
        let mut m = SymMatrix::zeros(n);
        for i in 0..n {
            for j in 0..=i {
                let x = rng.uniform(-1.0, 1.0);
                m.set(i, j, x);
                m.set(j, i, x);
            }
        }
        m
    }

    /// Number of eigenvalues below `sigma`, from the signs of the LDL^T pivots
    /// of `A - sigma I` (Sylvester inertia).
    fn count_below(a: &SymMatrix, sigma: f64) -> usize {
        let n = a.n;
        let mut m: Vec<f64> = a.data.clone();
        for i in 0..n {
            m[i * n + i] -= sigma;
        }
        let mut negatives = 0;
        for k in 0..n {
            let mut pivot = m[k * n + k];
            if pivot == 0.0 {
                pivot = -1e-300;
            }
            if pivot < 0.0 {
                negatives += 1;
            }
            for i in k + 1..n {
                let f = m[i * n + k] / pivot;
                for j in k + 1..n {
                    m[i * n + j] -= f * m[k * n + j];
                }
            }
        }
        negatives
    }

    fn bisection_eigenvalues(a: &SymMatrix) -> Vec<f64> {
        let bound = a.inf_norm() + 1.0;
        (0..a.n)
            .map(|idx| {
                let (mut lo, mut hi) = (-bound, bound);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if count_below(a, mid) > idx {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                    if hi - lo < 1e-13 {
                        break;
                    }
                }
                0.5 * (lo + hi)
            })
            .collect()
    }

    #[test]
    fn diagonal_matrix() {
        let m = SymMatrix::from_rows(&[
            vec![3.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 2.0],
        ]);
        let eig = symmetric_eigendecomposition(&m).unwrap();
        assert_eq!(eig.eigenvalues, vec![1.0, 2.0, 3.0]);
        assert_eq!(eig.vector(0), vec![0.0, 1.0, 0.0]);
        assert_eq!(eig.vector(1), vec![0.0, 0.0, 1.0]);
        assert_eq!(eig.vector(2), vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn two_by_two_laplacian() {
        let m = SymMatrix::from_rows(&[vec![1.0, -1.0], vec![-1.0, 1.0]]);
        let eig = symmetric_eigendecomposition(&m).unwrap();
        assert!(eig.eigenvalues[0].abs() < 1e-14);
        assert!((eig.eigenvalues[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_asymmetric() {
        let m = SymMatrix::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]]);
        assert!(matches!(
            symmetric_eigendecomposition(&m),
            Err(ClusterError::NotSymmetric { .. })
        ));
    }

    #[test]
    fn empty_and_zero_matrices() {
        let eig = symmetric_eigendecomposition(&SymMatrix::zeros(0)).unwrap();
        assert!(eig.eigenvalues.is_empty());
        let eig = symmetric_eigendecomposition(&SymMatrix::zeros(3)).unwrap();
        assert_eq!(eig.eigenvalues, vec![0.0; 3]);
    }

    #[test]
    fn random_eight_by_eight_reconstructs() {
        let mut rng = SplitMix64::new(8);
        let m = random_symmetric(8, &mut rng);
        let eig = symmetric_eigendecomposition(&m).unwrap();
        let r = eig.reconstruct();
        for (x, y) in r.data.iter().zip(&m.data) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn matches_inertia_bisection_and_residuals() {
        let mut rng = SplitMix64::new(77);
        for trial in 0..40 {
            let n = 1 + trial % 12;
            let m = random_symmetric(n, &mut rng);
            let eig = symmetric_eigendecomposition(&m).unwrap();
            let reference = bisection_eigenvalues(&m);
            for (a, b) in eig.eigenvalues.iter().zip(&reference) {
                assert!((a - b).abs() < 1e-8, "n={n}: {a} vs {b}");
            }
            assert!(eig.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
            let scale = m.inf_norm().max(1.0);
            for j in 0..n {
                let v = eig.vector(j);
                for i in 0..n {
                    let lv: f64 = (0..n).map(|k| m.get(i, k) * v[k]).sum();
                    assert!((lv - eig.eigenvalues[j] * v[i]).abs() <= 1e-8 * scale);
                }
                for k in 0..n {
                    let dot: f64 = (0..n).map(|i| v[i] * eig.eigenvectors.get(i, k)).sum();
                    let expected = if j == k { 1.0 } else { 0.0 };
                    assert!((dot - expected).abs() < 1e-8);
                }
            }
        }
    }
}
