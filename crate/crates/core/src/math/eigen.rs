//! Symmetric eigensolver via cyclic Jacobi rotations.
//!
//! Eigenvalues only; the spectral analyses in this crate never need the
//! eigenvectors. Convergence: off-diagonal Frobenius norm below
//! `1e-12 * ||A||_F`, at most 64 sweeps.

use crate::error::{Error, Result};
use crate::math::tensor::Tensor;

const MAX_SWEEPS: usize = 64;
const CONVERGENCE_REL: f64 = 1e-12;
const SYMMETRY_REL: f64 = 1e-12;
pub const MAX_SIDE: usize = 2048;

/// All eigenvalues of a symmetric matrix, sorted descending.
///
/// The input must be square, of side <= 2048, and symmetric within
/// `1e-12 * ||A||_F` elementwise.
pub fn sym_eigenvalues(matrix: &Tensor) -> Result<Vec<f64>> {
    if matrix.shape().len() != 2 || matrix.rows() != matrix.cols() {
        return Err(Error::InvalidInput(format!(
            "expected square matrix, got shape {:?}",
            matrix.shape()
        )));
    }
    let n = matrix.rows();
    if n > MAX_SIDE {
        return Err(Error::InvalidInput(format!(
            "matrix side {n} exceeds limit {MAX_SIDE}"
        )));
    }
    let fro = matrix.frobenius_sq().sqrt();
    let tol_sym = SYMMETRY_REL * fro.max(1.0);
    for i in 0..n {
        for j in (i + 1)..n {
            if (matrix.at2(i, j) - matrix.at2(j, i)).abs() > tol_sym {
                return Err(Error::InvalidInput(format!(
                    "matrix not symmetric at ({i},{j})"
                )));
            }
        }
    }

    let mut a: Vec<f64> = matrix.data().to_vec();
    jacobi_in_place(&mut a, n, fro);

    let mut eig: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
    eig.sort_by(|x, y| y.partial_cmp(x).expect("non-finite eigenvalue"));
    Ok(eig)
}

fn off_diag_sq(a: &[f64], n: usize) -> f64 {
    let mut s = 0.0;
    for p in 0..n {
        for q in (p + 1)..n {
            let v = a[p * n + q];
            s += 2.0 * v * v;
        }
    }
    s
}

fn jacobi_in_place(a: &mut [f64], n: usize, fro: f64) {
    if n < 2 {
        return;
    }
    let threshold_sq = (CONVERGENCE_REL * fro) * (CONVERGENCE_REL * fro);
    for _ in 0..MAX_SWEEPS {
        if off_diag_sq(a, n) <= threshold_sq {
            return;
        }
        for p in 0..n - 1 {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let diff = aqq - app;
                // Stable rotation angle per Numerical Recipes.
                let t = if diff.abs() < 1e-300 {
                    1.0f64.copysign(apq)
                } else {
                    let theta = 0.5 * diff / apq;
                    let mut t = 1.0 / (theta.abs() + (1.0 + theta * theta).sqrt());
                    if theta < 0.0 {
                        t = -t;
                    }
                    t
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                let tau = s / (1.0 + c);
                let h = t * apq;

                a[p * n + p] = app - h;
                a[q * n + q] = aqq + h;
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                for i in 0..n {
                    if i == p || i == q {
                        continue;
                    }
                    let aip = a[i * n + p];
                    let aiq = a[i * n + q];
                    let new_ip = aip - s * (aiq + tau * aip);
                    let new_iq = aiq + s * (aip - tau * aiq);
                    a[i * n + p] = new_ip;
                    a[p * n + i] = new_ip;
                    a[i * n + q] = new_iq;
                    a[q * n + i] = new_iq;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::rng::RandomStream;

    fn tensor_sym(n: usize, f: impl Fn(usize, usize) -> f64) -> Tensor {
        let mut t = Tensor::zeros(&[n, n]);
        for i in 0..n {
            for j in 0..n {
                t.set2(i, j, f(i, j));
            }
        }
        t
    }

    #[test]
    fn identity_spectrum() {
        let t = tensor_sym(3, |i, j| if i == j { 1.0 } else { 0.0 });
        assert_eq!(sym_eigenvalues(&t).unwrap(), vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn diagonal_sorted_descending() {
        let d = [1.0, 2.0, 3.0];
        let t = tensor_sym(3, |i, j| if i == j { d[i] } else { 0.0 });
        assert_eq!(sym_eigenvalues(&t).unwrap(), vec![3.0, 2.0, 1.0]);
    }

    #[test]
    fn two_by_two_exact() {
        // [[2,1],[1,2]] has eigenvalues 3 and 1.
        let t = Tensor::from_vec(&[2, 2], vec![2.0, 1.0, 1.0, 2.0]).unwrap();
        let e = sym_eigenvalues(&t).unwrap();
        assert!((e[0] - 3.0).abs() < 1e-12);
        assert!((e[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_asymmetric() {
        let t = Tensor::from_vec(&[2, 2], vec![1.0, 2.0, 0.5, 1.0]).unwrap();
        assert!(sym_eigenvalues(&t).is_err());
    }

    #[test]
    fn rejects_non_square() {
        let t = Tensor::zeros(&[2, 3]);
        assert!(sym_eigenvalues(&t).is_err());
    }

    #[test]
    fn trace_matches_eigen_sum_random() {
        for (seed, n) in [(1u64, 16usize), (2, 64), (3, 128), (4, 256)] {
            let mut r = RandomStream::new(seed);
            let mut t = Tensor::zeros(&[n, n]);
            for i in 0..n {
                for j in i..n {
                    let v = r.normal();
                    t.set2(i, j, v);
                    t.set2(j, i, v);
                }
            }
            let trace: f64 = (0..n).map(|i| t.at2(i, i)).sum();
            let eig = sym_eigenvalues(&t).unwrap();
            let sum: f64 = eig.iter().sum();
            let scale = trace.abs().max(eig.iter().map(|e| e.abs()).sum());
            assert!(
                (sum - trace).abs() <= 1e-9 * scale.max(1.0),
                "n={n} trace={trace} sum={sum}"
            );
        }
    }

    #[test]
    fn gram_matrices_nonnegative() {
        let mut r = RandomStream::new(11);
        let (m, n) = (20usize, 12usize);
        let w: Vec<f64> = (0..m * n).map(|_| r.normal()).collect();
        let mut g = Tensor::zeros(&[n, n]);
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for row in 0..m {
                    s += w[row * n + i] * w[row * n + j];
                }
                g.set2(i, j, s);
            }
        }
        let eig = sym_eigenvalues(&g).unwrap();
        for e in eig {
            assert!(e >= -1e-10, "negative Gram eigenvalue {e}");
        }
    }
}
