//! Extremal eigenvalues of a large sparse symmetric matrix.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::sparse::SparseMatrix;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExtremalEigenvalues {
    pub min: f64,
    pub max: f64,
    pub iterations: usize,
}

/// Lanczos with full reorthogonalization, started from a fixed deterministic
/// vector. Ritz values are checked every ten steps; iteration stops once both
/// extremes move by less than `tol` between checks.
pub fn extremal_eigenvalues(h: &SparseMatrix, max_iter: usize, tol: f64) -> ExtremalEigenvalues {
    let n = h.nrows();
    assert_eq!(n, h.ncols());
    if n == 1 {
        let e = h.get(0, 0);
        return ExtremalEigenvalues { min: e, max: e, iterations: 1 };
    }
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + ((i * 7919) % 104729) as f64 / 104729.0).collect();
    normalize(&mut v);
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut alphas = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut prev = (f64::NAN, f64::NAN);
    let limit = max_iter.min(n);
    for it in 0..limit {
        let mut w = h.matvec(&v);
        let alpha = dot(&w, &v);
        alphas.push(alpha);
        basis.push(v.clone());
        for b in &basis {
            let c = dot(&w, b);
            axpy(&mut w, -c, b);
        }
        for b in &basis {
            let c = dot(&w, b);
            axpy(&mut w, -c, b);
        }
        let beta = norm(&w);
        let last = beta < 1e-12 || it + 1 == limit;
        if it % 10 == 9 || last {
            let (lo, hi) = ritz_extremes(&alphas, &betas);
            let converged = (lo - prev.0).abs() < tol && (hi - prev.1).abs() < tol;
            if converged || last {
                return ExtremalEigenvalues { min: lo, max: hi, iterations: it + 1 };
            }
            prev = (lo, hi);
        }
        betas.push(beta);
        v = w.into_iter().map(|x| x / beta).collect();
    }
    unreachable!("loop returns on its last iteration")
}

fn ritz_extremes(alphas: &[f64], betas: &[f64]) -> (f64, f64) {
    let k = alphas.len();
    let t = DMatrix::from_fn(k, k, |i, j| {
        if i == j {
            alphas[i]
        } else if i + 1 == j {
            betas[i]
        } else if j + 1 == i {
            betas[j]
        } else {
            0.0
        }
    });
    let ev = SymmetricEigen::new(t).eigenvalues;
    (ev.min(), ev.max())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn normalize(a: &mut [f64]) {
    let n = norm(a);
    a.iter_mut().for_each(|x| *x /= n);
}

fn axpy(y: &mut [f64], alpha: f64, x: &[f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += alpha * xi);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_matrix_extremes() {
        let n = 200;
        let h = SparseMatrix::from_triplets(n, n, (0..n).map(|i| (i, i, (i as f64 - 50.0) * 0.1)));
        let r = extremal_eigenvalues(&h, 300, 1e-10);
        assert!((r.min + 5.0).abs() < 1e-8);
        assert!((r.max - 14.9).abs() < 1e-8);
    }

    #[test]
    fn path_graph_laplacian() {
        // eigenvalues 2 - 2 cos(pi j / (n + 1))
        let n = 400;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        let h = SparseMatrix::from_triplets(n, n, t);
        let r = extremal_eigenvalues(&h, 400, 1e-12);
        let pi = std::f64::consts::PI;
        assert!((r.max - (2.0 - 2.0 * (pi * n as f64 / (n as f64 + 1.0)).cos())).abs() < 1e-6);
        assert!((r.min - (2.0 - 2.0 * (pi / (n as f64 + 1.0)).cos())).abs() < 1e-6);
    }
}
