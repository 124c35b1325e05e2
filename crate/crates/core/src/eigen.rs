//! Smallest eigenpair of a real symmetric operator given as a closure.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

#[derive(Clone, Debug)]
pub struct EigenPair {
    pub value: f64,
    pub vector: Vec<f64>,
    /// `‖A v - λ v‖` for the unit vector `v`, recomputed explicitly.
    pub residual: f64,
    pub iterations: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn residual(apply: &impl Fn(&[f64]) -> Vec<f64>, v: &[f64], lambda: f64) -> f64 {
    let av = apply(v);
    av.iter().zip(v).map(|(a, x)| (a - lambda * x).powi(2)).sum::<f64>().sqrt()
}

/// Assembles the matrix column by column and symmetrizes it.
pub fn assemble(apply: &impl Fn(&[f64]) -> Vec<f64>, dim: usize) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(dim, dim);
    let mut e = vec![0.0; dim];
    for j in 0..dim {
        e[j] = 1.0;
        let col = apply(&e);
        for i in 0..dim {
            a[(i, j)] = col[i];
        }
        e[j] = 0.0;
    }
    (&a + a.transpose()) * 0.5
}

pub fn dense_min(apply: &impl Fn(&[f64]) -> Vec<f64>, dim: usize) -> EigenPair {
    let a = assemble(apply, dim);
    let eig = SymmetricEigen::new(a);
    let (k, &value) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("dimension is positive");
    let vector: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
    let residual = residual(apply, &vector, value);
    EigenPair { value, vector, residual, iterations: 1 }
}

/// Restarted Lanczos with full reorthogonalization.
///
/// Each cycle builds a Krylov basis of at most `krylov_dim` vectors from the
/// current Ritz vector; stops once the explicit residual drops below `tol` or
/// after `max_restarts` cycles.
pub fn lanczos_min(
    apply: &impl Fn(&[f64]) -> Vec<f64>,
    start: &[f64],
    krylov_dim: usize,
    max_restarts: usize,
    tol: f64,
) -> EigenPair {
    let dim = start.len();
    let k_max = krylov_dim.clamp(2, dim.max(2)).min(dim);
    let mut q0: Vec<f64> = start.to_vec();
    if norm(&q0) == 0.0 {
        q0 = (0..dim).map(|i| 1.0 + (i as f64 * 0.618).sin()).collect();
    }
    let mut best = EigenPair { value: f64::INFINITY, vector: q0.clone(), residual: f64::INFINITY, iterations: 0 };
    let mut total = 0;
    for _ in 0..max_restarts.max(1) {
        let n0 = norm(&q0);
        let mut basis: Vec<Vec<f64>> = vec![q0.iter().map(|x| x / n0).collect()];
        let mut alpha = Vec::with_capacity(k_max);
        let mut beta: Vec<f64> = Vec::with_capacity(k_max);
        for j in 0..k_max {
            let mut w = apply(&basis[j]);
            total += 1;
            alpha.push(dot(&basis[j], &w));
            // two passes of classical Gram-Schmidt against the whole basis
            for _ in 0..2 {
                for q in &basis {
                    let c = dot(q, &w);
                    for (wi, qi) in w.iter_mut().zip(q) {
                        *wi -= c * qi;
                    }
                }
            }
            let b = norm(&w);
            if j + 1 == k_max || b < 1e-12 * (1.0 + alpha[j].abs()) {
                break;
            }
            beta.push(b);
            basis.push(w.into_iter().map(|x| x / b).collect());
        }
        let m = alpha.len();
        let mut t = DMatrix::zeros(m, m);
        for i in 0..m {
            t[(i, i)] = alpha[i];
            if i + 1 < m {
                t[(i, i + 1)] = beta[i];
                t[(i + 1, i)] = beta[i];
            }
        }
        let eig = SymmetricEigen::new(t);
        let (k, &theta) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .expect("nonempty tridiagonal");
        let s: DVector<f64> = eig.eigenvectors.column(k).into_owned();
        let mut y = vec![0.0; dim];
        for (coef, q) in s.iter().zip(&basis) {
            for (yi, qi) in y.iter_mut().zip(q) {
                *yi += coef * qi;
            }
        }
        let ny = norm(&y);
        for yi in &mut y {
            *yi /= ny;
        }
        let r = residual(apply, &y, theta);
        if r < best.residual || theta < best.value {
            best = EigenPair { value: theta, vector: y.clone(), residual: r, iterations: total };
        }
        if r <= tol {
            break;
        }
        q0 = y;
    }
    best.iterations = total;
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tridiag_laplacian(n: usize) -> impl Fn(&[f64]) -> Vec<f64> {
        move |x: &[f64]| {
            (0..n)
                .map(|i| {
                    let mut y = 2.0 * x[i];
                    if i > 0 {
                        y -= x[i - 1];
                    }
                    if i + 1 < n {
                        y -= x[i + 1];
                    }
                    y
                })
                .collect()
        }
    }

    #[test]
    fn dense_matches_closed_form() {
        let n = 20;
        let pair = dense_min(&tridiag_laplacian(n), n);
        let exact = 2.0 - 2.0 * (std::f64::consts::PI / (n as f64 + 1.0)).cos();
        assert!((pair.value - exact).abs() < 1e-12);
        assert!(pair.residual < 1e-10);
    }

    #[test]
    fn lanczos_matches_dense() {
        let n = 200;
        let op = tridiag_laplacian(n);
        let start: Vec<f64> = (0..n).map(|i| ((i * 7919) % 13) as f64 - 6.0).collect();
        let pair = lanczos_min(&op, &start, 80, 200, 1e-9);
        let exact = 2.0 - 2.0 * (std::f64::consts::PI / (n as f64 + 1.0)).cos();
        assert!((pair.value - exact).abs() < 1e-8, "{} vs {}", pair.value, exact);
        assert!(pair.residual <= 1e-9);
    }

    #[test]
    fn diagonal_operator() {
        let d = [3.0, -1.0, 2.0, 5.0];
        let op = |x: &[f64]| x.iter().zip(&d).map(|(a, b)| a * b).collect::<Vec<_>>();
        assert_eq!(dense_min(&op, 4).value, -1.0);
        let pair = lanczos_min(&op, &[1.0; 4], 10, 5, 1e-12);
        assert!((pair.value + 1.0).abs() < 1e-12);
    }
}
