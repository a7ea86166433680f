//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

/// All independent sets of a graph on `n <= 24` vertices by checking every subset.
pub fn brute_independent_sets(n: usize, edges: &[(usize, usize)]) -> Vec<u64> {
    (0u64..1 << n).filter(|&m| edges.iter().all(|&(a, b)| !(m >> a & 1 == 1 && m >> b & 1 == 1))).collect()
}

pub fn path_edges(n: usize) -> Vec<(usize, usize)> {
    (1..n).map(|i| (i - 1, i)).collect()
}

/// Dense Hamiltonian on an explicit basis: `-δ·popcount + extra(b)` on the diagonal,
/// `rabi[s]` between configurations differing in site `s`, and `amp` for moving one
/// excitation between the sites of each `hops` entry.
pub fn dense_hamiltonian(
    basis: &[u64],
    rabi: &[f64],
    delta: f64,
    extra: impl Fn(u64) -> f64,
    hops: &[(usize, usize, f64)],
) -> DMatrix<f64> {
    let n = basis.len();
    let pos = |m: u64| basis.iter().position(|&b| b == m);
    let mut h = DMatrix::zeros(n, n);
    for (i, &b) in basis.iter().enumerate() {
        h[(i, i)] = -delta * b.count_ones() as f64 + extra(b);
        for (s, &w) in rabi.iter().enumerate() {
            if let Some(j) = pos(b ^ 1 << s) {
                h[(i, j)] += w;
            }
        }
        for &(a, c, amp) in hops {
            let (na, nc) = (b >> a & 1, b >> c & 1);
            if na != nc {
                if let Some(j) = pos(b ^ (1 << a) ^ (1 << c)) {
                    h[(i, j)] += amp;
                }
            }
        }
    }
    h
}

pub fn sorted_eigenvalues(h: &DMatrix<f64>) -> Vec<f64> {
    let mut v: Vec<f64> = SymmetricEigen::new(h.clone()).eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

/// `exp(-iHt)ψ` through the full eigendecomposition.
pub fn dense_evolve(h: &DMatrix<f64>, psi: &[Complex64], t: f64) -> Vec<Complex64> {
    let eig = SymmetricEigen::new(h.clone());
    let u = eig.eigenvectors.map(|x| Complex64::new(x, 0.0));
    let p = DVector::from_column_slice(psi);
    let mut c = u.adjoint() * p;
    for (k, ck) in c.iter_mut().enumerate() {
        *ck *= Complex64::from_polar(1.0, -eig.eigenvalues[k] * t);
    }
    (u * c).iter().copied().collect()
}

pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}
