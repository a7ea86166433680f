//! Lowest eigenpairs of real symmetric operators.
//!
//! Small problems are diagonalized densely. Larger ones use a block Davidson
//! iteration with a diagonal preconditioner, which suits the strongly diagonally
//! dominant unconstrained Rydberg models. All wanted pairs are iterated together so
//! nearly degenerate pairs at an avoided crossing are resolved by the projected
//! eigenproblem rather than by separate solves.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonians::LinearOperator;
use crate::linalg::{axpy, dot, norm, scale};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenOptions {
    /// Residual tolerance relative to the operator norm bound.
    pub tol: f64,
    pub max_iterations: usize,
    /// Largest subspace before a restart.
    pub max_subspace: usize,
    /// Problems up to this dimension are diagonalized densely.
    pub dense_cutoff: usize,
    pub seed: u64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions { tol: 1e-10, max_iterations: 2000, max_subspace: 40, dense_cutoff: 300, seed: 7 }
    }
}

#[derive(Debug, Clone)]
pub struct Eigenpair {
    pub value: f64,
    pub vector: Vec<f64>,
    /// `‖Hv − λv‖`.
    pub residual: f64,
}

/// `nev` lowest eigenpairs, ascending, with residual at most `tol·‖H‖`.
pub fn lowest_eigenpairs(h: &dyn LinearOperator, nev: usize, tol: f64) -> Result<Vec<Eigenpair>> {
    lowest_eigenpairs_with(h, nev, &EigenOptions { tol, ..EigenOptions::default() }, &[])
}

/// As [`lowest_eigenpairs`], seeding the iteration with approximate eigenvectors.
pub fn lowest_eigenpairs_with(
    h: &dyn LinearOperator,
    nev: usize,
    opts: &EigenOptions,
    warm: &[Vec<f64>],
) -> Result<Vec<Eigenpair>> {
    let n = h.dim();
    if nev == 0 || nev > n {
        return Err(Error::invalid(format!("cannot compute {nev} eigenpairs of a {n}-dimensional operator")));
    }
    if n <= opts.dense_cutoff || n <= 4 * nev + 8 {
        return Ok(dense_lowest(h, nev));
    }
    davidson(h, nev, opts, warm)
}

/// Full spectrum of a small operator: ascending values and matching eigenvector columns.
pub fn dense_spectrum(h: &dyn LinearOperator) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(h.to_dense());
    let order = ascending(eig.eigenvalues.as_slice());
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(eig.eigenvectors.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

fn ascending(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    order
}

fn dense_lowest(h: &dyn LinearOperator, nev: usize) -> Vec<Eigenpair> {
    let (values, vectors) = dense_spectrum(h);
    let n = h.dim();
    (0..nev)
        .map(|i| {
            let vector: Vec<f64> = vectors.column(i).iter().copied().collect();
            let mut hv = vec![0.0; n];
            h.apply(&vector, &mut hv);
            axpy(-values[i], &vector, &mut hv);
            Eigenpair { value: values[i], vector, residual: norm(&hv) }
        })
        .collect()
}

/// Orthogonalizes `v` against `basis` twice and normalizes; `None` if nothing is left.
fn orthonormalize(v: &mut [f64], basis: &[Vec<f64>]) -> Option<()> {
    let before = norm(v);
    if before == 0.0 || !before.is_finite() {
        return None;
    }
    for _ in 0..2 {
        for b in basis {
            let c = dot(b, v);
            axpy(-c, b, v);
        }
    }
    let after = norm(v);
    if after <= 1e-10 * before {
        return None;
    }
    scale(1.0 / after, v);
    Some(())
}

fn random_vector(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn combine(vectors: &[Vec<f64>], coeffs: impl Iterator<Item = f64>, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for (v, c) in vectors.iter().zip(coeffs) {
        if c != 0.0 {
            axpy(c, v, &mut out);
        }
    }
    out
}

fn davidson(h: &dyn LinearOperator, nev: usize, opts: &EigenOptions, warm: &[Vec<f64>]) -> Result<Vec<Eigenpair>> {
    let n = h.dim();
    let diag = h.diagonal_vec();
    let hnorm = h.norm_bound().max(f64::MIN_POSITIVE);
    let target = opts.tol * hnorm;
    let floor = 1e-4 * hnorm;
    let dmin = diag.iter().copied().fold(f64::INFINITY, f64::min);
    let max_sub = opts.max_subspace.max(3 * nev + 4).min(n);
    let restart_size = (2 * nev + 2).min(max_sub - nev);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);

    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(max_sub);
    let mut images: Vec<Vec<f64>> = Vec::with_capacity(max_sub);
    let mut projected = DMatrix::<f64>::zeros(0, 0);

    let push = |v: Vec<f64>, basis: &mut Vec<Vec<f64>>, images: &mut Vec<Vec<f64>>, projected: &mut DMatrix<f64>| {
        let mut hv = vec![0.0; n];
        h.apply(&v, &mut hv);
        let p = basis.len();
        let mut grown = projected.clone().resize(p + 1, p + 1, 0.0);
        for (i, b) in basis.iter().enumerate() {
            let c = dot(b, &hv);
            grown[(i, p)] = c;
            grown[(p, i)] = c;
        }
        grown[(p, p)] = dot(&v, &hv);
        *projected = grown;
        basis.push(v);
        images.push(hv);
    };

    for w in warm.iter().filter(|w| w.len() == n) {
        let mut v = w.clone();
        let wn = norm(&v);
        if wn == 0.0 {
            continue;
        }
        // A small random admixture reaches symmetry sectors the warm vectors miss.
        let noise = random_vector(&mut rng, n);
        axpy(1e-3 * wn / (n as f64).sqrt(), &noise, &mut v);
        if orthonormalize(&mut v, &basis).is_some() {
            push(v, &mut basis, &mut images, &mut projected);
        }
    }
    while basis.len() < nev + 1 {
        let mut v = random_vector(&mut rng, n);
        if orthonormalize(&mut v, &basis).is_some() {
            push(v, &mut basis, &mut images, &mut projected);
        }
    }

    let mut worst = f64::INFINITY;
    for _ in 0..opts.max_iterations {
        let eig = SymmetricEigen::new(projected.clone());
        let order = ascending(eig.eigenvalues.as_slice());
        let p = basis.len();

        let mut ritz = Vec::with_capacity(nev);
        let mut corrections = Vec::new();
        worst = 0.0f64;
        for &idx in order.iter().take(nev) {
            let theta = eig.eigenvalues[idx];
            let y = eig.eigenvectors.column(idx);
            let u = combine(&basis, y.iter().copied(), n);
            let mut r = combine(&images, y.iter().copied(), n);
            axpy(-theta, &u, &mut r);
            let res = norm(&r);
            worst = worst.max(res);
            if res > target {
                // Shifting no higher than the smallest diagonal keeps the preconditioner
                // positive definite, so corrections never steer toward interior states.
                let sigma = theta.min(dmin);
                for (ri, di) in r.iter_mut().zip(&diag) {
                    *ri /= (di - sigma).max(floor);
                }
                corrections.push(r);
            }
            ritz.push((theta, u, res));
        }
        if corrections.is_empty() {
            return Ok(ritz
                .into_iter()
                .map(|(value, vector, residual)| Eigenpair { value, vector, residual })
                .collect());
        }

        if p + corrections.len() > max_sub {
            let keep = restart_size.max(nev).min(p);
            let cols: Vec<usize> = order.iter().take(keep).copied().collect();
            let new_basis: Vec<Vec<f64>> =
                cols.iter().map(|&c| combine(&basis, eig.eigenvectors.column(c).iter().copied(), n)).collect();
            let new_images: Vec<Vec<f64>> =
                cols.iter().map(|&c| combine(&images, eig.eigenvectors.column(c).iter().copied(), n)).collect();
            projected = DMatrix::from_fn(keep, keep, |i, j| if i == j { eig.eigenvalues[cols[i]] } else { 0.0 });
            basis = new_basis;
            images = new_images;
        }

        let mut added = 0;
        for mut t in corrections {
            if orthonormalize(&mut t, &basis).is_some() {
                push(t, &mut basis, &mut images, &mut projected);
                added += 1;
            }
        }
        if added == 0 {
            let mut v = random_vector(&mut rng, n);
            if orthonormalize(&mut v, &basis).is_some() {
                push(v, &mut basis, &mut images, &mut projected);
            }
        }
    }
    Err(Error::NoConvergence { restarts: opts.max_iterations, residual: worst })
}
