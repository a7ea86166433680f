//! Krylov approximation of `exp(-iHτ)ψ` for real symmetric `H`.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonians::LinearOperator;
use crate::linalg::{caxpy, cdot, cnorm};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KrylovOptions {
    /// Local error tolerance per step, in state norm.
    pub tol: f64,
    /// Largest Krylov dimension.
    pub max_dim: usize,
}

impl Default for KrylovOptions {
    fn default() -> Self {
        KrylovOptions { tol: 1e-10, max_dim: 40 }
    }
}

/// Lanczos basis of one starting vector together with the spectral decomposition of
/// the projected tridiagonal matrix.
pub(crate) struct KrylovBasis {
    vectors: Vec<Vec<Complex64>>,
    evals: Vec<f64>,
    evecs: DMatrix<f64>,
    /// Coupling to the first vector outside the basis (zero on breakdown).
    beta_next: f64,
    scale: f64,
}

impl KrylovBasis {
    /// Builds up to `max_dim` vectors; when `tau` is given, stops as soon as the
    /// error estimate for that step is below `tol`.
    pub(crate) fn build(
        h: &dyn LinearOperator,
        psi: &[Complex64],
        max_dim: usize,
        stop_at: Option<(f64, f64)>,
    ) -> Result<Self> {
        let n = psi.len();
        let scale = cnorm(psi);
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::Integration(format!("cannot propagate a state of norm {scale}")));
        }
        let max_dim = max_dim.clamp(1, n);
        let breakdown = 1e-12 * h.norm_bound().max(1e-300);
        let mut vectors: Vec<Vec<Complex64>> = vec![psi.iter().map(|a| a / scale).collect()];
        let mut alpha: Vec<f64> = Vec::new();
        let mut beta: Vec<f64> = Vec::new();
        let mut w = vec![Complex64::new(0.0, 0.0); n];
        loop {
            let j = vectors.len() - 1;
            h.apply_complex(&vectors[j], &mut w);
            let a = cdot(&vectors[j], &w).re;
            alpha.push(a);
            caxpy(Complex64::new(-a, 0.0), &vectors[j], &mut w);
            if j > 0 {
                caxpy(Complex64::new(-beta[j - 1], 0.0), &vectors[j - 1], &mut w);
            }
            for v in &vectors {
                let c = cdot(v, &w);
                caxpy(-c, v, &mut w);
            }
            let b = cnorm(&w);
            let done = vectors.len() == max_dim || b < breakdown;
            let basis = if done || stop_at.is_some() {
                let (evals, evecs) = tridiagonal_eigen(&alpha, &beta);
                let candidate = KrylovBasis {
                    vectors: Vec::new(),
                    evals,
                    evecs,
                    beta_next: if b < breakdown { 0.0 } else { b },
                    scale,
                };
                let ok = stop_at.is_some_and(|(tau, tol)| candidate.error(tau) <= tol);
                (done || ok).then_some(candidate)
            } else {
                None
            };
            if let Some(mut basis) = basis {
                basis.vectors = vectors;
                return Ok(basis);
            }
            beta.push(b);
            vectors.push(w.iter().map(|x| x / b).collect());
        }
    }

    pub(crate) fn dim(&self) -> usize {
        self.evals.len()
    }

    /// Coefficients of `exp(-iHτ)ψ` in the Lanczos basis.
    pub(crate) fn coefficients(&self, tau: f64) -> Vec<Complex64> {
        let m = self.dim();
        let mut out = vec![Complex64::new(0.0, 0.0); m];
        for k in 0..m {
            let w = self.evecs[(0, k)] * self.scale;
            let phase = Complex64::from_polar(w, -self.evals[k] * tau);
            for (i, o) in out.iter_mut().enumerate() {
                *o += phase * self.evecs[(i, k)];
            }
        }
        out
    }

    /// A posteriori error estimate of the step `τ`.
    pub(crate) fn error(&self, tau: f64) -> f64 {
        if self.beta_next == 0.0 {
            return 0.0;
        }
        let last = self.dim() - 1;
        let c: Complex64 = (0..self.dim())
            .map(|k| Complex64::from_polar(self.evecs[(0, k)] * self.evecs[(last, k)], -self.evals[k] * tau))
            .sum();
        self.beta_next * c.norm() * self.scale
    }

    /// Largest `τ ≤ limit` whose error estimate is within `tol`, found by bisection.
    pub(crate) fn max_step(&self, limit: f64, tol: f64) -> f64 {
        if self.error(limit) <= tol {
            return limit;
        }
        let (mut lo, mut hi) = (0.0, limit);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if self.error(mid) <= tol {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }

    pub(crate) fn state(&self, coeffs: &[Complex64]) -> Vec<Complex64> {
        let n = self.vectors[0].len();
        let mut out = vec![Complex64::new(0.0, 0.0); n];
        for (v, &c) in self.vectors.iter().zip(coeffs) {
            caxpy(c, v, &mut out);
        }
        out
    }

    /// Amplitude of the evolved state on basis index `idx`.
    pub(crate) fn amplitude(&self, coeffs: &[Complex64], idx: usize) -> Complex64 {
        self.vectors.iter().zip(coeffs).map(|(v, c)| v[idx] * c).sum()
    }

    /// `V† D V` for a real diagonal `D`, used for expectation values without rebuilding states.
    pub(crate) fn projected_diagonal(&self, d: &[f64]) -> DMatrix<Complex64> {
        let m = self.vectors.len();
        let mut g = DMatrix::from_element(m, m, Complex64::new(0.0, 0.0));
        for i in 0..m {
            for j in i..m {
                let s: Complex64 =
                    self.vectors[i].iter().zip(&self.vectors[j]).zip(d).map(|((a, b), w)| a.conj() * b * *w).sum();
                g[(i, j)] = s;
                g[(j, i)] = s.conj();
            }
        }
        g
    }
}

fn tridiagonal_eigen(alpha: &[f64], beta: &[f64]) -> (Vec<f64>, DMatrix<f64>) {
    let m = alpha.len();
    let t = DMatrix::from_fn(m, m, |i, j| {
        if i == j {
            alpha[i]
        } else if i + 1 == j {
            beta[i]
        } else if j + 1 == i {
            beta[j]
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(t);
    (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
}

/// Statistics of one propagation call.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepStats {
    pub substeps: usize,
    pub matvecs: usize,
    pub error_estimate: f64,
}

/// Replaces `psi` by `exp(-iHτ)psi`, splitting `τ` whenever the Krylov space of
/// `opts.max_dim` vectors cannot meet the tolerance.
pub fn krylov_step(
    h: &dyn LinearOperator,
    psi: &mut Vec<Complex64>,
    tau: f64,
    opts: &KrylovOptions,
) -> Result<StepStats> {
    let mut stats = StepStats::default();
    let mut remaining = tau;
    while remaining.abs() > 0.0 {
        let basis = KrylovBasis::build(h, psi, opts.max_dim, Some((remaining, opts.tol)))?;
        stats.matvecs += basis.dim();
        let step = remaining.signum() * basis.max_step(remaining.abs(), opts.tol);
        if step == 0.0 || stats.substeps > 1_000_000 {
            return Err(Error::Integration(format!(
                "tolerance {:.1e} unreachable with {} Krylov vectors (remaining step {remaining:.3e})",
                opts.tol, opts.max_dim
            )));
        }
        stats.error_estimate += basis.error(step.abs());
        *psi = basis.state(&basis.coefficients(step.abs() * remaining.signum()));
        stats.substeps += 1;
        remaining -= step;
        if remaining.abs() < 1e-15 * tau.abs() {
            break;
        }
    }
    Ok(stats)
}
