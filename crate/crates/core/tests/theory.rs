mod common;

use approx::assert_abs_diff_eq;
use blockade_core::theory::*;
use blockade_core::Error;
use common::{brute_independent_sets, dense_evolve, dense_hamiltonian, linspace, path_edges, sorted_eigenvalues};
use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use proptest::prelude::*;

const SQRT2: f64 = std::f64::consts::SQRT_2;

fn amp(site: usize, k: f64) -> f64 {
    if site % 2 == 0 {
        1.0
    } else {
        k
    }
}

/// Second-order effective coupling on the MIS−1 sector, from brute-force sectors and
/// explicit flip matrices between them.
fn oracle_m(l: usize, k: f64) -> (Vec<u64>, DMatrix<f64>) {
    let all = brute_independent_sets(l, &path_edges(l));
    let big_k = (l + 1) / 2;
    let sector = |n: usize| -> Vec<u64> { all.iter().copied().filter(|m| m.count_ones() as usize == n).collect() };
    let (lo, mid, hi) = (sector(big_k - 2), sector(big_k - 1), sector(big_k));
    let flips = |from: &[u64], to: &[u64]| {
        DMatrix::from_fn(to.len(), from.len(), |i, j| {
            let d = to[i] ^ from[j];
            if d.count_ones() == 1 {
                amp(d.trailing_zeros() as usize, k)
            } else {
                0.0
            }
        })
    };
    let down = flips(&mid, &lo);
    let up = flips(&mid, &hi);
    (mid, down.transpose() * down - up.transpose() * up)
}

#[test]
fn meanfield_limits_and_values() {
    let (a, b) = meanfield_energies(11, SQRT2, 3.0, 0.0);
    assert_abs_diff_eq!(a, -18.0, epsilon = 1e-12);
    assert_abs_diff_eq!(b, -15.0, epsilon = 1e-12);
    let (a, b) = meanfield_energies(11, SQRT2, 0.0, 1.0);
    assert_abs_diff_eq!(a, -6.0, epsilon = 1e-12);
    assert_abs_diff_eq!(b, -5.0 * SQRT2, epsilon = 1e-12);

    let d = meanfield_critical_delta(11, SQRT2, 1.0).unwrap();
    assert!((d - 1.278).abs() < 5e-3, "{d}");
    let (a, b) = meanfield_energies(11, SQRT2, d, 1.0);
    assert!((a - b).abs() < 1e-8);

    let d = meanfield_critical_delta(101, SQRT2, 1.0).unwrap();
    assert!((d / (101.0f64 / 2.0).sqrt() - 1.0).abs() < 0.1, "{d}");

    // Scales with Ω.
    let d2 = meanfield_critical_delta(11, SQRT2, 2.5).unwrap();
    assert_abs_diff_eq!(d2, 2.5 * 1.2780, epsilon = 0.02);

    let r = meanfield(11, SQRT2, 1.0, 1.0);
    assert_abs_diff_eq!(r.theta_odd, (-2.0f64).atan2(1.0), epsilon = 1e-12);
    assert_abs_diff_eq!(r.theta_even, (-2.0 * SQRT2).atan2(1.0), epsilon = 1e-12);
    assert!(r.delta_crit.is_some());
}

#[test]
fn meanfield_has_single_crossing_and_rejects_k_one() {
    let grid = linspace(-40.0, 40.0, 4001);
    let diff: Vec<f64> = grid
        .iter()
        .map(|&d| {
            let (a, b) = meanfield_energies(11, SQRT2, d, 1.0);
            a - b
        })
        .collect();
    let changes = diff.windows(2).filter(|w| w[0].signum() != w[1].signum()).count();
    assert_eq!(changes, 1);
    assert!(matches!(meanfield_critical_delta(11, 1.0, 1.0), Err(Error::NoCrossing { .. })));
    assert!(meanfield_critical_delta(10, SQRT2, 1.0).is_err());
    assert!(meanfield_critical_delta(11, SQRT2, 0.0).is_err());
}

#[test]
fn perturbative_energy_matches_dense_ground_state() {
    assert_abs_diff_eq!(perturbative_ground_energy(6, 0.1), -6.06, epsilon = 1e-12);
    let l = 9;
    let eps = 0.05;
    let basis = brute_independent_sets(l, &path_edges(l));
    for k in [1.0, SQRT2] {
        let rabi: Vec<f64> = (0..l).map(|s| eps * amp(s, k)).collect();
        let h = dense_hamiltonian(&basis, &rabi, 1.0, |_| 0.0, &[]);
        let e0 = sorted_eigenvalues(&h)[0];
        let pred = perturbative_ground_energy(5, eps);
        assert!((e0 - pred).abs() < 50.0 * eps.powi(4), "k={k}: {e0} vs {pred}");
    }
}

#[test]
fn perturbation_matrix_matches_oracle() {
    for l in [3, 5, 7, 9, 11] {
        for k in [1.0, SQRT2, 2.0, 6.0] {
            let r = perturbation_matrix(l, k).unwrap();
            let (basis, m) = oracle_m(l, k);
            assert_eq!(r.basis, basis);
            for i in 0..basis.len() {
                for j in 0..basis.len() {
                    assert_abs_diff_eq!(r.matrix[i][j], m[(i, j)], epsilon = 1e-12);
                }
            }
            let eig = SymmetricEigen::new(m);
            let top = eig.eigenvalues.max();
            assert_abs_diff_eq!(r.dominant_eigenvalue, top, epsilon = 1e-9 * top.abs().max(1.0));
        }
    }
}

#[test]
fn perturbation_matrix_structure() {
    let r = perturbation_matrix(5, SQRT2).unwrap();
    assert_eq!(r.dim(), 6);
    assert_eq!(r.mis_size, 3);
    assert_abs_diff_eq!(r.sorted_diagonal[0], 4.0, epsilon = 1e-12);
    let row = &r.matrix[r.z2bar_index];
    assert_eq!(r.basis[r.z2bar_index], 0b01010);
    let off: Vec<f64> =
        row.iter().enumerate().filter(|&(j, &x)| j != r.z2bar_index && x != 0.0).map(|p| *p.1).collect();
    assert_eq!(off.len(), 2);
    assert!(off.iter().all(|&x| (x - SQRT2).abs() < 1e-12));

    for l in [5, 7, 9, 11, 13] {
        let big_k = ((l + 1) / 2) as f64;
        for k in [SQRT2, 2.0, 6.0] {
            let r = perturbation_matrix(l, k).unwrap();
            assert_abs_diff_eq!(r.sorted_diagonal[0], (big_k - 1.0) * k * k, epsilon = 1e-9);
            assert_abs_diff_eq!(r.matrix[r.z2bar_index][r.z2bar_index], (big_k - 1.0) * k * k, epsilon = 1e-9);
            let second = r.sorted_diagonal.iter().copied().find(|&d| d < r.sorted_diagonal[0] - 1e-9).unwrap();
            assert_abs_diff_eq!(second, (big_k - 2.0) * k * k + 1.0, epsilon = 1e-9);
            for i in 0..r.dim() {
                for j in 0..r.dim() {
                    assert_eq!(r.matrix[i][j], r.matrix[j][i]);
                    if i != j {
                        assert!(r.matrix[i][j] >= 0.0);
                    }
                }
            }
        }
    }
    assert!(perturbation_matrix(10, SQRT2).is_err());
    assert!(perturbation_matrix(65, SQRT2).is_err());
    assert_eq!(perturbation_matrix(63, SQRT2).unwrap().dim(), 528);
}

#[test]
fn gershgorin_separation_flips_once() {
    let check = |k: f64| gershgorin_check(&perturbation_matrix(11, k).unwrap()).unwrap();
    assert!(check(6.0).top_two_disjoint);
    assert!(!check(SQRT2).top_two_disjoint);
    let ks: Vec<f64> = (0..=180).map(|i| 1.0 + 0.05 * i as f64).collect();
    let flags: Vec<bool> = ks.iter().map(|&k| check(k).top_two_disjoint).collect();
    let flips: Vec<usize> = (1..flags.len()).filter(|&i| flags[i] != flags[i - 1]).collect();
    assert_eq!(flips.len(), 1);
    let (a, b) = (ks[flips[0] - 1], ks[flips[0]]);
    assert!(a >= 5.0 && b <= 5.4, "{a}..{b}");
    // Top disc: center 5k², radius 2k. Runner-up: center 4k² + 1, radius 3k.
    let root = (5.0 + 29f64.sqrt()) / 2.0;
    assert!(a < root && root <= b);
    let g = check(3.0);
    assert_abs_diff_eq!(g.top.center, 45.0, epsilon = 1e-9);
    assert_abs_diff_eq!(g.top.radius, 6.0, epsilon = 1e-9);
    assert_abs_diff_eq!(g.runner_up.center, 37.0, epsilon = 1e-9);
    assert_abs_diff_eq!(g.runner_up.radius, 9.0, epsilon = 1e-9);
}

#[test]
fn localization_grows_with_k() {
    let overlap = |l: usize, k: f64| localization_overlap(&perturbation_matrix(l, k).unwrap()).unwrap();
    let vals: Vec<f64> = [1.0, 2.0, 4.0, 6.0, 10.0].iter().map(|&k| overlap(11, k)).collect();
    assert!(vals.windows(2).all(|w| w[1] > w[0]), "{vals:?}");
    assert!(vals[0] < vals[4]);
    assert_abs_diff_eq!(vals[4], 0.98005, epsilon = 1e-4);
    assert_abs_diff_eq!(overlap(21, 10.0), 0.98005, epsilon = 1e-4);

    let (_, m) = oracle_m(11, 10.0);
    let eig = SymmetricEigen::new(m);
    let top = eig.eigenvalues.imax();
    let r = perturbation_matrix(11, 10.0).unwrap();
    assert_abs_diff_eq!(eig.eigenvectors[(r.z2bar_index, top)].powi(2), vals[4], epsilon = 1e-9);
}

#[test]
fn localization_rejects_bad_matrices() {
    let mut r = perturbation_matrix(7, 2.0).unwrap();
    let n = r.dim();
    for i in 0..n {
        for j in 0..n {
            if (i < n / 2) != (j < n / 2) {
                r.matrix[i][j] = 0.0;
            }
        }
    }
    assert!(matches!(localization_overlap(&r), Err(Error::Reducible(_))));
    r.matrix[0][0] = -1.0;
    assert!(localization_overlap(&r).is_err());
}

#[test]
fn epsilon_crit_values() {
    assert_abs_diff_eq!(perturbative_epsilon_crit(6, SQRT2).unwrap(), 0.5, epsilon = 1e-12);
    assert!(perturbative_epsilon_crit(6, 1.0).is_err());
    let r = perturbation_matrix(61, SQRT2).unwrap();
    let e = perturbative_epsilon_crit(r.mis_size, SQRT2).unwrap();
    assert_eq!(r.epsilon_crit, Some(e));
    assert_abs_diff_eq!(r.log_gap_prediction.unwrap(), r.length as f64 * e.ln(), epsilon = 1e-12);
    let big = perturbative_epsilon_crit(101, SQRT2).unwrap();
    assert_abs_diff_eq!(big, 1.0 / 99f64.sqrt(), epsilon = 1e-12);
}

#[test]
fn gap_scaling_fit_prefers_true_model() {
    let ls = [5usize, 7, 9, 11, 13, 15];
    let sup: Vec<(usize, f64)> = ls.iter().map(|&l| (l, (-(l as f64) * (l as f64).ln() / 2.0).exp())).collect();
    let fit = gap_scaling_fit(&sup).unwrap();
    assert_abs_diff_eq!(fit.superexponential.slope, -0.5, epsilon = 1e-6);
    assert_abs_diff_eq!(fit.superexponential.r_squared, 1.0, epsilon = 1e-9);
    assert_eq!(fit.preferred, ScalingModel::Superexponential);

    let exp: Vec<(usize, f64)> = ls.iter().map(|&l| (l, 3.0 * (-(l as f64)).exp())).collect();
    let fit = gap_scaling_fit(&exp).unwrap();
    assert_abs_diff_eq!(fit.exponential.slope, -1.0, epsilon = 1e-9);
    assert_abs_diff_eq!(fit.exponential.intercept, 3f64.ln(), epsilon = 1e-9);
    assert_eq!(fit.preferred, ScalingModel::Exponential);

    assert!(matches!(gap_scaling_fit(&sup[..3]), Err(Error::DegenerateFit(_))));
    let mut bad = sup.clone();
    bad[2].1 = 0.0;
    assert!(matches!(gap_scaling_fit(&bad), Err(Error::DegenerateFit(_))));
    assert!(gap_scaling_fit(&[(5, 0.1); 4]).is_err());
}

#[test]
fn dimer_closed_form() {
    let a = dimer_amplitudes(0.0, 1.7, 1.0);
    assert_abs_diff_eq!(a[0].norm(), 0.0, epsilon = 1e-15);
    assert_abs_diff_eq!(a[1].re, 1.0, epsilon = 1e-15);
    assert_abs_diff_eq!(a[2].norm(), 0.0, epsilon = 1e-15);

    assert_abs_diff_eq!(dimer_revival_time(1.0, 1.0).unwrap(), 2.2214, epsilon = 1e-4);
    assert_abs_diff_eq!(dimer_revival_time(SQRT2, 1.0).unwrap(), 1.8138, epsilon = 1e-4);
    assert_abs_diff_eq!(dimer_revival_time(SQRT2, 2.0).unwrap(), 1.8138 / 2.0, epsilon = 1e-4);
    assert!(dimer_revival_time(0.5, 1.0).is_err());
    assert!(dimer_revival_time(1.0, 0.0).is_err());

    assert_abs_diff_eq!(dimer_transfer_fidelity(1.0), 1.0, epsilon = 1e-15);
    assert_abs_diff_eq!(dimer_transfer_fidelity(SQRT2), 8.0 / 9.0, epsilon = 1e-15);
    assert!(dimer_transfer_fidelity(1e4) < 1e-7);
    for k in [1.0, SQRT2, 3.0] {
        let t = dimer_revival_time(k, 1.0).unwrap();
        assert_abs_diff_eq!(dimer_amplitudes(t, k, 1.0)[2].norm_sqr(), dimer_transfer_fidelity(k), epsilon = 1e-12);
    }
}

#[test]
fn dimer_matches_dense_evolution() {
    // basis: gg, gr (site with kΩ excited), rg
    for (k, omega) in [(1.0, 1.0), (SQRT2, 1.0), (2.3, 0.7)] {
        let h = DMatrix::from_row_slice(3, 3, &[0.0, k * omega, omega, k * omega, 0.0, 0.0, omega, 0.0, 0.0]);
        let psi = [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
        for t in linspace(0.0, 6.0, 25) {
            let want = dense_evolve(&h, &psi, t);
            let got = dimer_amplitudes(t, k, omega);
            for i in 0..3 {
                assert!((want[i] - got[i]).norm() < 1e-12, "k={k} t={t}");
            }
        }
    }
}

#[test]
fn report_bundles_results() {
    let r = theory_report(11, SQRT2, 1.0).unwrap();
    assert_eq!(r.perturbation.dim(), 21);
    assert!(!r.gershgorin.top_two_disjoint);
    assert!(r.localization_overlap.unwrap() > 0.0);
    assert_abs_diff_eq!(r.meanfield_delta_crit.unwrap(), 1.278, epsilon = 5e-3);
    let at = r.meanfield_at_crit.unwrap();
    assert!((at.e_z2 - at.e_z2bar).abs() < 1e-8);
    assert_abs_diff_eq!(r.dimer_transfer_fidelity, 8.0 / 9.0, epsilon = 1e-12);
    let json = serde_json::to_value(&r).unwrap();
    assert!(json["perturbation"]["matrix"].is_array());
    assert!(theory_report(11, 1.0, 1.0).unwrap().meanfield_delta_crit.is_none());
}

proptest! {
    #[test]
    fn dimer_stays_normalized(t in 0.0f64..50.0, k in 0.1f64..8.0, omega in 0.1f64..3.0) {
        let n: f64 = dimer_amplitudes(t, k, omega).iter().map(|a| a.norm_sqr()).sum();
        prop_assert!((n - 1.0).abs() < 1e-12);
    }
}
