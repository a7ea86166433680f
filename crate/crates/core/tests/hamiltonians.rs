mod common;

use blockade_core::graphs::*;
use blockade_core::hamiltonians::*;
use blockade_core::Error;
use nalgebra::DMatrix;
use proptest::prelude::*;

use common::*;

const SQRT2: f64 = std::f64::consts::SQRT_2;

fn rabi(l: usize, k: f64, omega: f64) -> Vec<f64> {
    (0..l).map(|s| if s % 2 == 0 { omega } else { k * omega }).collect()
}

fn chain_interaction(l: usize, v: f64, cutoff: usize) -> impl Fn(u64) -> f64 {
    let reach = cutoff.max(1);
    move |b| {
        let mut e = 0.0;
        for i in 0..l {
            for j in i + 1..(i + reach + 1).min(l) {
                if b >> i & 1 == 1 && b >> j & 1 == 1 {
                    e += v / ((j - i) as f64).powi(6);
                }
            }
        }
        e
    }
}

fn assert_dense_eq(a: &DMatrix<f64>, b: &DMatrix<f64>, tol: f64) {
    assert_eq!(a.shape(), b.shape());
    let diff = (a - b).abs().max();
    assert!(diff <= tol, "max entry difference {diff}");
}

#[test]
fn k_chain_matches_dense_oracle() {
    for (l, k, cutoff) in [(5usize, SQRT2, 0usize), (7, 1.3, 5), (6, 2.0, 3)] {
        let h = build_k_chain(l, k, 0.7, 1.1, 50.0, cutoff).unwrap();
        let basis: Vec<u64> = (0..1u64 << l).collect();
        let oracle = dense_hamiltonian(&basis, &rabi(l, k, 1.1), 0.7, chain_interaction(l, 50.0, cutoff), &[]);
        assert_dense_eq(&h.to_dense(), &oracle, 1e-12);
    }
}

#[test]
fn k_chain_term_placement() {
    let h = build_k_chain(2, 1.7, 0.0, 1.0, 100.0, 0).unwrap();
    // Basis: 0=gg, 1=rg (site 0 excited), 2=gr (site 1 excited).
    assert_eq!(h.get(0, 2), 1.7);
    assert_eq!(h.get(0, 1), 1.0);
    let h = build_k_chain(5, SQRT2, 1.3, 1.0, 100.0, 0).unwrap();
    assert!((h.get(0b10101, 0b10101) + 3.0 * 1.3).abs() < 1e-12);
    let h = build_k_chain(3, 1.0, 0.0, 1.0, 64.0, 5).unwrap();
    assert!((h.get(0b101, 0b101) - 1.0).abs() < 1e-12);
}

#[test]
fn k_pxp_matches_dense_oracle() {
    for (l, k) in [(5usize, SQRT2), (9, 1.0), (8, 2.5)] {
        let h = build_k_pxp(l, k, -0.4, 0.9).unwrap();
        let basis = brute_independent_sets(l, &path_edges(l));
        assert_eq!(h.dim(), basis.len());
        let oracle = dense_hamiltonian(&basis, &rabi(l, k, 0.9), -0.4, |_| 0.0, &[]);
        assert_dense_eq(&h.to_dense(), &oracle, 1e-12);
    }
    assert_eq!(build_k_pxp(5, SQRT2, 2.0, 1.0).unwrap().dim(), 13);
}

#[test]
fn pxp_spectrum_is_symmetric_at_zero_detuning() {
    let h = build_k_pxp(3, 1.0, 0.0, 1.0).unwrap();
    let ev = sorted_eigenvalues(&h.to_dense());
    for (a, b) in ev.iter().zip(ev.iter().rev()) {
        assert!((a + b).abs() < 1e-12);
    }
}

#[test]
fn spin_exchange_matches_dense_oracle() {
    let (l, phi) = (6usize, 1.7);
    let h = build_spin_exchange(l, SQRT2, 0.3, 1.0, 100.0, phi).unwrap();
    let basis: Vec<u64> = (0..1u64 << l).collect();
    let hops: Vec<_> = (0..l - 1).map(|i| (i, i + 1, -phi)).collect();
    let oracle = dense_hamiltonian(&basis, &rabi(l, SQRT2, 1.0), 0.3, chain_interaction(l, 100.0, 0), &hops);
    assert_dense_eq(&h.to_dense(), &oracle, 1e-12);
    assert_eq!(h.get(0b000001, 0b000010), -phi);
}

/// Chain diagonal written out with 1-based sites and identity projectors off the chain.
fn laplacian_oracle_diag(b: u64, l: usize, phi: f64) -> f64 {
    let n = |i: i64| if i >= 1 && i <= l as i64 { (b >> (i - 1) & 1) as f64 } else { 0.0 };
    let p = |i: i64| 1.0 - n(i);
    let phi_i = |i: i64| if i % 2 == 1 { phi } else { 2.0 * phi };
    let l = l as i64;
    (1..l).map(|i| phi_i(i) * n(i) * p(i + 1) * p(i + 2)).sum::<f64>()
        + (2..=l).map(|i| phi_i(i) * p(i - 2) * p(i - 1) * n(i)).sum::<f64>()
}

#[test]
fn laplacian_matches_dense_oracle() {
    let (l, phi) = (7usize, 2.0);
    let h = build_laplacian(l, 0.5, 1.0, 1000.0, phi).unwrap();
    let basis: Vec<u64> = (0..1u64 << l).collect();
    let hops: Vec<_> = (0..l - 1).map(|i| (i, i + 1, -SQRT2 * phi)).collect();
    let v = chain_interaction(l, 1000.0, 0);
    let oracle =
        dense_hamiltonian(&basis, &rabi(l, SQRT2, 1.0), 0.5, |b| v(b) + laplacian_oracle_diag(b, l, phi), &hops);
    assert_dense_eq(&h.to_dense(), &oracle, 1e-9);
    assert!((h.get(0b011, 0b101) + SQRT2 * phi).abs() < 1e-12);
    // |r g g ...>: only the first sum contributes, with φ_1 = φ.
    assert!((laplacian_diagonal(0b1, l, phi) - phi).abs() < 1e-12);
}

#[test]
fn zero_phi_reduces_to_plain_chain() {
    let base = build_k_chain(7, SQRT2, 0.9, 1.0, 100.0, 0).unwrap().to_dense();
    assert_eq!(build_spin_exchange(7, SQRT2, 0.9, 1.0, 100.0, 0.0).unwrap().to_dense(), base);
    assert_eq!(build_laplacian(7, 0.9, 1.0, 100.0, 0.0).unwrap().to_dense(), base);
}

#[test]
fn rydberg_pair_energies() {
    let two = |d: f64, cutoff: f64| {
        let g = UnitDiskGraph::new(vec![Point::new(0.0, 0.0), Point::new(d, 0.0)], 1.5).unwrap();
        build_rydberg(&g, 0.0, 1.0, 100.0, cutoff, false).unwrap().get(3, 3)
    };
    assert!((two(1.0, 0.0) - 100.0).abs() < 1e-12);
    assert!((two(2.0, 3.0) - 100.0 / 64.0).abs() < 1e-12);
    assert_eq!(two(2.0, 0.0), 0.0);
    let single = UnitDiskGraph::new(vec![Point::new(0.0, 0.0)], 1.0).unwrap();
    let ev = sorted_eigenvalues(&build_rydberg(&single, 0.0, 1.0, 1.0, 0.0, true).unwrap().to_dense());
    assert!((ev[0] + 1.0).abs() < 1e-12 && (ev[1] - 1.0).abs() < 1e-12);
}

#[test]
fn constrained_rydberg_keeps_only_tails_on_independent_sets() {
    let g = build_doublet_chain(5, &ChainGeometry::default()).unwrap();
    let h = build_rydberg(&g, 0.4, 1.0, 100.0, 2.5, true).unwrap();
    let basis = brute_independent_sets(g.vertex_count(), g.edges());
    let pos = g.positions().to_vec();
    let rb = g.blockade_radius();
    let tails = |b: u64| {
        let mut e = 0.0;
        for i in 0..pos.len() {
            for j in i + 1..pos.len() {
                let r = pos[i].distance(&pos[j]);
                if b >> i & 1 == 1 && b >> j & 1 == 1 && r >= rb && r <= 2.5 {
                    e += 100.0 / r.powi(6);
                }
            }
        }
        e
    };
    let oracle = dense_hamiltonian(&basis, &vec![1.0; pos.len()], 0.4, tails, &[]);
    assert_dense_eq(&h.to_dense(), &oracle, 1e-12);
}

#[test]
fn unconstrained_rydberg_size_guard() {
    let g = square_grid(5, 5).unwrap();
    assert!(matches!(build_rydberg(&g, 0.0, 1.0, 1.0, 0.0, false), Err(Error::ResourceLimit { .. })));
}

#[test]
fn strong_interaction_chain_approaches_pxp() {
    let (l, v) = (9usize, 1e4);
    let pxp = sorted_eigenvalues(&build_k_pxp(l, 1.0, 0.5, 1.0).unwrap().to_dense());
    let full = sorted_eigenvalues(&build_k_chain(l, 1.0, 0.5, 1.0, v, 0).unwrap().to_dense());
    for (a, b) in pxp.iter().zip(&full).take(8) {
        assert!((a - b).abs() / a.abs().max(1.0) <= 10.0 / v, "{a} vs {b}");
    }
}

#[test]
fn quench_builders_match_k_pxp_and_grid_counts() {
    assert_eq!(
        build_quench_chain(9, SQRT2, 1.0, 0.0).unwrap().to_dense(),
        build_k_pxp(9, SQRT2, 0.0, 1.0).unwrap().to_dense()
    );
    assert_eq!(build_quench_chain(21, SQRT2, 1.0, 0.0).unwrap().dim(), 28657);
    let grid = build_quench_grid(3, SQRT2, 1.0, 0.0).unwrap();
    assert_eq!(grid.dim(), 63);
    // Site (0,1) is a doublet site, (0,0) a single.
    assert!((grid.get(0, grid.space().index_of(0b10).unwrap()) - SQRT2).abs() < 1e-12);
    assert!((grid.get(0, grid.space().index_of(0b1).unwrap()) - 1.0).abs() < 1e-12);
}

#[test]
fn interpolation_endpoints_and_cancellation() {
    let a = build_k_pxp(7, SQRT2, 1.0, 1.0).unwrap();
    let b = build_k_pxp(7, 1.0, -2.0, 0.5).unwrap();
    assert_eq!(interpolate(&a, &b, 0.0).unwrap().to_dense(), a.to_dense());
    assert_eq!(interpolate(&a, &b, 1.0).unwrap().to_dense(), b.to_dense());
    let mid = interpolate(&a, &b, 0.3).unwrap().to_dense();
    assert_dense_eq(&mid, &(a.to_dense() * 0.7 + b.to_dense() * 0.3), 1e-12);
    let neg = build_k_pxp(7, SQRT2, -1.0, -1.0).unwrap();
    assert_eq!(interpolate(&a, &neg, 0.5).unwrap().to_dense().abs().max(), 0.0);
    let other = build_k_pxp(5, 1.0, 0.0, 1.0).unwrap();
    assert!(matches!(interpolate(&a, &other, 0.5), Err(Error::SpaceMismatch)));
}

#[test]
fn detuning_family_matches_direct_build() {
    let spec = ModelSpec::chain(ModelKind::KChain, 7, SQRT2).with_v(100.0).with_tails(5.0);
    let fam = spec.family().unwrap();
    let direct = build_k_chain(7, SQRT2, 2.3, 1.0, 100.0, 5).unwrap();
    assert_dense_eq(&fam.at(2.3).to_dense(), &direct.to_dense(), 1e-12);
    assert_dense_eq(&fam.operator_at(2.3).to_dense(), &direct.to_dense(), 1e-12);
}

#[test]
fn model_spec_json_and_validation() {
    let spec: ModelSpec =
        serde_json::from_str(r#"{"kind":"k_chain","L":9,"k":1.4142,"V":100,"tail_cutoff":5}"#).unwrap();
    assert_eq!(spec.site_count().unwrap(), 9);
    assert_eq!(spec.omega, 1.0);
    assert!(serde_json::from_str::<ModelSpec>(r#"{"kind":"k_chain","L":9,"bogus":1}"#).is_err());
    assert!(ModelSpec::chain(ModelKind::KPxp, 9, 1.0).with_v(-1.0).validate().is_ok());
    assert!(ModelSpec::chain(ModelKind::KChain, 9, 1.0).with_v(-1.0).validate().is_err());
    assert!(ModelSpec::chain(ModelKind::KChain, 9, 0.0).validate().is_err());
    assert!(ModelSpec::new(ModelKind::KChain).validate().is_err());
    let z = ModelSpec::chain(ModelKind::KPxp, 5, 1.0);
    assert_eq!(z.z2_mask().unwrap(), 0b10101);
    assert_eq!(z.z2bar_mask().unwrap(), 0b01010);
}

fn spectrum_is_omega_even(h_pos: &DMatrix<f64>, h_neg: &DMatrix<f64>) -> bool {
    sorted_eigenvalues(h_pos).iter().zip(sorted_eigenvalues(h_neg)).all(|(a, b)| (a - b).abs() < 1e-9)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn builders_are_symmetric_and_even_in_omega(
        l in 3usize..8,
        k in 1.0f64..3.0,
        delta in -3.0f64..3.0,
        omega in 0.2f64..2.0,
        phi in 0.0f64..3.0,
    ) {
        let pairs = [
            (build_k_chain(l, k, delta, omega, 50.0, 5).unwrap(), build_k_chain(l, k, delta, -omega, 50.0, 5).unwrap()),
            (build_k_pxp(l, k, delta, omega).unwrap(), build_k_pxp(l, k, delta, -omega).unwrap()),
            (build_spin_exchange(l, k, delta, omega, 50.0, phi).unwrap(), build_spin_exchange(l, k, delta, -omega, 50.0, phi).unwrap()),
            (build_laplacian(l, delta, omega, 50.0, phi).unwrap(), build_laplacian(l, delta, -omega, 50.0, phi).unwrap()),
        ];
        for (p, n) in &pairs {
            let d = p.to_dense();
            prop_assert_eq!(&d, &d.transpose());
            prop_assert!(d.iter().all(|x| x.is_finite()));
            prop_assert!(spectrum_is_omega_even(&d, &n.to_dense()));
        }
    }
}
