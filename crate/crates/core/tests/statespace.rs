mod common;

use std::sync::Arc;

use blockade_core::dynamics::{propagate, ScheduleSpec, SweepOptions};
use blockade_core::graphs::*;
use blockade_core::hamiltonians::{ModelKind, ModelSpec};
use blockade_core::spectral::{occupation_profile, StateVector};
use blockade_core::statespace::*;
use proptest::prelude::*;

use common::{brute_independent_sets, path_edges};

#[test]
fn path_dimensions_follow_fibonacci() {
    let dim = |l: usize| build_blockaded_space(&path_graph(l).unwrap(), DEFAULT_SPACE_CAP).unwrap().dim();
    assert_eq!(dim(3), 5);
    assert_eq!(dim(21), 28657);
    for l in 3..=22 {
        assert_eq!(dim(l), dim(l - 1) + dim(l - 2));
    }
}

#[test]
fn blockaded_space_equals_brute_force() {
    let g = build_doublet_chain(7, &ChainGeometry::default()).unwrap();
    let space = build_blockaded_space(&g, DEFAULT_SPACE_CAP).unwrap();
    assert_eq!(space.basis(), &brute_independent_sets(g.vertex_count(), g.edges())[..]);
    let p = build_blockaded_space(&path_graph(3).unwrap(), DEFAULT_SPACE_CAP).unwrap();
    assert_eq!(p.basis(), &[0b000, 0b001, 0b010, 0b100, 0b101]);
}

#[test]
fn index_is_inverse_of_basis_in_both_lookup_modes() {
    let basis = brute_independent_sets(16, &path_edges(16));
    let hashed = ConfigSpace::from_basis_with_threshold(16, basis.clone(), usize::MAX).unwrap();
    let sorted = ConfigSpace::from_basis_with_threshold(16, basis.clone(), 0).unwrap();
    assert!(hashed.uses_hash_index());
    assert!(!sorted.uses_hash_index());
    for (j, &b) in basis.iter().enumerate() {
        assert_eq!(hashed.index_of(b), Some(j));
        assert_eq!(sorted.index_of(b), Some(j));
    }
    for m in [0b11u64, 0b110, 1 << 20] {
        assert_eq!(hashed.index_of(m), None);
        assert_eq!(sorted.index_of(m), None);
    }
}

#[test]
fn unsorted_or_oversized_bases_are_rejected() {
    assert!(ConfigSpace::from_basis(3, vec![2, 1]).is_err());
    assert!(ConfigSpace::from_basis(3, vec![1, 8]).is_err());
}

#[test]
fn basis_dump_round_trips_and_caches() {
    let g = build_doublet_chain(9, &ChainGeometry::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let first = cached_blockaded_space(&g, dir.path(), DEFAULT_SPACE_CAP).unwrap();
    let path = basis_cache_path(dir.path(), &g);
    let bytes = std::fs::read(&path).unwrap();
    assert_eq!(bytes.len(), 8 * first.dim());
    assert_eq!(u64::from_le_bytes(bytes[8..16].try_into().unwrap()), first.state(1));
    let second = cached_blockaded_space(&g, dir.path(), DEFAULT_SPACE_CAP).unwrap();
    assert_eq!(first, second);
    let only_bin: Vec<_> = std::fs::read_dir(dir.path()).unwrap().collect();
    assert_eq!(only_bin.len(), 1);
}

#[test]
fn hamming_distance_between_alternating_patterns() {
    let z2 = (0..11).step_by(2).fold(0u64, |m, s| m | 1 << s);
    let z2bar = (1..11).step_by(2).fold(0u64, |m, s| m | 1 << s);
    assert_eq!(hamming_distance(z2, z2bar), 11);
    assert_eq!(hamming_distance(z2, z2), 0);
    assert_eq!(hamming_distance(0b101, 0b010), 3);
}

#[test]
fn gadget_chains_reduce_to_enhanced_paths() {
    for (q, k) in [(2u32, 2f64.sqrt()), (3, 3f64.sqrt()), (4, 2.0)] {
        let g = build_gadget_chain(7, GadgetKind::new(q).unwrap(), &ChainGeometry::default()).unwrap();
        let chain = reduce_doublets(&g).unwrap();
        assert_eq!(chain.length(), 7);
        for (i, e) in chain.enhancement().iter().enumerate() {
            let expect = if i % 2 == 1 { k } else { 1.0 };
            assert!((e - expect).abs() < 1e-12, "q={q} site {i}");
        }
    }
    let plain = reduce_doublets(&path_graph(6).unwrap()).unwrap();
    assert!(plain.enhancement().iter().all(|&e| e == 1.0));
}

#[test]
fn non_path_quotients_are_rejected() {
    let g = square_grid(3, 3).unwrap();
    assert!(matches!(reduce_doublets(&g), Err(blockade_core::Error::UnrecognizedStructure(_))));
}

#[test]
fn reduced_profile_sums_clique_members() {
    let g = build_doublet_chain(5, &ChainGeometry::default()).unwrap();
    let r = reduce_gadgets(&g).unwrap();
    let full: Vec<f64> = (0..g.vertex_count()).map(|v| v as f64).collect();
    let reduced = r.reduce_profile(&full);
    assert_eq!(reduced.len(), 5);
    assert_eq!(reduced[1], 1.0 + 2.0);
    assert_eq!(r.reduce_config(0b000010), 0b10);
    assert_eq!(r.reduce_config(0b000100), 0b10);
}

/// Population outside the symmetric doublet subspace.
fn antisymmetric_population(state: &StateVector, pairs: &[(usize, usize)]) -> f64 {
    let space = state.space();
    let amps = state.amplitudes();
    let mut total = 0.0;
    for &(a, b) in pairs {
        for (i, &m) in space.basis().iter().enumerate() {
            if m >> a & 1 == 1 {
                let j = space.index_of(m & !(1 << a) | 1 << b).expect("twin configuration exists");
                total += (amps[i] - amps[j]).norm_sqr() / 2.0;
            }
        }
    }
    total
}

#[test]
fn doublet_sweep_matches_reduced_chain() {
    let l = 5;
    let g = build_doublet_chain(l, &ChainGeometry::default()).unwrap();
    let reduced = reduce_gadgets(&g).unwrap();
    let pairs: Vec<(usize, usize)> =
        reduced.sites.iter().filter(|s| s.members.len() == 2).map(|s| (s.members[0], s.members[1])).collect();
    let full_spec = ModelSpec::rydberg(g.clone(), 100.0, 0.0, true);
    let chain_spec = ModelSpec::chain(ModelKind::KPxp, l, 2f64.sqrt());
    let schedule = ScheduleSpec::new(10.0, -6.0, 6.0, 1.0);
    let times = [2.5, 5.0, 7.5, 10.0];
    let opts = SweepOptions::default();
    let full_space = Arc::new(build_blockaded_space(&g, DEFAULT_SPACE_CAP).unwrap());
    let chain_space = chain_spec.family().unwrap().space().clone();
    let full = propagate(&full_spec, &schedule, &StateVector::basis(full_space, 0).unwrap(), &times, &opts).unwrap();
    let chain = propagate(&chain_spec, &schedule, &StateVector::basis(chain_space, 0).unwrap(), &times, &opts).unwrap();
    let full_family = full_spec.family().unwrap();
    let chain_family = chain_spec.family().unwrap();
    for ((t, f), c) in times.iter().zip(&full).zip(&chain) {
        let d = schedule.delta_at(*t);
        let (ef, ec) = (f.energy(&full_family.at(d)), c.energy(&chain_family.at(d)));
        assert!((ef - ec).abs() <= 1e-8 * ec.abs().max(1.0), "t={t}: {ef} vs {ec}");
        let occ_full = reduced.reduce_profile(&occupation_profile(f));
        let occ_chain = occupation_profile(c);
        // The chain is ordered along the path; the reduced graph here is ordered by lowest member, which coincides.
        for (a, b) in occ_full.iter().zip(&occ_chain) {
            assert!((a - b).abs() < 1e-8, "t={t}: {occ_full:?} vs {occ_chain:?}");
        }
        assert!(antisymmetric_population(f, &pairs) < 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn enumeration_matches_brute_force_on_random_graphs(
        n in 1usize..14,
        raw_edges in prop::collection::vec((0usize..14, 0usize..14), 0..30),
    ) {
        let edges: Vec<(usize, usize)> = raw_edges
            .into_iter()
            .filter(|&(a, b)| a < n && b < n && a != b)
            .map(|(a, b)| (a.min(b), a.max(b)))
            .collect();
        let masks: Vec<u64> = (0..n)
            .map(|v| edges.iter().fold(0u64, |m, &(a, b)| if a == v { m | 1 << b } else if b == v { m | 1 << a } else { m }))
            .collect();
        let space = ConfigSpace::independent_sets(&masks, DEFAULT_SPACE_CAP).unwrap();
        let oracle = brute_independent_sets(n, &edges);
        prop_assert_eq!(space.basis(), &oracle[..]);
        for (j, &b) in oracle.iter().enumerate() {
            prop_assert_eq!(space.index_of(b), Some(j));
        }
    }
}
