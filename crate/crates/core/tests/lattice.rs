use std::collections::HashSet;

use aklt_core::lattice::{alternating_pairing, merge_chains, EdgeType, Lattice, QuasiChainSpec, SiteKind};
use proptest::prelude::*;

#[test]
fn two_chain_ladder_inventory() {
    let lat = Lattice::ladder(2).unwrap();
    assert_eq!(lat.count(SiteKind::A), 4);
    assert_eq!(lat.count(SiteKind::B), 2);
    assert_eq!(lat.count(SiteKind::Pendant), 0);
    let boundary = lat.count(SiteKind::BoundaryLeft) + lat.count(SiteKind::BoundaryRight);
    assert_eq!(boundary, 4);
    assert_eq!(lat.edges_of(EdgeType::A).count(), 2);
    assert_eq!(lat.edges_of(EdgeType::U).count(), 2);
    assert_eq!(lat.edges_of(EdgeType::D).count(), 2);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn merging_preserves_sites_and_dimension(n_chains in 2usize..4, n in 1usize..4) {
        let spec = QuasiChainSpec::spin32(n);
        let oct = merge_chains(&spec, n_chains, &alternating_pairing(n_chains, n)).unwrap();
        let lat = Lattice::from_octagonal(&oct).unwrap();
        let unique: HashSet<_> = lat.sites.iter().collect();
        prop_assert_eq!(unique.len(), lat.sites.len());
        prop_assert_eq!(lat.count(SiteKind::B), oct.merge_map.len());
        prop_assert_eq!(lat.count(SiteKind::Pendant) + 2 * lat.count(SiteKind::B), n_chains * n);
        prop_assert_eq!(lat.count(SiteKind::BoundaryLeft) + lat.count(SiteKind::BoundaryRight), 2 * n_chains);
        let one = Lattice::chain(&spec).unwrap().hilbert_dim() as f64;
        prop_assert!((lat.hilbert_dim() as f64 - one.powi(n_chains as i32)).abs() < 0.5);
    }
}
