use aklt_core::hamiltonian::{build_chain_hamiltonian, build_lattice_hamiltonian};
use aklt_core::lattice::{merge_chains, Lattice, QuasiChainSpec, SiteIndex};
use aklt_core::linalg::{identity, re, C64};
use aklt_core::spectra::{full_spectrum, kernel_dimension, kernel_vectors, SolverOptions};
use aklt_core::tensor_net::{build_ground_network, TensorNetwork, STATE_CAP};
use proptest::prelude::*;

fn norm(v: &[C64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

fn overlap_sq(a: &[C64], b: &[C64]) -> f64 {
    let ip: C64 = a.iter().zip(b).map(|(x, y)| x.conj() * y).sum();
    ip.norm_sqr() / (norm(a) * norm(b)).powi(2)
}

fn check_ground_state(lattice: &Lattice) {
    let h = build_lattice_hamiltonian(lattice, 1.0).unwrap();
    let net = build_ground_network(lattice).unwrap();
    let g = net.to_state_vector(STATE_CAP).unwrap();
    assert!(norm(&g) > 1e-6);
    assert!(norm(&h.apply(&g)) / norm(&g) < 1e-9);
    let opts = SolverOptions::default();
    assert_eq!(kernel_dimension(&h, &opts).unwrap().kernel_dim, 1);
    let kernel = kernel_vectors(&h, &opts).unwrap();
    assert!(overlap_sq(&kernel[0], &g) > 1.0 - 1e-10);
    // the double-layer norm agrees with the expanded vector
    assert!((net.norm_sqr() - norm(&g).powi(2)).abs() < 1e-10 * net.norm_sqr());
}

#[test]
fn chain_network_is_the_ground_state() {
    for n in 1..=3 {
        check_ground_state(&Lattice::chain(&QuasiChainSpec::spin32(n)).unwrap());
    }
}

#[test]
fn merged_networks_are_ground_states() {
    check_ground_state(&Lattice::ladder(1).unwrap());
}

#[test]
fn merging_preserves_the_spectrum() {
    let chain = QuasiChainSpec::spin32(1);
    let unmerged = Lattice::from_octagonal(&merge_chains(&chain, 2, &[]).unwrap()).unwrap();
    let merged = Lattice::ladder(1).unwrap();
    let a = full_spectrum(&build_lattice_hamiltonian(&unmerged, 1.0).unwrap(), 4096).unwrap();
    let b = full_spectrum(&build_lattice_hamiltonian(&merged, 1.0).unwrap(), 4096).unwrap();
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() < 1e-9);
    }
    // the unmerged pair is two independent chains
    let single = full_spectrum(&build_chain_hamiltonian(&chain, 1.0).unwrap(), 4096).unwrap();
    let mut sums: Vec<f64> = single.iter().flat_map(|x| single.iter().map(move |y| x + y)).collect();
    sums.sort_by(f64::total_cmp);
    for (x, y) in a.iter().zip(&sums) {
        assert!((x - y).abs() < 1e-9);
    }
}

fn basis_vector(d: usize, k: usize) -> Vec<C64> {
    (0..d).map(|i| if i == k { re(1.0) } else { re(0.0) }).collect()
}

/// Projecting one site onto each basis state partitions the norm.
#[test]
fn bra_contractions_resolve_the_norm() {
    let lattice = Lattice::chain(&QuasiChainSpec::spin32(2)).unwrap();
    let net = build_ground_network(&lattice).unwrap();
    let total = net.norm_sqr();
    for site in [SiteIndex::a(0, 1), SiteIndex::pendant(0, 2), SiteIndex::left(0)] {
        let d = lattice.dim_of(&site).unwrap();
        let parts: f64 = (0..d).map(|k| net.contract_bra(site, &basis_vector(d, k)).unwrap().norm_sqr()).sum();
        assert!((parts - total).abs() < 1e-12 * total);
    }
    let same = net.apply_local(SiteIndex::a(0, 2), &identity(4)).unwrap();
    assert!((same.norm_sqr() - total).abs() < 1e-12 * total);
}

fn contract_amp(net: &TensorNetwork, site: SiteIndex, bra: &[C64]) -> Vec<C64> {
    net.contract_bra(site, bra).unwrap().to_state_vector(STATE_CAP).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    /// `<a u + b v| . |G>` is antilinear in the bra.
    #[test]
    fn bra_contraction_is_antilinear(re_a in -1.0f64..1.0, im_a in -1.0f64..1.0, k in 0usize..4, l in 0usize..4) {
        let lattice = Lattice::chain(&QuasiChainSpec::spin32(1)).unwrap();
        let net = build_ground_network(&lattice).unwrap();
        let site = SiteIndex::a(0, 1);
        let a = C64::new(re_a, im_a);
        let mix: Vec<C64> = (0..4).map(|i| a * basis_vector(4, k)[i] + basis_vector(4, l)[i]).collect();
        let lhs = contract_amp(&net, site, &mix);
        let u = contract_amp(&net, site, &basis_vector(4, k));
        let v = contract_amp(&net, site, &basis_vector(4, l));
        for i in 0..lhs.len() {
            prop_assert!((lhs[i] - (a.conj() * u[i] + v[i])).norm() < 1e-12);
        }
    }
}
