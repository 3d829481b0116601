use aklt_core::hamiltonian::{
    build_chain_hamiltonian, build_residual_hamiltonian, build_subchain_sum, interior_block, literal_phase,
    logical_operators, logical_operators_with_phase,
};
use aklt_core::lattice::{Lattice, QuasiChainSpec, SiteIndex};
use aklt_core::linalg::{embed_dense, eigvalsh, identity, max_norm, re, spectral_projector, DenseOperator, C64};
use aklt_core::reference::reference;
use aklt_core::spectra::{
    block_gap, certify_gap, kernel_dimension, kernel_vectors, knabe_epsilon, GapCertificate, SolverError,
    SolverOptions,
};
use aklt_core::spin_algebra::{spin_operators, HalfInt};
use proptest::prelude::*;

/// Total-spin projector as a Lagrange polynomial in `S1 . S2`.
fn exchange_projector(s1: HalfInt, s2: HalfInt, total: HalfInt) -> DenseOperator {
    let a = spin_operators(s1).unwrap();
    let b = spin_operators(s2).unwrap();
    let x = a.dot(&b);
    let c = |j: f64| (j * (j + 1.0) - s1.value() * (s1.value() + 1.0) - s2.value() * (s2.value() + 1.0)) / 2.0;
    let n = s1.dim() * s2.dim();
    let mut p = identity(n);
    let mut tt = (s1.twice() - s2.twice()).abs();
    while tt <= s1.twice() + s2.twice() {
        if tt != total.twice() {
            let (cj, ck) = (c(total.value()), c(HalfInt::from_twice(tt).value()));
            p = p * (&x - identity(n) * re(ck)) * re(1.0 / (cj - ck));
        }
        tt += 2;
    }
    p
}

fn p3() -> DenseOperator {
    exchange_projector(HalfInt::THREE_HALVES, HalfInt::THREE_HALVES, HalfInt::THREE)
}

fn p2() -> DenseOperator {
    exchange_projector(HalfInt::THREE_HALVES, HalfInt::HALF, HalfInt::TWO)
}

fn lowest_above(vals: &[f64], tol: f64) -> f64 {
    vals.iter().copied().filter(|&v| v >= tol).fold(f64::INFINITY, f64::min)
}

/// Interior block on (A_1, b_1, A_2, b_2).
fn oracle_block() -> DenseOperator {
    let dims = [4, 2, 4, 2];
    embed_dense(&p3(), &[0, 2], &dims)
        + embed_dense(&p2(), &[0, 1], &dims) * re(0.5)
        + embed_dense(&p2(), &[2, 3], &dims) * re(0.5)
}

#[test]
fn block_gap_matches_independent_block() {
    let oracle = lowest_above(&eigvalsh(&oracle_block()), 1e-8);
    let gamma = block_gap(&QuasiChainSpec::spin32(4)).unwrap();
    assert!((gamma - oracle).abs() < 1e-12, "{gamma} vs {oracle}");
    assert!(reference("block_gap_spin32").matches(gamma));
    let built = interior_block(&QuasiChainSpec::spin32(4)).unwrap();
    assert!(max_norm(&(built.op - oracle_block())) < 1e-12);
}

#[test]
fn lanczos_epsilon_matches_dense_oracle_for_n2() {
    let comp = identity(64) - spectral_projector(&oracle_block(), |v| v < 1e-8);
    let dims = [4, 2, 4, 2, 4, 2];
    let h2 = embed_dense(&comp, &[0, 1, 2, 3], &dims) + embed_dense(&comp, &[2, 3, 4, 5], &dims);
    let oracle = lowest_above(&eigvalsh(&h2), 1e-8);
    let opts = SolverOptions { dense_max_dim: 0, ..SolverOptions::default() };
    let eps = knabe_epsilon(&QuasiChainSpec::spin32(4), 2, &opts).unwrap();
    assert!((eps.epsilon - oracle).abs() < 1e-8, "{} vs {oracle}", eps.epsilon);
    let sparse = build_subchain_sum(&QuasiChainSpec::spin32(4), 2, 1).unwrap();
    assert!(max_norm(&(sparse.op.to_dense() - h2)) < 1e-12);
}

#[test]
fn chain_hamiltonian_matches_dense_embedding() {
    for n in 1..=2 {
        let spec = QuasiChainSpec::spin32(n);
        let lat = Lattice::chain(&spec).unwrap();
        let pos = |s: SiteIndex| lat.position(&s).unwrap();
        let mut h = DenseOperator::zeros(lat.hilbert_dim(), lat.hilbert_dim());
        for col in 1..=n {
            h += embed_dense(&p2(), &[pos(SiteIndex::a(0, col)), pos(SiteIndex::pendant(0, col))], &lat.dims);
            if col < n {
                h += embed_dense(&p3(), &[pos(SiteIndex::a(0, col)), pos(SiteIndex::a(0, col + 1))], &lat.dims);
            }
        }
        h += embed_dense(&p2(), &[pos(SiteIndex::a(0, 1)), pos(SiteIndex::left(0))], &lat.dims);
        h += embed_dense(&p2(), &[pos(SiteIndex::a(0, n)), pos(SiteIndex::right(0, n))], &lat.dims);
        let built = build_chain_hamiltonian(&spec, 1.0).unwrap();
        assert!(max_norm(&(built.to_dense() - h)) < 1e-12, "N = {n}");
    }
}

#[test]
fn chain_ground_state_is_unique() {
    for n in 2..=3 {
        let h = build_chain_hamiltonian(&QuasiChainSpec::spin32(n), 1.0).unwrap();
        let k = kernel_dimension(&h, &SolverOptions::default()).unwrap();
        assert_eq!(k.kernel_dim, 1, "N = {n}");
    }
}

#[test]
fn certificate_edge_cases() {
    let spec = QuasiChainSpec::spin32(4);
    let opts = SolverOptions::default();
    assert!(matches!(certify_gap(&spec, 1, 1.0, false, &opts), Err(SolverError::Hamiltonian(_))));
    let c2 = certify_gap(&spec, 2, 1.0, false, &opts).unwrap();
    assert!(!c2.valid, "epsilon(2) = {}", c2.epsilon);
    assert!(c2.delta_e_bound < 0.0);
    let c = GapCertificate::assemble(0.5, 0.75, 4, 2.0, Default::default());
    assert!(c.valid);
    assert!((c.delta_e_bound - 2.0 * 0.5 * (4.0 / 3.0) * 0.5).abs() < 1e-15);
}

#[test]
fn spin2_block_gap_matches_reference() {
    let gamma = block_gap(&QuasiChainSpec::spin2(3)).unwrap();
    assert!(reference("block_gap_spin2").matches(gamma), "{gamma}");
}

fn kernel_matrix(op: &aklt_core::sparse::SparseOperator, kernel: &[Vec<C64>]) -> Vec<Vec<C64>> {
    kernel
        .iter()
        .map(|u| {
            kernel
                .iter()
                .map(|v| u.iter().zip(op.apply(v)).map(|(a, b)| a.conj() * b).sum())
                .collect()
        })
        .collect()
}

#[test]
fn residual_logical_strings_form_a_qubit() {
    let spec = QuasiChainSpec::spin32(3);
    for j in [1, 2] {
        let (_, h) = build_residual_hamiltonian(&spec, j, 1.0).unwrap();
        let opts = SolverOptions::default();
        assert_eq!(kernel_dimension(&h, &opts).unwrap().kernel_dim, 2);
        let (sx, sz) = logical_operators(&spec, j).unwrap();
        assert!(sx.commutator(&h).max_abs() < 1e-10);
        assert!(sz.commutator(&h).max_abs() < 1e-10);
        let kernel = kernel_vectors(&h, &opts).unwrap();
        let anti = sx.matmul(&sz).add(&sz.matmul(&sx));
        for row in kernel_matrix(&anti, &kernel) {
            for x in row {
                assert!(x.norm() < 1e-10);
            }
        }
        // each string squares to one on the kernel
        for op in [&sx, &sz] {
            let m = kernel_matrix(&op.matmul(op), &kernel);
            for (r, row) in m.iter().enumerate() {
                for (c, x) in row.iter().enumerate() {
                    let want = if r == c { 1.0 } else { 0.0 };
                    assert!((x - re(want)).norm() < 1e-10);
                }
            }
        }
    }
}

#[test]
fn literal_phase_string_does_not_commute() {
    let spec = QuasiChainSpec::spin32(3);
    let (_, h) = build_residual_hamiltonian(&spec, 2, 1.0).unwrap();
    let (sx, _) = logical_operators_with_phase(&spec, 2, literal_phase()).unwrap();
    assert!(sx.commutator(&h).max_abs() > 1e-3);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn chain_hamiltonian_is_psd_hermitian_and_conserves_sz(n in 1usize..=2, j in 0.1f64..3.0) {
        let h = build_chain_hamiltonian(&QuasiChainSpec::spin32(n), j).unwrap();
        prop_assert!(h.hermiticity_defect() < 1e-12);
        prop_assert!(h.conserves_charge());
        let vals = eigvalsh(&h.to_dense());
        prop_assert!(vals[0] > -1e-10);
        prop_assert!(vals[0].abs() < 1e-10);
    }
}
