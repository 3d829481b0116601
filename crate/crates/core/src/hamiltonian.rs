//! Chain, block, projective, sub-chain, merged 2D and residual Hamiltonians,
//! and the logical string operators of the residual chain.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::lattice::{EdgeType, Lattice, LatticeError, OctagonalSpec, QuasiChainSpec, SiteIndex, SiteKind};
use crate::linalg::{c, eigh, identity, kron, re, DenseOperator, C64, ZERO};
use crate::sparse::{ChargeLayout, LocalTerm, SectorLabels, SparseOperator};
use crate::spin_algebra::{merging_unitary, total_spin_projector, HalfInt, SpinError};

/// Eigenvalues below this are counted as kernel.
pub const KERNEL_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum HamiltonianError {
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Spin(#[from] SpinError),
    #[error("block index {index} out of range 0..={max}")]
    BlockOutOfRange { index: usize, max: usize },
    #[error("sub-chain length n = {0} must be at least 2")]
    SubchainTooShort(usize),
    #[error("residual chain needs 1 <= j < N, got j = {j}, N = {n}")]
    ResidualOutOfRange { j: usize, n: usize },
    #[error("operator couples charge sectors: {0}")]
    ChargeLeak(String),
}

/// Swap the two tensor factors of an operator on `d1 (x) d2`.
pub fn swap_factors(op: &DenseOperator, d1: usize, d2: usize) -> DenseOperator {
    let n = d1 * d2;
    DMatrix::from_fn(n, n, |r, col| {
        let (r1, r2) = (r / d1, r % d1);
        let (c1, c2) = (col / d1, col % d1);
        op[(r2 * d2 + r1, c2 * d2 + c1)]
    })
}

/// Projector onto maximal total spin of two A sites.
pub fn bond_projector(spec: &QuasiChainSpec) -> Result<DenseOperator, SpinError> {
    total_spin_projector(spec.spin_a, spec.spin_a, spec.bond_projector_spin)
}

/// Projector on (A, b) onto maximal total spin.
pub fn pendant_projector(spec: &QuasiChainSpec) -> Result<DenseOperator, SpinError> {
    total_spin_projector(spec.spin_a, HalfInt::HALF, spec.pendant_projector_spin)
}

/// `Pi^u = (I_A (x) U)(P_{A,b} (x) I)(I_A (x) U^dagger)` on (A, B).
pub fn pi_up(spec: &QuasiChainSpec) -> Result<DenseOperator, SpinError> {
    let p = pendant_projector(spec)?;
    let da = spec.a_dim();
    let w = kron(&identity(da), &merging_unitary());
    Ok(&w * kron(&p, &identity(2)) * w.adjoint())
}

/// `Pi^d = (U (x) I_A)(I (x) P_{b,A})(U^dagger (x) I_A)` on (B, A).
pub fn pi_down(spec: &QuasiChainSpec) -> Result<DenseOperator, SpinError> {
    let p = pendant_projector(spec)?;
    let da = spec.a_dim();
    let p_ba = swap_factors(&p, da, 2);
    let w = kron(&merging_unitary(), &identity(da));
    Ok(&w * kron(&identity(2), &p_ba) * w.adjoint())
}

fn levels_charge(dim: usize) -> Vec<i32> {
    let twice = dim as i32 - 1;
    (0..dim as i32).map(|k| twice - 2 * k).collect()
}

/// Charge labels: one component per chain (twice the chain's Sz); a B site
/// contributes its upper pendant to the upper chain and its lower pendant to the lower chain.
pub fn lattice_charges(lat: &Lattice) -> ChargeLayout {
    let nc = lat.n_chains;
    let u = merging_unitary();
    let per_site = lat
        .sites
        .iter()
        .zip(&lat.dims)
        .map(|(s, &d)| {
            if s.kind == SiteKind::B {
                (0..4)
                    .map(|lvl| {
                        let col = (0..4).find(|&k| u[(lvl, k)] != ZERO).expect("U is a permutation");
                        let (m1, m2) = (col / 2, col % 2);
                        let mut q = vec![0; nc];
                        q[s.chain] += if m1 == 0 { 1 } else { -1 };
                        q[s.chain + 1] += if m2 == 0 { 1 } else { -1 };
                        q
                    })
                    .collect()
            } else {
                levels_charge(d)
                    .into_iter()
                    .map(|m| {
                        let mut q = vec![0; nc];
                        q[s.chain] = m;
                        q
                    })
                    .collect()
            }
        })
        .collect();
    ChargeLayout { per_site }
}

/// Total-Sz charge layout for a list of site dimensions.
pub fn sz_charges(dims: &[usize]) -> ChargeLayout {
    ChargeLayout {
        per_site: dims.iter().map(|&d| levels_charge(d).into_iter().map(|m| vec![m]).collect()).collect(),
    }
}

fn finish(dims: &[usize], terms: &[LocalTerm], scale: f64, layout: &ChargeLayout) -> Result<SparseOperator, HamiltonianError> {
    let op = SparseOperator::from_terms(dims, terms, scale);
    op.with_sectors(SectorLabels::from_layout(dims, layout)).map_err(HamiltonianError::ChargeLeak)
}

/// Local terms attached to every edge of a lattice.
pub fn lattice_terms(lat: &Lattice) -> Result<Vec<LocalTerm>, HamiltonianError> {
    let spec = &lat.chain;
    let pa = bond_projector(spec)?;
    let pb = pendant_projector(spec)?;
    let (pu, pd) = if lat.merged.is_empty() { (None, None) } else { (Some(pi_up(spec)?), Some(pi_down(spec)?)) };
    let pos = |s: &SiteIndex| lat.position(s).expect("edge endpoint belongs to lattice");
    Ok(lat
        .edges
        .iter()
        .map(|e| {
            let (p, q) = e.endpoints;
            match e.edge_type {
                EdgeType::A => LocalTerm { sites: vec![pos(&p), pos(&q)], op: pa.clone() },
                EdgeType::B => {
                    // operator is written on (A, b)
                    let (a, b) = if p.kind == SiteKind::A { (p, q) } else { (q, p) };
                    LocalTerm { sites: vec![pos(&a), pos(&b)], op: pb.clone() }
                }
                EdgeType::U => LocalTerm { sites: vec![pos(&p), pos(&q)], op: pu.clone().expect("merged") },
                EdgeType::D => LocalTerm { sites: vec![pos(&p), pos(&q)], op: pd.clone().expect("merged") },
            }
        })
        .collect())
}

/// `H = J [ sum P^bond_{A_i A_{i+1}} + sum P^pend_{A_i b_i} + boundary terms ]`.
pub fn build_chain_hamiltonian(spec: &QuasiChainSpec, j: f64) -> Result<SparseOperator, HamiltonianError> {
    let lat = Lattice::chain(spec)?;
    build_lattice_hamiltonian(&lat, j)
}

/// Sum of all edge operators of a lattice (chain or merged), scaled by J.
pub fn build_lattice_hamiltonian(lat: &Lattice, j: f64) -> Result<SparseOperator, HamiltonianError> {
    let terms = lattice_terms(lat)?;
    finish(&lat.dims, &terms, j, &lattice_charges(lat))
}

/// `H_2d`: E_a -> P^3, E_b -> P^2, E_u -> Pi^u, E_d -> Pi^d.
pub fn build_2d_hamiltonian(spec: &OctagonalSpec, j: f64) -> Result<SparseOperator, HamiltonianError> {
    build_lattice_hamiltonian(&Lattice::from_octagonal(spec)?, j)
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockTag {
    /// Contains b_0 (block 0).
    LeftBoundary,
    Interior,
    /// Contains b_{N+1} (block N).
    RightBoundary,
    /// Block 0 of a one-block chain: both boundaries.
    Both,
}

/// A block operator with its sites (kron order) and dimensions.
#[derive(Clone, Debug)]
pub struct BlockOperator {
    pub index: usize,
    pub sites: Vec<SiteIndex>,
    pub dims: Vec<usize>,
    pub op: DenseOperator,
    pub tag: BlockTag,
}

impl BlockOperator {
    pub fn charges(&self) -> Vec<i32> {
        let layout = sz_charges(&self.dims);
        (0..self.op.nrows())
            .map(|x| layout.charge_of(&crate::linalg::digits(x, &self.dims))[0])
            .collect()
    }
}

fn dense_from_terms(dims: &[usize], terms: &[LocalTerm]) -> DenseOperator {
    SparseOperator::from_terms(dims, terms, 1.0).to_dense()
}

/// Block `i` of the regrouped chain: i = 0 holds b_0, i = N holds b_{N+1},
/// interior blocks are `P^bond + 1/2 P^pend_{A_i} + 1/2 P^pend_{A_{i+1}}`.
/// Boundary blocks carry their boundary term at full weight.
pub fn build_block(spec: &QuasiChainSpec, i: usize) -> Result<BlockOperator, HamiltonianError> {
    spec.validate()?;
    let n = spec.n_blocks;
    if i > n {
        return Err(HamiltonianError::BlockOutOfRange { index: i, max: n });
    }
    let pa = bond_projector(spec)?;
    let pb = pendant_projector(spec)?;
    let pendants = |col: usize| -> Vec<SiteIndex> {
        (0..spec.pendants_per_a).map(|s| SiteIndex { slot: s as u8, ..SiteIndex::pendant(0, col) }).collect()
    };
    let mut sites = Vec::new();
    if i == 0 {
        sites.push(SiteIndex::left(0));
    }
    let cols: Vec<usize> = [i, i + 1].into_iter().filter(|&c| (1..=n).contains(&c)).collect();
    for &col in &cols {
        sites.push(SiteIndex::a(0, col));
        sites.extend(pendants(col));
    }
    if i == n {
        sites.push(SiteIndex::right(0, n));
    }
    let dims: Vec<usize> = sites.iter().map(|s| if s.kind == SiteKind::A { spec.a_dim() } else { 2 }).collect();
    let at = |s: SiteIndex| sites.iter().position(|&x| x == s).expect("block site");
    let mut terms = Vec::new();
    if cols.len() == 2 {
        terms.push(LocalTerm { sites: vec![at(SiteIndex::a(0, cols[0])), at(SiteIndex::a(0, cols[1]))], op: pa });
    }
    for &col in &cols {
        for p in pendants(col) {
            terms.push(LocalTerm { sites: vec![at(SiteIndex::a(0, col)), at(p)], op: &pb * re(0.5) });
        }
    }
    if i == 0 {
        terms.push(LocalTerm { sites: vec![at(SiteIndex::a(0, 1)), at(SiteIndex::left(0))], op: pb.clone() });
    }
    if i == n {
        terms.push(LocalTerm { sites: vec![at(SiteIndex::a(0, n)), at(SiteIndex::right(0, n))], op: pb.clone() });
    }
    let tag = match (i == 0, i == n) {
        (true, true) => BlockTag::Both,
        (true, false) => BlockTag::LeftBoundary,
        (false, true) => BlockTag::RightBoundary,
        (false, false) => BlockTag::Interior,
    };
    let op = dense_from_terms(&dims, &terms);
    Ok(BlockOperator { index: i, sites, dims, op, tag })
}

/// The translation-invariant interior block (needs no chain length).
pub fn interior_block(spec: &QuasiChainSpec) -> Result<BlockOperator, HamiltonianError> {
    build_block(&spec.with_blocks(3), 1)
}

/// Projector onto the range of a PSD block (complement of its kernel),
/// computed sector by sector in total Sz so it conserves Sz exactly.
pub fn support_complement_projector(block: &BlockOperator) -> DenseOperator {
    let charges = block.charges();
    let n = block.op.nrows();
    let mut groups: BTreeMap<i32, Vec<usize>> = BTreeMap::new();
    for (x, q) in charges.iter().enumerate() {
        groups.entry(*q).or_default().push(x);
    }
    let mut kernel = DMatrix::<C64>::zeros(n, n);
    for idx in groups.values() {
        let sub = DMatrix::from_fn(idx.len(), idx.len(), |r, col| block.op[(idx[r], idx[col])]);
        let (vals, vecs) = eigh(&sub);
        for (k, &v) in vals.iter().enumerate() {
            if v < KERNEL_TOL {
                for (r, &gr) in idx.iter().enumerate() {
                    for (col, &gc) in idx.iter().enumerate() {
                        kernel[(gr, gc)] += vecs[(r, k)] * vecs[(col, k)].conj();
                    }
                }
            }
        }
    }
    identity(n) - kernel
}

/// `H_p = sum_{i=0}^{N} S_perp_i` on the chain.
pub fn build_projective_hamiltonian(spec: &QuasiChainSpec) -> Result<SparseOperator, HamiltonianError> {
    let lat = Lattice::chain(spec)?;
    let mut terms = Vec::new();
    for i in 0..=spec.n_blocks {
        let b = build_block(spec, i)?;
        let sites = b.sites.iter().map(|s| lat.position(s).expect("block site in chain")).collect();
        terms.push(LocalTerm { sites, op: support_complement_projector(&b) });
    }
    finish(&lat.dims, &terms, 1.0, &lattice_charges(&lat))
}

/// A sub-chain sum together with the site dimensions it acts on.
#[derive(Clone, Debug)]
pub struct SubchainSum {
    pub n: usize,
    pub dims: Vec<usize>,
    pub op: SparseOperator,
}

/// `h_{n,i} = sum_{j=i}^{i+n-1} S_perp_{j,j+1}` on n+1 open (A, b) units
/// (no boundary spins). The interior instance is translation invariant, so
/// `i` only labels columns.
pub fn build_subchain_sum(spec: &QuasiChainSpec, n: usize, i: usize) -> Result<SubchainSum, HamiltonianError> {
    if n < 2 {
        return Err(HamiltonianError::SubchainTooShort(n));
    }
    let _ = i;
    let block = interior_block(spec)?;
    let proj = support_complement_projector(&block);
    let unit = 1 + spec.pendants_per_a;
    let mut dims = Vec::new();
    for _ in 0..=n {
        dims.push(spec.a_dim());
        dims.extend(std::iter::repeat(2).take(spec.pendants_per_a));
    }
    let terms: Vec<LocalTerm> = (0..n)
        .map(|k| LocalTerm { sites: (k * unit..(k + 2) * unit).collect(), op: proj.clone() })
        .collect();
    let op = finish(&dims, &terms, 1.0, &sz_charges(&dims))?;
    Ok(SubchainSum { n, dims, op })
}

/// Variant of `h_n` whose first block is the left boundary block (contains b_0).
pub fn build_boundary_subchain_sum(spec: &QuasiChainSpec, n: usize) -> Result<SubchainSum, HamiltonianError> {
    if n < 2 {
        return Err(HamiltonianError::SubchainTooShort(n));
    }
    let long = spec.with_blocks(n + 1);
    let lat = Lattice::chain(&long)?;
    // sites b_0 and units 1..=n
    let keep: Vec<SiteIndex> = lat.sites.iter().copied().filter(|s| s.column <= n && s.kind != SiteKind::BoundaryRight).collect();
    let dims: Vec<usize> = keep.iter().map(|s| lat.dim_of(s).expect("site")).collect();
    let mut terms = Vec::new();
    for b in 0..n {
        let blk = build_block(&long, b)?;
        let sites = blk.sites.iter().map(|s| keep.iter().position(|k| k == s).expect("kept")).collect();
        terms.push(LocalTerm { sites, op: support_complement_projector(&blk) });
    }
    let op = finish(&dims, &terms, 1.0, &sz_charges(&dims))?;
    Ok(SubchainSum { n, dims, op })
}

/// Residual chain after the first j units are measured.
#[derive(Clone, Debug)]
pub struct ResidualChain {
    pub j: usize,
    pub sites: Vec<SiteIndex>,
    pub dims: Vec<usize>,
}

impl ResidualChain {
    pub fn new(spec: &QuasiChainSpec, j: usize) -> Result<Self, HamiltonianError> {
        spec.validate()?;
        let n = spec.n_blocks;
        if j == 0 || j >= n {
            return Err(HamiltonianError::ResidualOutOfRange { j, n });
        }
        let lat = Lattice::chain(spec)?;
        let sites: Vec<SiteIndex> =
            lat.sites.iter().copied().filter(|s| s.column >= j && s.kind != SiteKind::BoundaryLeft).collect();
        let dims = sites.iter().map(|s| lat.dim_of(s).expect("site")).collect();
        Ok(ResidualChain { j, sites, dims })
    }

    fn at(&self, s: SiteIndex) -> usize {
        self.sites.iter().position(|&x| x == s).expect("residual site")
    }
}

/// `H(j) = J [ sum_{i=j}^{N-1} P^3_{A_i A_{i+1}} + sum_{i=j}^{N} P^2_{A_i b_i} + P^2_{A_N b_{N+1}} ]`.
pub fn build_residual_hamiltonian(
    spec: &QuasiChainSpec,
    j: usize,
    coupling: f64,
) -> Result<(ResidualChain, SparseOperator), HamiltonianError> {
    let rc = ResidualChain::new(spec, j)?;
    let n = spec.n_blocks;
    let pa = bond_projector(spec)?;
    let pb = pendant_projector(spec)?;
    let mut terms = Vec::new();
    for i in j..n {
        terms.push(LocalTerm { sites: vec![rc.at(SiteIndex::a(0, i)), rc.at(SiteIndex::a(0, i + 1))], op: pa.clone() });
    }
    for i in j..=n {
        for s in 0..spec.pendants_per_a {
            let p = SiteIndex { slot: s as u8, ..SiteIndex::pendant(0, i) };
            terms.push(LocalTerm { sites: vec![rc.at(SiteIndex::a(0, i)), rc.at(p)], op: pb.clone() });
        }
    }
    terms.push(LocalTerm { sites: vec![rc.at(SiteIndex::a(0, n)), rc.at(SiteIndex::right(0, n))], op: pb });
    let op = finish(&rc.dims, &terms, coupling, &sz_charges(&rc.dims))?;
    Ok((rc, op))
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum LogicalPauli {
    X,
    Z,
}

fn pauli(p: LogicalPauli) -> DenseOperator {
    match p {
        LogicalPauli::X => DMatrix::from_row_slice(2, 2, &[ZERO, re(1.0), re(1.0), ZERO]),
        LogicalPauli::Z => DMatrix::from_row_slice(2, 2, &[re(1.0), ZERO, ZERO, re(-1.0)]),
    }
}

/// `sigma(alpha, beta)` on a spin-3/2 site: the Pauli acting on levels
/// (alpha = down, beta = up), zero elsewhere.
fn level_pauli(p: LogicalPauli, alpha: i32, beta: i32) -> DenseOperator {
    let big = HalfInt::THREE_HALVES;
    let ia = big.level_index(HalfInt::from_twice(alpha)).expect("level");
    let ib = big.level_index(HalfInt::from_twice(beta)).expect("level");
    let s = pauli(p);
    let idx = [ib, ia];
    let mut m = DMatrix::from_element(4, 4, ZERO);
    for r in 0..2 {
        for col in 0..2 {
            m[(idx[r], idx[col])] = s[(r, col)];
        }
    }
    m
}

/// Single-site factor of the logical string on an A site:
/// `phase * sigma(+3/2,-3/2) + sigma(-1/2,+1/2)`.
pub fn logical_a_factor(p: LogicalPauli, phase: C64) -> DenseOperator {
    level_pauli(p, 3, -3) * phase + level_pauli(p, -1, 1)
}

fn string_operator(rc: &ResidualChain, a_factor: &DenseOperator, p: LogicalPauli) -> SparseOperator {
    let factors: Vec<DenseOperator> = rc
        .sites
        .iter()
        .map(|s| if s.kind == SiteKind::A { a_factor.clone() } else { pauli(p) })
        .collect();
    // build as a product of commuting single-site terms
    let dim: usize = rc.dims.iter().product();
    let mut op = SparseOperator::identity(dim);
    for (k, f) in factors.iter().enumerate() {
        let t = SparseOperator::from_terms(&rc.dims, &[LocalTerm { sites: vec![k], op: f.clone() }], 1.0);
        op = op.matmul(&t);
    }
    op
}

/// `(Sigma_X, Sigma_Z)` on the residual chain, built from
/// `sigma(+3/2,-3/2) + sigma(-1/2,+1/2)` on every A and `sigma` on every b.
///
/// The literal form with a factor `i` on the (+3/2, -3/2) pair does not
/// commute with `H(j)`; see [`logical_operators_with_phase`].
pub fn logical_operators(
    spec: &QuasiChainSpec,
    j: usize,
) -> Result<(SparseOperator, SparseOperator), HamiltonianError> {
    logical_operators_with_phase(spec, j, re(1.0))
}

/// Logical strings with an arbitrary phase on the (+3/2, -3/2) block of each A factor.
pub fn logical_operators_with_phase(
    spec: &QuasiChainSpec,
    j: usize,
    phase: C64,
) -> Result<(SparseOperator, SparseOperator), HamiltonianError> {
    if spec.spin_a != HalfInt::THREE_HALVES {
        return Err(HamiltonianError::Lattice(LatticeError::InvalidSpec(
            "logical strings are defined for the spin-3/2 chain".into(),
        )));
    }
    let rc = ResidualChain::new(spec, j)?;
    let sx = string_operator(&rc, &logical_a_factor(LogicalPauli::X, phase), LogicalPauli::X);
    let sz = string_operator(&rc, &logical_a_factor(LogicalPauli::Z, phase), LogicalPauli::Z);
    Ok((sx, sz))
}

/// `i` as used by the printed logical string.
pub fn literal_phase() -> C64 {
    c(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{eigvalsh, max_norm};

    #[test]
    fn swap_factors_roundtrip() {
        let p = pendant_projector(&QuasiChainSpec::spin32(1)).unwrap();
        let s = swap_factors(&p, 4, 2);
        assert!(max_norm(&(swap_factors(&s, 2, 4) - &p)) < 1e-15);
    }

    #[test]
    fn block_is_psd_with_expected_dims() {
        let b = interior_block(&QuasiChainSpec::spin32(3)).unwrap();
        assert_eq!(b.op.nrows(), 64);
        assert_eq!(b.tag, BlockTag::Interior);
        assert!(eigvalsh(&b.op)[0] > -1e-12);
        let b2 = interior_block(&QuasiChainSpec::spin2(3)).unwrap();
        assert_eq!(b2.op.nrows(), 400);
    }

    #[test]
    fn block_index_range() {
        let spec = QuasiChainSpec::spin32(3);
        assert!(build_block(&spec, 3).is_ok());
        assert!(matches!(build_block(&spec, 4), Err(HamiltonianError::BlockOutOfRange { .. })));
    }

    #[test]
    fn subchain_rejects_short() {
        assert!(matches!(
            build_subchain_sum(&QuasiChainSpec::spin32(1), 1, 0),
            Err(HamiltonianError::SubchainTooShort(1))
        ));
    }

    #[test]
    fn residual_range() {
        let spec = QuasiChainSpec::spin32(3);
        assert!(build_residual_hamiltonian(&spec, 3, 1.0).is_err());
        assert!(build_residual_hamiltonian(&spec, 0, 1.0).is_err());
        let (rc, h) = build_residual_hamiltonian(&spec, 2, 1.0).unwrap();
        assert_eq!(rc.dims, vec![4, 2, 4, 2, 2]);
        assert_eq!(h.dim(), 128);
    }

    #[test]
    fn sigma_z_is_diagonal() {
        let (_, sz) = logical_operators(&QuasiChainSpec::spin32(3), 1).unwrap();
        assert!(sz.is_diagonal());
    }
}
