//! Site inventories and typed coupling edges for the quasi-chain and for
//! merged (octagonal) lattices built from several quasi-chains.
//!
//! Columns run `0..=N+1`: the left boundary b_0 sits in column 0, the unit
//! (A_i, b_i) in column i, and the right boundary b_{N+1} in column N+1.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::spin_algebra::HalfInt;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LatticeError {
    #[error("a quasi-chain needs at least one block")]
    ZeroBlocks,
    #[error("inconsistent chain spec: {0}")]
    InvalidSpec(String),
    #[error("site {0} is not an interior pendant b site")]
    NotAPendant(SiteIndex),
    #[error("site {0} appears in more than one merge pair")]
    ReusedSite(SiteIndex),
    #[error("merge pair {0} / {1} does not join vertically adjacent chains")]
    NonAdjacent(SiteIndex, SiteIndex),
    #[error("merging requires at least two chains with identical specs")]
    ChainMismatch,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SiteKind {
    /// b_0, left end of a chain.
    BoundaryLeft,
    A,
    /// Pendant spin-1/2 attached to an A site.
    Pendant,
    /// Merged pair of pendants from two neighbouring chains.
    B,
    /// b_{N+1}, right end of a chain.
    BoundaryRight,
}

/// Unique site label. Ordering (chain, column, kind, slot) is the global kron order.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SiteIndex {
    pub chain: usize,
    pub column: usize,
    pub kind: SiteKind,
    /// Pendant number for chains with several pendants per A; 0 otherwise.
    pub slot: u8,
}

impl SiteIndex {
    pub const fn new(chain: usize, column: usize, kind: SiteKind) -> Self {
        SiteIndex { chain, column, kind, slot: 0 }
    }
    pub const fn a(chain: usize, column: usize) -> Self {
        Self::new(chain, column, SiteKind::A)
    }
    pub const fn pendant(chain: usize, column: usize) -> Self {
        Self::new(chain, column, SiteKind::Pendant)
    }
    pub const fn merged(upper_chain: usize, column: usize) -> Self {
        Self::new(upper_chain, column, SiteKind::B)
    }
    pub const fn left(chain: usize) -> Self {
        Self::new(chain, 0, SiteKind::BoundaryLeft)
    }
    pub const fn right(chain: usize, n_blocks: usize) -> Self {
        Self::new(chain, n_blocks + 1, SiteKind::BoundaryRight)
    }
    pub fn is_spin_half(&self) -> bool {
        matches!(self.kind, SiteKind::BoundaryLeft | SiteKind::Pendant | SiteKind::BoundaryRight)
    }
}

impl std::fmt::Display for SiteIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let tag = match self.kind {
            SiteKind::BoundaryLeft => "b0",
            SiteKind::A => "A",
            SiteKind::Pendant => "b",
            SiteKind::B => "B",
            SiteKind::BoundaryRight => "bR",
        };
        if self.slot > 0 {
            write!(f, "{tag}[{},{}#{}]", self.chain, self.column, self.slot)
        } else {
            write!(f, "{tag}[{},{}]", self.chain, self.column)
        }
    }
}

/// Coupling type; the attached two-site operator is fixed by the type.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeType {
    /// A-A bond (E_a).
    A,
    /// A-b bond with an unmerged spin-1/2 (E_b).
    B,
    /// A above a merged B site (E_u); endpoints (A, B).
    U,
    /// Merged B site above an A (E_d); endpoints (B, A).
    D,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CouplingEdge {
    pub edge_type: EdgeType,
    pub endpoints: (SiteIndex, SiteIndex),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuasiChainSpec {
    pub n_blocks: usize,
    pub spin_a: HalfInt,
    pub pendants_per_a: usize,
    /// Total spin projected out on A-A bonds.
    pub bond_projector_spin: HalfInt,
    /// Total spin projected out on A-b bonds.
    pub pendant_projector_spin: HalfInt,
}

impl QuasiChainSpec {
    /// Spin-3/2 chain with one pendant per A (P^3 on A-A, P^2 on A-b).
    pub fn spin32(n_blocks: usize) -> Self {
        QuasiChainSpec {
            n_blocks,
            spin_a: HalfInt::THREE_HALVES,
            pendants_per_a: 1,
            bond_projector_spin: HalfInt::THREE,
            pendant_projector_spin: HalfInt::TWO,
        }
    }

    /// Spin-2 chain with two pendants per A (P^4 on A-A, P^{5/2} on A-b).
    pub fn spin2(n_blocks: usize) -> Self {
        QuasiChainSpec {
            n_blocks,
            spin_a: HalfInt::TWO,
            pendants_per_a: 2,
            bond_projector_spin: HalfInt::FOUR,
            pendant_projector_spin: HalfInt::FIVE_HALVES,
        }
    }

    pub fn with_blocks(&self, n_blocks: usize) -> Self {
        QuasiChainSpec { n_blocks, ..*self }
    }

    pub fn validate(&self) -> Result<(), LatticeError> {
        if self.n_blocks == 0 {
            return Err(LatticeError::ZeroBlocks);
        }
        if self.pendants_per_a == 0 || self.pendants_per_a > 8 {
            return Err(LatticeError::InvalidSpec("pendants_per_a must be in 1..=8".into()));
        }
        // spin of A is half the coordination number (two chain bonds + pendants)
        if self.spin_a.twice() != (2 + self.pendants_per_a) as i32 {
            return Err(LatticeError::InvalidSpec(format!(
                "spin_a = {} but coordination {} requires {}",
                self.spin_a,
                2 + self.pendants_per_a,
                HalfInt::from_twice((2 + self.pendants_per_a) as i32)
            )));
        }
        if self.bond_projector_spin.twice() != 2 * self.spin_a.twice() {
            return Err(LatticeError::InvalidSpec("bond projector must be the maximal spin 2 s_A".into()));
        }
        if self.pendant_projector_spin.twice() != self.spin_a.twice() + 1 {
            return Err(LatticeError::InvalidSpec("pendant projector must be the maximal spin s_A + 1/2".into()));
        }
        Ok(())
    }

    /// Physical dimension of one A site.
    pub fn a_dim(&self) -> usize {
        self.spin_a.dim()
    }
}

/// Several identical quasi-chains glued by a merge map.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OctagonalSpec {
    pub chain: QuasiChainSpec,
    pub n_chains: usize,
    /// (upper pendant, lower pendant) pairs, each becoming one B site.
    pub merge_map: Vec<(SiteIndex, SiteIndex)>,
    /// Spin-1/2 sites that stay unmerged.
    pub unmerged: Vec<SiteIndex>,
}

/// Sites and edges of a single chain (chain index 0).
pub fn enumerate_chain(spec: &QuasiChainSpec) -> Result<(Vec<SiteIndex>, Vec<CouplingEdge>), LatticeError> {
    let lat = Lattice::chain(spec)?;
    Ok((lat.sites, lat.edges))
}

fn chain_spin_halves(spec: &QuasiChainSpec, chain: usize) -> Vec<SiteIndex> {
    let mut out = vec![SiteIndex::left(chain)];
    for col in 1..=spec.n_blocks {
        for slot in 0..spec.pendants_per_a {
            out.push(SiteIndex { slot: slot as u8, ..SiteIndex::pendant(chain, col) });
        }
    }
    out.push(SiteIndex::right(chain, spec.n_blocks));
    out
}

/// Merge `n_chains` copies of `chain` with the given pendant pairs.
pub fn merge_chains(
    chain: &QuasiChainSpec,
    n_chains: usize,
    pairing: &[(SiteIndex, SiteIndex)],
) -> Result<OctagonalSpec, LatticeError> {
    chain.validate()?;
    if n_chains == 0 {
        return Err(LatticeError::ChainMismatch);
    }
    let mut used = BTreeSet::new();
    let mut merge_map = Vec::with_capacity(pairing.len());
    for &(p, q) in pairing {
        for s in [p, q] {
            let ok = s.kind == SiteKind::Pendant
                && s.chain < n_chains
                && (1..=chain.n_blocks).contains(&s.column)
                && (s.slot as usize) < chain.pendants_per_a;
            if !ok {
                return Err(LatticeError::NotAPendant(s));
            }
            if !used.insert(s) {
                return Err(LatticeError::ReusedSite(s));
            }
        }
        let (upper, lower) = if p.chain < q.chain { (p, q) } else { (q, p) };
        if lower.chain != upper.chain + 1 {
            return Err(LatticeError::NonAdjacent(p, q));
        }
        merge_map.push((upper, lower));
    }
    // two pairs may not share the B label (upper chain, column, slot)
    let mut labels = BTreeSet::new();
    for (u, _) in &merge_map {
        if !labels.insert((u.chain, u.column, u.slot)) {
            return Err(LatticeError::ReusedSite(*u));
        }
    }
    merge_map.sort();
    let unmerged = (0..n_chains)
        .flat_map(|c| chain_spin_halves(chain, c))
        .filter(|s| !used.contains(s))
        .collect();
    Ok(OctagonalSpec { chain: *chain, n_chains, merge_map, unmerged })
}

/// Two chains with every pendant merged column by column.
pub fn ladder_pairing(n_blocks: usize) -> Vec<(SiteIndex, SiteIndex)> {
    (1..=n_blocks)
        .map(|col| (SiteIndex::pendant(0, col), SiteIndex::pendant(1, col)))
        .collect()
}

/// Alternating (brick) pairing for `n_chains` chains: in column `i`, chain `c`
/// merges with chain `c + 1` when `c + i` is odd.
pub fn alternating_pairing(n_chains: usize, n_blocks: usize) -> Vec<(SiteIndex, SiteIndex)> {
    let mut out = Vec::new();
    for col in 1..=n_blocks {
        let mut c = (col + 1) % 2;
        while c + 1 < n_chains {
            out.push((SiteIndex::pendant(c, col), SiteIndex::pendant(c + 1, col)));
            c += 2;
        }
    }
    out
}

/// Fully expanded site/edge inventory of a (possibly merged) lattice.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Lattice {
    pub chain: QuasiChainSpec,
    pub n_chains: usize,
    /// Sites in global kron order.
    pub sites: Vec<SiteIndex>,
    pub dims: Vec<usize>,
    pub edges: Vec<CouplingEdge>,
    /// B site -> (upper pendant, lower pendant) it replaced.
    pub merged: BTreeMap<SiteIndex, (SiteIndex, SiteIndex)>,
    /// Original pendant -> B site that absorbed it.
    pub pendant_owner: BTreeMap<SiteIndex, SiteIndex>,
    position: BTreeMap<SiteIndex, usize>,
}

impl Lattice {
    pub fn chain(spec: &QuasiChainSpec) -> Result<Self, LatticeError> {
        Self::from_octagonal(&merge_chains(spec, 1, &[])?)
    }

    pub fn ladder(n_blocks: usize) -> Result<Self, LatticeError> {
        let spec = QuasiChainSpec::spin32(n_blocks);
        Self::from_octagonal(&merge_chains(&spec, 2, &ladder_pairing(n_blocks))?)
    }

    pub fn from_octagonal(spec: &OctagonalSpec) -> Result<Self, LatticeError> {
        let ch = &spec.chain;
        ch.validate()?;
        let n = ch.n_blocks;
        let mut merged = BTreeMap::new();
        let mut pendant_owner = BTreeMap::new();
        for &(u, l) in &spec.merge_map {
            let b = SiteIndex { slot: u.slot, ..SiteIndex::merged(u.chain, u.column) };
            merged.insert(b, (u, l));
            pendant_owner.insert(u, b);
            pendant_owner.insert(l, b);
        }
        let mut sites = Vec::new();
        for c in 0..spec.n_chains {
            sites.push(SiteIndex::left(c));
            for col in 1..=n {
                sites.push(SiteIndex::a(c, col));
                for slot in 0..ch.pendants_per_a {
                    let p = SiteIndex { slot: slot as u8, ..SiteIndex::pendant(c, col) };
                    if !pendant_owner.contains_key(&p) {
                        sites.push(p);
                    }
                }
            }
            sites.push(SiteIndex::right(c, n));
        }
        sites.extend(merged.keys().copied());
        sites.sort();
        let dims = sites
            .iter()
            .map(|s| match s.kind {
                SiteKind::A => ch.a_dim(),
                SiteKind::B => 4,
                _ => 2,
            })
            .collect();

        let mut edges = Vec::new();
        for c in 0..spec.n_chains {
            edges.push(CouplingEdge {
                edge_type: EdgeType::B,
                endpoints: (SiteIndex::left(c), SiteIndex::a(c, 1)),
            });
            for col in 1..=n {
                let a = SiteIndex::a(c, col);
                if col < n {
                    edges.push(CouplingEdge { edge_type: EdgeType::A, endpoints: (a, SiteIndex::a(c, col + 1)) });
                }
                for slot in 0..ch.pendants_per_a {
                    let p = SiteIndex { slot: slot as u8, ..SiteIndex::pendant(c, col) };
                    match pendant_owner.get(&p) {
                        None => edges.push(CouplingEdge { edge_type: EdgeType::B, endpoints: (a, p) }),
                        Some(&b) => {
                            let (upper, _) = merged[&b];
                            if upper == p {
                                edges.push(CouplingEdge { edge_type: EdgeType::U, endpoints: (a, b) });
                            } else {
                                edges.push(CouplingEdge { edge_type: EdgeType::D, endpoints: (b, a) });
                            }
                        }
                    }
                }
            }
            edges.push(CouplingEdge {
                edge_type: EdgeType::B,
                endpoints: (SiteIndex::a(c, n), SiteIndex::right(c, n)),
            });
        }
        edges.sort_by_key(|e| (e.endpoints.0.chain, e.endpoints.0.column, e.edge_type, e.endpoints));
        let position = sites.iter().enumerate().map(|(k, s)| (*s, k)).collect();
        Ok(Lattice { chain: *ch, n_chains: spec.n_chains, sites, dims, edges, merged, pendant_owner, position })
    }

    pub fn n_blocks(&self) -> usize {
        self.chain.n_blocks
    }

    /// The same lattice cut after column `n_blocks` (merges beyond it dropped).
    pub fn truncated(&self, n_blocks: usize) -> Result<Lattice, LatticeError> {
        let pairs: Vec<(SiteIndex, SiteIndex)> =
            self.merged.values().filter(|(u, _)| u.column <= n_blocks).copied().collect();
        Self::from_octagonal(&merge_chains(&self.chain.with_blocks(n_blocks), self.n_chains, &pairs)?)
    }

    /// B sites in column `col`.
    pub fn merged_in_column(&self, col: usize) -> impl Iterator<Item = (SiteIndex, usize, usize)> + '_ {
        self.merged.iter().filter(move |(b, _)| b.column == col).map(|(b, (u, l))| (*b, u.chain, l.chain))
    }

    pub fn position(&self, site: &SiteIndex) -> Option<usize> {
        self.position.get(site).copied()
    }

    pub fn dim_of(&self, site: &SiteIndex) -> Option<usize> {
        self.position(site).map(|k| self.dims[k])
    }

    /// Total Hilbert-space dimension (saturating).
    pub fn hilbert_dim(&self) -> usize {
        self.dims.iter().fold(1usize, |acc, &d| acc.saturating_mul(d))
    }

    pub fn count(&self, kind: SiteKind) -> usize {
        self.sites.iter().filter(|s| s.kind == kind).count()
    }

    pub fn edges_of(&self, t: EdgeType) -> impl Iterator<Item = &CouplingEdge> {
        self.edges.iter().filter(move |e| e.edge_type == t)
    }

    /// Vertical partner of an A site's pendant `slot`: the pendant itself or the B that absorbed it.
    pub fn vertical_partner(&self, a: SiteIndex, slot: u8) -> SiteIndex {
        let p = SiteIndex { slot, ..SiteIndex::pendant(a.chain, a.column) };
        self.pendant_owner.get(&p).copied().unwrap_or(p)
    }
}
