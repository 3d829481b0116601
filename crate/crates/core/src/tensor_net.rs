//! Projected-entangled-pair representation of the chain and merged ground
//! states, exact expansion to state vectors, and contraction against bras.
//!
//! Every bond carries the pair state `(|00> + |11>)/sqrt(2)`, oriented
//! left to right and top to bottom. The AKLT singlet on a bond equals
//! `(M (x) I)` applied to that pair state with `M = [[0,-1],[1,0]]`, so each
//! site map absorbs `M` on its upstream legs (r, and d towards the pendant or
//! B below it). The left boundary b_0 therefore carries `M` and the remaining
//! spin-1/2 sites are identities.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rayon::prelude::*;
use thiserror::Error;

use crate::lattice::{Lattice, SiteIndex, SiteKind};
use crate::linalg::{re, DenseOperator, C64, ZERO};
use crate::spin_algebra::{merging_unitary, HalfInt};

#[derive(Debug, Error, PartialEq)]
pub enum TensorError {
    #[error("state dimension {dim} exceeds the cap {cap}")]
    DimensionCap { dim: usize, cap: usize },
    #[error("site {0} has already been contracted")]
    AlreadyContracted(SiteIndex),
    #[error("site {0} is not part of the network")]
    UnknownSite(SiteIndex),
    #[error("vector of length {got} does not match physical dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("tensor networks are implemented for spin-3/2 chains with one pendant per site")]
    Unsupported,
}

/// Default cap on expanded state-vector length.
pub const STATE_CAP: usize = 1 << 24;

/// Dense tensor with named legs, row-major (first leg slowest).
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    pub legs: Vec<String>,
    pub dims: Vec<usize>,
    pub data: Vec<C64>,
}

fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1; dims.len()];
    for k in (0..dims.len().saturating_sub(1)).rev() {
        s[k] = s[k + 1] * dims[k + 1];
    }
    s
}

impl Tensor {
    pub fn new(legs: &[&str], dims: &[usize], data: Vec<C64>) -> Self {
        assert_eq!(legs.len(), dims.len());
        assert_eq!(dims.iter().product::<usize>(), data.len(), "data length");
        Tensor { legs: legs.iter().map(|s| s.to_string()).collect(), dims: dims.to_vec(), data }
    }

    pub fn from_fn(legs: &[&str], dims: &[usize], f: impl Fn(&[usize]) -> C64) -> Self {
        let total = dims.iter().product();
        let data = (0..total).map(|x| f(&crate::linalg::digits(x, dims))).collect();
        Self::new(legs, dims, data)
    }

    pub fn scalar(v: C64) -> Self {
        Tensor { legs: vec![], dims: vec![], data: vec![v] }
    }

    pub fn leg(&self, name: &str) -> Option<usize> {
        self.legs.iter().position(|l| l == name)
    }

    pub fn dim_of(&self, name: &str) -> Option<usize> {
        self.leg(name).map(|k| self.dims[k])
    }

    pub fn get(&self, idx: &[usize]) -> C64 {
        self.data[crate::linalg::flat_index(idx, &self.dims)]
    }

    pub fn rename(mut self, from: &str, to: &str) -> Self {
        if let Some(k) = self.leg(from) {
            self.legs[k] = to.to_string();
        }
        self
    }

    pub fn scale(mut self, s: C64) -> Self {
        self.data.iter_mut().for_each(|x| *x *= s);
        self
    }

    pub fn norm_sqr(&self) -> f64 {
        self.data.iter().map(|x| x.norm_sqr()).sum()
    }

    /// Reorder legs to `order` (which must be a permutation of the legs).
    pub fn permuted(&self, order: &[&str]) -> Tensor {
        assert_eq!(order.len(), self.legs.len());
        let perm: Vec<usize> = order.iter().map(|n| self.leg(n).unwrap_or_else(|| panic!("no leg {n}"))).collect();
        if perm.iter().enumerate().all(|(a, &b)| a == b) {
            return self.clone();
        }
        let new_dims: Vec<usize> = perm.iter().map(|&k| self.dims[k]).collect();
        let old_strides = strides(&self.dims);
        let src_strides: Vec<usize> = perm.iter().map(|&k| old_strides[k]).collect();
        let total = self.data.len();
        let mut data = vec![ZERO; total];
        let nd = new_dims.len();
        let mut idx = vec![0usize; nd];
        let mut src = 0usize;
        for out in data.iter_mut() {
            *out = self.data[src];
            for k in (0..nd).rev() {
                idx[k] += 1;
                src += src_strides[k];
                if idx[k] < new_dims[k] {
                    break;
                }
                src -= src_strides[k] * new_dims[k];
                idx[k] = 0;
            }
        }
        Tensor { legs: order.iter().map(|s| s.to_string()).collect(), dims: new_dims, data }
    }

    /// Contract all legs with matching names; result legs are
    /// (free legs of self, free legs of other).
    pub fn contract(&self, other: &Tensor) -> Tensor {
        let shared: Vec<&str> = self.legs.iter().filter(|l| other.leg(l).is_some()).map(String::as_str).collect();
        let free_a: Vec<&str> = self.legs.iter().filter(|l| other.leg(l).is_none()).map(String::as_str).collect();
        let free_b: Vec<&str> = other.legs.iter().filter(|l| self.leg(l).is_none()).map(String::as_str).collect();
        for s in &shared {
            assert_eq!(self.dim_of(s), other.dim_of(s), "leg {s} dimension mismatch");
        }
        let a_order: Vec<&str> = free_a.iter().chain(shared.iter()).copied().collect();
        let b_order: Vec<&str> = shared.iter().chain(free_b.iter()).copied().collect();
        let a = self.permuted(&a_order);
        let b = other.permuted(&b_order);
        let m: usize = free_a.iter().map(|l| self.dim_of(l).expect("leg")).product();
        let k: usize = shared.iter().map(|l| self.dim_of(l).expect("leg")).product();
        let n: usize = free_b.iter().map(|l| other.dim_of(l).expect("leg")).product();
        let mut data = vec![ZERO; m * n];
        let row = |(i, out): (usize, &mut [C64])| {
            let arow = &a.data[i * k..(i + 1) * k];
            for (kk, &av) in arow.iter().enumerate() {
                if av == ZERO {
                    continue;
                }
                let brow = &b.data[kk * n..(kk + 1) * n];
                for (o, &bv) in out.iter_mut().zip(brow) {
                    *o += av * bv;
                }
            }
        };
        if n > 0 {
            if m * n * k > 1 << 16 {
                data.par_chunks_mut(n).enumerate().for_each(row);
            } else {
                data.chunks_mut(n).enumerate().for_each(row);
            }
        }
        let legs: Vec<&str> = free_a.iter().chain(free_b.iter()).copied().collect();
        let dims: Vec<usize> = free_a
            .iter()
            .map(|l| self.dim_of(l).expect("leg"))
            .chain(free_b.iter().map(|l| other.dim_of(l).expect("leg")))
            .collect();
        Tensor { legs: legs.iter().map(|s| s.to_string()).collect(), dims, data }
    }

    /// Contract leg `leg` with `<bra|`, removing the leg.
    pub fn apply_bra(&self, leg: &str, bra: &[C64]) -> Tensor {
        let d = self.dim_of(leg).expect("leg");
        assert_eq!(bra.len(), d);
        let b = Tensor::new(&[leg], &[d], bra.iter().map(|x| x.conj()).collect());
        self.contract(&b).permuted(&self.legs.iter().filter(|l| *l != leg).map(String::as_str).collect::<Vec<_>>())
    }

    /// Apply an operator to leg `leg` in place of its index (leg order kept).
    pub fn apply_op(&self, leg: &str, op: &DenseOperator) -> Tensor {
        let d = self.dim_of(leg).expect("leg");
        assert_eq!(op.ncols(), d);
        let tmp = "__op_in";
        let o = Tensor::from_fn(&[leg, tmp], &[op.nrows(), d], |i| op[(i[0], i[1])]);
        let moved = self.clone().rename(leg, tmp);
        let order: Vec<&str> = self.legs.iter().map(String::as_str).collect();
        let out = moved.contract(&o);
        out.permuted(&order)
    }

    pub fn conj(&self) -> Tensor {
        Tensor { legs: self.legs.clone(), dims: self.dims.clone(), data: self.data.iter().map(|x| x.conj()).collect() }
    }
}

/// `M = [[0, -1], [1, 0]]`: the singlet is `(M (x) I)` applied to the pair state.
pub fn singlet_gauge() -> DenseOperator {
    crate::linalg::from_real(2, 2, &[0.0, -1.0, 1.0, 0.0])
}

/// Isometry from the symmetric part of three qubits onto spin 3/2: level `k`
/// collects the basis states with `k` ones, each row normalised.
pub fn symmetric_map() -> Tensor {
    Tensor::from_fn(&["p", "q0", "q1", "q2"], &[4, 2, 2, 2], |i| {
        let ones = i[1] + i[2] + i[3];
        if ones == i[0] {
            let count = [1.0, 3.0, 3.0, 1.0][ones];
            re(1.0 / f64::sqrt(count))
        } else {
            ZERO
        }
    })
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TensorKind {
    /// A site with a pendant or a B below it (legs p, l, r, d).
    ChainA,
    /// A site of the upper chain of a merged pair (legs p, l, r, d).
    AUp,
    /// A site of the lower chain of a merged pair (legs p, l, r, u).
    ADown,
    /// Merged site (legs p, u, d).
    Merged,
    /// Pendant spin-1/2 (legs p, u).
    Pendant,
    /// b_0 (legs p, r).
    BoundaryLeft,
    /// b_{N+1} (legs p, l).
    BoundaryRight,
}

/// Constructed site tensors: symmetric map with `M` on upstream legs.
pub fn constructed_a_up() -> Tensor {
    let m = singlet_gauge();
    symmetric_map()
        .rename("q0", "l")
        .apply_op_gauge("q1", "r", &m)
        .apply_op_gauge("q2", "d", &m)
        .permuted(&["p", "l", "r", "d"])
}

/// Lower-chain A: `M` on r only (its vertical bond enters from B above).
pub fn constructed_a_down() -> Tensor {
    let m = singlet_gauge();
    symmetric_map()
        .rename("q0", "l")
        .apply_op_gauge("q1", "r", &m)
        .rename("q2", "u")
        .permuted(&["p", "l", "r", "u"])
}

/// Merged site: `U` on (upper pendant, lower pendant), `M` on the lower leg.
pub fn constructed_b() -> Tensor {
    let u = merging_unitary();
    let m = singlet_gauge();
    let raw = Tensor::from_fn(&["p", "u", "x"], &[4, 2, 2], |i| u[(i[0], i[1] * 2 + i[2])]);
    raw.apply_op_gauge("x", "d", &m).permuted(&["p", "u", "d"])
}

impl Tensor {
    /// Replace leg `from` by leg `to` with `T'[.., k, ..] = sum_j T[.., j, ..] g[j, k]`.
    fn apply_op_gauge(&self, from: &str, to: &str, g: &DenseOperator) -> Tensor {
        let gt = Tensor::from_fn(&[from, to], &[g.nrows(), g.ncols()], |i| g[(i[0], i[1])]);
        let order: Vec<&str> = self.legs.iter().map(|l| if l == from { to } else { l.as_str() }).collect();
        self.contract(&gt).permuted(&order)
    }
}

/// Transcribed site tensors `(A_u, A_d, B)`.
///
/// `A_u` and `B` are the printed entries; `A_d` is derived: it equals `A_u`
/// with `M^T` absorbed on the vertical leg, i.e. the symmetric map with `M` on
/// r only.
pub fn published_site_tensors() -> (Tensor, Tensor, Tensor) {
    let s3 = 1.0 / 3f64.sqrt();
    // entry (s, l, r, d) of sum_k c_k |r><l| (x) <d|
    let mut au = vec![ZERO; 4 * 8];
    let mut put = |s: usize, r: usize, l: usize, d: usize, v: f64| {
        au[s * 8 + l * 4 + r * 2 + d] += re(v);
    };
    // A_u[+3/2] = |1><0| (x) <1|
    put(0, 1, 0, 1, 1.0);
    // A_u[-3/2] = |0><1| (x) <0|
    put(3, 0, 1, 0, 1.0);
    // A_u[+1/2] = -(Z (x) <1| + |1><0| (x) <0|)/sqrt3
    put(1, 0, 0, 1, -s3);
    put(1, 1, 1, 1, s3);
    put(1, 1, 0, 0, -s3);
    // A_u[-1/2] = (Z (x) <0| - |0><1| (x) <1|)/sqrt3
    put(2, 0, 0, 0, s3);
    put(2, 1, 1, 0, -s3);
    put(2, 0, 1, 1, -s3);
    let a_u = Tensor::new(&["p", "l", "r", "d"], &[4, 2, 2, 2], au);

    // B[s] = |x>_u <y|_d
    let mut bd = vec![ZERO; 16];
    let mut putb = |s: usize, u: usize, d: usize, v: f64| bd[s * 4 + u * 2 + d] += re(v);
    putb(0, 0, 1, 1.0); // B[+3/2] = |0><1|
    putb(3, 1, 0, -1.0); // B[-3/2] = -|1><0|
    putb(1, 1, 1, 1.0); // B[+1/2] = |1><1|
    putb(2, 0, 0, -1.0); // B[-1/2] = -|0><0|
    let b = Tensor::new(&["p", "u", "d"], &[4, 2, 2], bd);

    // A_d[s; l, r, u] = sum_p M[u, p] A_u[s; l, r, p]
    let m = singlet_gauge();
    let a_d = Tensor::from_fn(&["p", "l", "r", "u"], &[4, 2, 2, 2], |i| {
        (0..2).map(|p| m[(i[3], p)] * a_u.get(&[i[0], i[1], i[2], p])).sum()
    });
    (a_u, a_d, b)
}

#[derive(Clone, Debug)]
pub struct SiteTensor {
    pub kind: TensorKind,
    /// Legs: "p" (absent once contracted) then virtual legs.
    pub tensor: Tensor,
    pub contracted: bool,
}

/// A pair-state bond joining leg `a.1` of site `a.0` to leg `b.1` of site `b.0`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Bond {
    pub a: (SiteIndex, &'static str),
    pub b: (SiteIndex, &'static str),
}

#[derive(Clone, Debug)]
pub struct TensorNetwork {
    pub lattice: Lattice,
    pub sites: BTreeMap<SiteIndex, SiteTensor>,
    pub bonds: Vec<Bond>,
    pub prefactor: C64,
}

/// Site tensor for a given role.
pub fn site_tensor(kind: TensorKind) -> Tensor {
    match kind {
        TensorKind::ChainA | TensorKind::AUp => constructed_a_up(),
        TensorKind::ADown => constructed_a_down(),
        TensorKind::Merged => constructed_b(),
        TensorKind::Pendant => Tensor::from_fn(&["p", "u"], &[2, 2], |i| if i[0] == i[1] { re(1.0) } else { ZERO }),
        TensorKind::BoundaryRight => {
            Tensor::from_fn(&["p", "l"], &[2, 2], |i| if i[0] == i[1] { re(1.0) } else { ZERO })
        }
        TensorKind::BoundaryLeft => {
            let m = singlet_gauge();
            Tensor::from_fn(&["p", "r"], &[2, 2], |i| m[(i[0], i[1])])
        }
    }
}

/// Ground-state network of a chain or merged spin-3/2 lattice.
pub fn build_ground_network(lattice: &Lattice) -> Result<TensorNetwork, TensorError> {
    if lattice.chain.spin_a != HalfInt::THREE_HALVES || lattice.chain.pendants_per_a != 1 {
        return Err(TensorError::Unsupported);
    }
    let n = lattice.n_blocks();
    let mut sites = BTreeMap::new();
    let mut bonds = Vec::new();
    for s in &lattice.sites {
        let kind = match s.kind {
            SiteKind::BoundaryLeft => TensorKind::BoundaryLeft,
            SiteKind::BoundaryRight => TensorKind::BoundaryRight,
            SiteKind::Pendant => TensorKind::Pendant,
            SiteKind::B => TensorKind::Merged,
            SiteKind::A => {
                let partner = lattice.vertical_partner(*s, 0);
                if partner.kind == SiteKind::B && partner.chain != s.chain {
                    TensorKind::ADown
                } else if partner.kind == SiteKind::B {
                    TensorKind::AUp
                } else {
                    TensorKind::ChainA
                }
            }
        };
        sites.insert(*s, SiteTensor { kind, tensor: site_tensor(kind), contracted: false });
    }
    for c in 0..lattice.n_chains {
        bonds.push(Bond { a: (SiteIndex::left(c), "r"), b: (SiteIndex::a(c, 1), "l") });
        for col in 1..=n {
            let a = SiteIndex::a(c, col);
            if col < n {
                bonds.push(Bond { a: (a, "r"), b: (SiteIndex::a(c, col + 1), "l") });
            }
            let v = lattice.vertical_partner(a, 0);
            match v.kind {
                SiteKind::Pendant => bonds.push(Bond { a: (a, "d"), b: (v, "u") }),
                SiteKind::B if v.chain == c => bonds.push(Bond { a: (a, "d"), b: (v, "u") }),
                SiteKind::B => bonds.push(Bond { a: (v, "d"), b: (a, "u") }),
                _ => unreachable!("vertical partner is a pendant or B"),
            }
        }
        bonds.push(Bond { a: (SiteIndex::a(c, n), "r"), b: (SiteIndex::right(c, n), "l") });
    }
    let prefactor = re(0.5f64.sqrt().powi(bonds.len() as i32));
    Ok(TensorNetwork { lattice: lattice.clone(), sites, bonds, prefactor })
}

impl TensorNetwork {
    /// Physical dimension of the uncontracted sites.
    pub fn open_dim(&self) -> usize {
        self.sites
            .values()
            .filter(|t| !t.contracted)
            .map(|t| t.tensor.dim_of("p").unwrap_or(1))
            .fold(1usize, |a, b| a.saturating_mul(b))
    }

    /// Site tensors with bond legs renamed to shared labels and physical legs to `p<pos>`.
    pub fn labelled(&self) -> Vec<(SiteIndex, Tensor)> {
        let mut names: BTreeMap<(SiteIndex, &str), String> = BTreeMap::new();
        for (k, b) in self.bonds.iter().enumerate() {
            names.insert(b.a, format!("v{k}"));
            names.insert(b.b, format!("v{k}"));
        }
        self.sites
            .iter()
            .map(|(s, st)| {
                let mut t = st.tensor.clone();
                let legs = t.legs.clone();
                for leg in legs {
                    if leg == "p" {
                        let pos = self.lattice.position(s).expect("site");
                        t = t.rename("p", &format!("p{pos:04}"));
                    } else if let Some(n) = names.get(&(*s, leg.as_str())) {
                        t = t.rename(&leg, n);
                    }
                }
                (*s, t)
            })
            .collect()
    }

    /// Contract the whole network; physical legs ordered by site position.
    pub fn to_state_vector(&self, cap: usize) -> Result<Vec<C64>, TensorError> {
        let dim = self.open_dim();
        if dim > cap {
            return Err(TensorError::DimensionCap { dim, cap });
        }
        let mut acc = Tensor::scalar(self.prefactor);
        for (_, t) in self.column_major() {
            acc = acc.contract(&t);
        }
        let mut phys: Vec<String> = acc.legs.clone();
        phys.sort();
        let order: Vec<&str> = phys.iter().map(String::as_str).collect();
        Ok(acc.permuted(&order).data)
    }

    /// Labelled tensors in column-major order, which keeps the number of open
    /// bonds bounded by the number of chains plus vertical bonds.
    fn column_major(&self) -> Vec<(SiteIndex, Tensor)> {
        let mut ts = self.labelled();
        ts.sort_by_key(|(s, _)| (s.column, s.chain, s.kind, s.slot));
        ts
    }

    /// Squared norm of the (partially contracted) network, by a double-layer
    /// contraction that never expands the physical space.
    pub fn norm_sqr(&self) -> f64 {
        let mut acc = Tensor::scalar(re(self.prefactor.norm_sqr()));
        for (_, t) in self.column_major() {
            let mut bra = t.conj();
            let legs = bra.legs.clone();
            for leg in legs {
                if !leg.starts_with('p') {
                    bra = bra.rename(&leg, &format!("{leg}*"));
                }
            }
            acc = acc.contract(&t.contract(&bra));
        }
        assert!(acc.legs.is_empty(), "double layer left open legs");
        acc.data[0].re
    }

    /// Contract the physical index of `site` with `<bra|`.
    pub fn contract_bra(&self, site: SiteIndex, bra: &[C64]) -> Result<TensorNetwork, TensorError> {
        let st = self.sites.get(&site).ok_or(TensorError::UnknownSite(site))?;
        if st.contracted {
            return Err(TensorError::AlreadyContracted(site));
        }
        let d = st.tensor.dim_of("p").expect("physical leg");
        if bra.len() != d {
            return Err(TensorError::DimensionMismatch { expected: d, got: bra.len() });
        }
        let mut out = self.clone();
        let entry = out.sites.get_mut(&site).expect("site");
        entry.tensor = st.tensor.apply_bra("p", bra);
        entry.contracted = true;
        Ok(out)
    }

    /// Apply a local operator (e.g. a Kraus operator) to the physical index of `site`.
    pub fn apply_local(&self, site: SiteIndex, op: &DenseOperator) -> Result<TensorNetwork, TensorError> {
        let st = self.sites.get(&site).ok_or(TensorError::UnknownSite(site))?;
        if st.contracted {
            return Err(TensorError::AlreadyContracted(site));
        }
        let d = st.tensor.dim_of("p").expect("physical leg");
        if op.ncols() != d {
            return Err(TensorError::DimensionMismatch { expected: d, got: op.ncols() });
        }
        let mut out = self.clone();
        out.sites.get_mut(&site).expect("site").tensor = st.tensor.apply_op("p", op);
        Ok(out)
    }

    /// Multiply one site tensor by a scalar.
    pub fn scale_site(&mut self, site: SiteIndex, c: C64) {
        if let Some(st) = self.sites.get_mut(&site) {
            st.tensor = st.tensor.clone().scale(c);
        }
    }
}

/// Operator on a pair of bond legs read off a site tensor with fixed physical
/// index and fixed extra legs: `out[r, l]` for legs (`out_leg`, `in_leg`).
pub fn bond_operator(t: &Tensor, out_leg: &str, in_leg: &str) -> DenseOperator {
    let p = t.permuted(&[out_leg, in_leg]);
    DMatrix::from_row_slice(p.dims[0], p.dims[1], &p.data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::QuasiChainSpec;

    fn ket(k: usize) -> [C64; 2] {
        if k == 0 {
            [re(1.0), ZERO]
        } else {
            [ZERO, re(1.0)]
        }
    }

    #[test]
    fn permute_and_contract() {
        let a = Tensor::from_fn(&["i", "j"], &[2, 3], |x| re((x[0] * 3 + x[1]) as f64));
        let b = Tensor::from_fn(&["j", "k"], &[3, 2], |x| re((x[0] + 10 * x[1]) as f64));
        let c = a.contract(&b);
        assert_eq!(c.legs, vec!["i", "k"]);
        // c[1,1] = sum_j (3 + j) (j + 10)
        let expect: f64 = (0..3).map(|j| ((3 + j) * (j + 10)) as f64).sum();
        assert_eq!(c.get(&[1, 1]), re(expect));
        let at = a.permuted(&["j", "i"]);
        assert_eq!(at.get(&[2, 1]), a.get(&[1, 2]));
    }

    #[test]
    fn single_boundary_site_traced_to_zero() {
        let t = site_tensor(TensorKind::BoundaryRight);
        let v = t.apply_bra("l", &ket(0)).data;
        assert_eq!(v, vec![re(1.0), ZERO]);
    }

    #[test]
    fn contracted_tensors_match_printed_up_to_sign() {
        let (au, ad, b) = published_site_tensors();
        let close = |x: &Tensor, y: &Tensor| {
            let y = y.permuted(&x.legs.iter().map(String::as_str).collect::<Vec<_>>());
            let plus = x.data.iter().zip(&y.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            let minus = x.data.iter().zip(&y.data).map(|(a, b)| (a + b).norm()).fold(0.0, f64::max);
            plus.min(minus)
        };
        assert!(close(&constructed_a_up(), &au) < 1e-15);
        assert!(close(&constructed_a_down(), &ad) < 1e-15);
        assert!(close(&constructed_b(), &b) < 1e-15);
    }

    #[test]
    fn contract_bra_twice_fails() {
        let net = build_ground_network(&Lattice::chain(&QuasiChainSpec::spin32(1)).unwrap()).unwrap();
        let s = SiteIndex::left(0);
        let once = net.contract_bra(s, &ket(0)).unwrap();
        assert_eq!(once.contract_bra(s, &ket(0)).unwrap_err(), TensorError::AlreadyContracted(s));
    }

    #[test]
    fn spin2_unsupported() {
        let lat = Lattice::chain(&QuasiChainSpec::spin2(1)).unwrap();
        assert_eq!(build_ground_network(&lat).unwrap_err(), TensorError::Unsupported);
    }
}
