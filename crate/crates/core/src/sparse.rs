//! Compressed-row complex operators on product spaces, with optional
//! conserved-charge labels used for sector blocking.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::linalg::{digits, DenseOperator, StateVector, C64, ZERO};

/// Entries below this magnitude are treated as numerical noise when building.
pub const DROP_TOL: f64 = 1e-14;

/// An operator on a few sites of a product space, in the order listed.
#[derive(Clone, Debug)]
pub struct LocalTerm {
    pub sites: Vec<usize>,
    pub op: DenseOperator,
}

/// Per-site, per-level charge vectors of a product space.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChargeLayout {
    pub per_site: Vec<Vec<Vec<i32>>>,
}

impl ChargeLayout {
    pub fn n_components(&self) -> usize {
        self.per_site.first().and_then(|s| s.first()).map_or(0, Vec::len)
    }

    pub fn charge_of(&self, dig: &[usize]) -> Vec<i32> {
        let mut q = vec![0; self.n_components()];
        for (site, &lvl) in dig.iter().enumerate() {
            for (k, v) in self.per_site[site][lvl].iter().enumerate() {
                q[k] += v;
            }
        }
        q
    }
}

/// Sector id of every basis state plus the label of each sector (sorted labels).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SectorLabels {
    pub labels: Vec<Vec<i32>>,
    pub of_state: Vec<u32>,
}

impl SectorLabels {
    pub fn from_layout(dims: &[usize], layout: &ChargeLayout) -> Self {
        let total: usize = dims.iter().product();
        let charges: Vec<Vec<i32>> = (0..total).map(|x| layout.charge_of(&digits(x, dims))).collect();
        let mut ids = BTreeMap::new();
        for q in &charges {
            let next = ids.len();
            ids.entry(q.clone()).or_insert(next);
        }
        // renumber so ids follow label order
        let labels: Vec<Vec<i32>> = ids.keys().cloned().collect();
        let rank: BTreeMap<&Vec<i32>, u32> = labels.iter().enumerate().map(|(k, l)| (l, k as u32)).collect();
        let of_state = charges.iter().map(|q| rank[q]).collect();
        SectorLabels { labels, of_state }
    }

    /// Basis indices of each sector, in label order.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.labels.len()];
        for (x, &s) in self.of_state.iter().enumerate() {
            out[s as usize].push(x);
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct SparseOperator {
    dim: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<u32>,
    values: Vec<C64>,
    /// Asserted hermiticity (entry-level conjugate symmetry).
    pub hermitian: bool,
    /// Conserved charges, when the operator is block diagonal in them.
    pub sectors: Option<SectorLabels>,
}

impl SparseOperator {
    /// Sum of embedded local terms, scaled by `scale`.
    pub fn from_terms(dims: &[usize], terms: &[LocalTerm], scale: f64) -> Self {
        let dim: usize = dims.iter().product();
        assert!(dim < u32::MAX as usize, "dimension exceeds index range");
        let mut strides = vec![1usize; dims.len()];
        for k in (0..dims.len().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * dims[k + 1];
        }
        struct Prepared {
            sites: Vec<usize>,
            local_dims: Vec<usize>,
            rows: Vec<Vec<(usize, C64)>>,
        }
        let prepared: Vec<Prepared> = terms
            .iter()
            .map(|t| {
                let local_dims: Vec<usize> = t.sites.iter().map(|&s| dims[s]).collect();
                let n: usize = local_dims.iter().product();
                assert_eq!(t.op.nrows(), n, "term dimension does not match its sites");
                let rows = (0..n)
                    .map(|r| {
                        (0..n)
                            .filter_map(|c| {
                                let v = t.op[(r, c)] * scale;
                                (v.norm() > DROP_TOL).then_some((c, v))
                            })
                            .collect()
                    })
                    .collect();
                Prepared { sites: t.sites.clone(), local_dims, rows }
            })
            .collect();

        let rows: Vec<Vec<(u32, C64)>> = (0..dim)
            .into_par_iter()
            .map(|x| {
                let mut entries: Vec<(u32, C64)> = Vec::new();
                for p in &prepared {
                    let mut local = 0usize;
                    let mut base = x;
                    let mut ldig = Vec::with_capacity(p.sites.len());
                    for (&s, &d) in p.sites.iter().zip(&p.local_dims) {
                        let digit = (x / strides[s]) % dims[s];
                        local = local * d + digit;
                        ldig.push(digit);
                        base -= digit * strides[s];
                    }
                    for &(c, v) in &p.rows[local] {
                        let mut y = base;
                        let mut rem = c;
                        for k in (0..p.sites.len()).rev() {
                            y += (rem % p.local_dims[k]) * strides[p.sites[k]];
                            rem /= p.local_dims[k];
                        }
                        entries.push((y as u32, v));
                    }
                }
                entries.sort_by_key(|e| e.0);
                let mut merged: Vec<(u32, C64)> = Vec::with_capacity(entries.len());
                for (c, v) in entries {
                    match merged.last_mut() {
                        Some(last) if last.0 == c => last.1 += v,
                        _ => merged.push((c, v)),
                    }
                }
                merged.retain(|e| e.1.norm() > DROP_TOL);
                merged
            })
            .collect();
        Self::from_rows(dim, rows)
    }

    fn from_rows(dim: usize, rows: Vec<Vec<(u32, C64)>>) -> Self {
        let mut row_ptr = Vec::with_capacity(dim + 1);
        row_ptr.push(0);
        let nnz: usize = rows.iter().map(Vec::len).sum();
        let mut col_idx = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        for r in rows {
            for (c, v) in r {
                col_idx.push(c);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        let mut op = SparseOperator { dim, row_ptr, col_idx, values, hermitian: false, sectors: None };
        op.hermitian = op.hermiticity_defect() <= 1e-12;
        op
    }

    /// Build from (row, col, value) triplets; duplicates are summed.
    pub fn from_triplets(dim: usize, triplets: &[(usize, usize, C64)]) -> Self {
        let mut rows: Vec<Vec<(u32, C64)>> = vec![Vec::new(); dim];
        for &(r, c, v) in triplets {
            rows[r].push((c as u32, v));
        }
        for r in rows.iter_mut() {
            r.sort_by_key(|e| e.0);
            let mut m: Vec<(u32, C64)> = Vec::with_capacity(r.len());
            for &(c, v) in r.iter() {
                match m.last_mut() {
                    Some(last) if last.0 == c => last.1 += v,
                    _ => m.push((c, v)),
                }
            }
            *r = m;
        }
        Self::from_rows(dim, rows)
    }

    pub fn from_dense(m: &DenseOperator) -> Self {
        let rows = (0..m.nrows())
            .map(|r| {
                (0..m.ncols())
                    .filter_map(|c| (m[(r, c)] != ZERO).then_some((c as u32, m[(r, c)])))
                    .collect()
            })
            .collect();
        Self::from_rows(m.nrows(), rows)
    }

    pub fn identity(dim: usize) -> Self {
        let rows = (0..dim).map(|r| vec![(r as u32, C64::new(1.0, 0.0))]).collect();
        Self::from_rows(dim, rows)
    }

    /// Attach charge labels; returns an error description if any entry couples sectors.
    pub fn with_sectors(mut self, labels: SectorLabels) -> Result<Self, String> {
        assert_eq!(labels.of_state.len(), self.dim);
        for r in 0..self.dim {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = self.col_idx[k] as usize;
                if labels.of_state[r] != labels.of_state[c] {
                    return Err(format!("entry ({r}, {c}) couples different charge sectors"));
                }
            }
        }
        self.sectors = Some(labels);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn conserves_charge(&self) -> bool {
        self.sectors.is_some()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (self.col_idx[k] as usize, self.values[k]))
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        self.row(r).find(|e| e.0 == c).map_or(ZERO, |e| e.1)
    }

    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![ZERO; self.dim];
        self.apply_into(x, &mut y);
        y
    }

    pub fn apply_into(&self, x: &[C64], y: &mut [C64]) {
        assert_eq!(x.len(), self.dim);
        let work = |(r, out): (usize, &mut C64)| {
            let mut acc = ZERO;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[k] * x[self.col_idx[k] as usize];
            }
            *out = acc;
        };
        if self.dim >= 4096 {
            y.par_iter_mut().enumerate().for_each(work);
        } else {
            y.iter_mut().enumerate().for_each(work);
        }
    }

    pub fn apply_vec(&self, x: &StateVector) -> StateVector {
        DVector::from_vec(self.apply(x.as_slice()))
    }

    pub fn to_dense(&self) -> DenseOperator {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for r in 0..self.dim {
            for (c, v) in self.row(r) {
                m[(r, c)] += v;
            }
        }
        m
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        out
    }

    fn combine(&self, other: &Self, sign: f64) -> Self {
        assert_eq!(self.dim, other.dim);
        let rows = (0..self.dim)
            .map(|r| {
                let mut e: Vec<(u32, C64)> = self.row(r).map(|(c, v)| (c as u32, v)).collect();
                e.extend(other.row(r).map(|(c, v)| (c as u32, v * sign)));
                e.sort_by_key(|x| x.0);
                let mut m: Vec<(u32, C64)> = Vec::with_capacity(e.len());
                for (c, v) in e {
                    match m.last_mut() {
                        Some(last) if last.0 == c => last.1 += v,
                        _ => m.push((c, v)),
                    }
                }
                m
            })
            .collect();
        let mut out = Self::from_rows(self.dim, rows);
        if self.sectors == other.sectors {
            out.sectors = self.sectors.clone();
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        self.combine(other, 1.0)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.combine(other, -1.0)
    }

    /// Sparse product `self * other`.
    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        let rows = (0..self.dim)
            .into_par_iter()
            .map(|r| {
                let mut acc: BTreeMap<u32, C64> = BTreeMap::new();
                for (k, a) in self.row(r) {
                    for (c, b) in other.row(k) {
                        *acc.entry(c as u32).or_insert(ZERO) += a * b;
                    }
                }
                acc.into_iter().filter(|e| e.1.norm() > 0.0).collect()
            })
            .collect();
        Self::from_rows(self.dim, rows)
    }

    pub fn commutator(&self, other: &Self) -> Self {
        self.matmul(other).sub(&other.matmul(self))
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn hermiticity_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for r in 0..self.dim {
            for (c, v) in self.row(r) {
                worst = worst.max((v - self.get(c, r).conj()).norm());
            }
        }
        worst
    }

    /// True when every stored entry is on the diagonal.
    pub fn is_diagonal(&self) -> bool {
        (0..self.dim).all(|r| self.row(r).all(|(c, v)| c == r || v.norm() <= DROP_TOL))
    }

    /// Restriction to the listed basis states (rows and columns).
    pub fn restrict(&self, states: &[usize]) -> SparseOperator {
        let mut map = vec![u32::MAX; self.dim];
        for (k, &s) in states.iter().enumerate() {
            map[s] = k as u32;
        }
        let rows = states
            .iter()
            .map(|&r| {
                self.row(r)
                    .filter_map(|(c, v)| (map[c] != u32::MAX).then_some((map[c], v)))
                    .collect()
            })
            .collect();
        let mut out = Self::from_rows(states.len(), rows);
        out.hermitian = self.hermitian;
        out
    }

    /// `<x|A|x>` for a normalised `x` (real part).
    pub fn expectation(&self, x: &[C64]) -> f64 {
        let y = self.apply(x);
        let num: C64 = x.iter().zip(&y).map(|(a, b)| a.conj() * b).sum();
        let den: f64 = x.iter().map(|a| a.norm_sqr()).sum();
        num.re / den
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{embed_dense, from_real, max_norm};

    #[test]
    fn from_terms_matches_dense_embedding() {
        let dims = [2, 3, 2];
        let a = from_real(4, 4, &[1.0, 2.0, 0.0, 0.0, 2.0, 0.0, 0.0, 1.0, 0.0, 0.0, 3.0, 0.0, 0.0, 1.0, 0.0, 5.0]);
        let t = LocalTerm { sites: vec![2, 0], op: a.clone() };
        let sp = SparseOperator::from_terms(&dims, &[t], 2.0);
        let dense = embed_dense(&a, &[2, 0], &dims) * crate::linalg::re(2.0);
        assert!(max_norm(&(sp.to_dense() - dense)) < 1e-14);
    }

    #[test]
    fn algebra_roundtrip() {
        let m = from_real(3, 3, &[1.0, 2.0, 0.0, 2.0, 0.0, 1.0, 0.0, 1.0, 4.0]);
        let s = SparseOperator::from_dense(&m);
        assert!(s.hermitian);
        assert!(max_norm(&(s.matmul(&s).to_dense() - &m * &m)) < 1e-13);
        assert!(s.commutator(&s).max_abs() < 1e-13);
        let sub = s.restrict(&[0, 2]);
        assert_eq!(sub.get(1, 1), crate::linalg::re(4.0));
        assert_eq!(sub.get(0, 1), ZERO);
    }

    #[test]
    fn sector_labels_group_states() {
        let layout = ChargeLayout { per_site: vec![vec![vec![1], vec![-1]], vec![vec![1], vec![-1]]] };
        let s = SectorLabels::from_layout(&[2, 2], &layout);
        assert_eq!(s.labels, vec![vec![-2], vec![0], vec![2]]);
        assert_eq!(s.members(), vec![vec![3], vec![1, 2], vec![0]]);
    }
}
