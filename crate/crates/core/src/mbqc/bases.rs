//! Measurement bases on spin-3/2 and spin-1/2 sites, in descending-m order
//! (+3/2, +1/2, -1/2, -3/2) and (+1/2, -1/2).

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_1_SQRT_2, PI};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::linalg::{c, eigh, identity, re, DenseOperator, C64, ZERO};
use crate::spin_algebra::{spin_operators, HalfInt};

/// Axis of the filter and of the single-qubit protocol.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Z,
    X,
}

impl Axis {
    pub fn other(self) -> Axis {
        match self {
            Axis::Z => Axis::X,
            Axis::X => Axis::Z,
        }
    }
}

/// Orthonormal basis; outcome `k` corresponds to `vectors[k]`.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementBasis {
    pub name: String,
    pub vectors: Vec<Vec<C64>>,
}

/// Two-outcome filter POVM given by Kraus operators.
#[derive(Clone, Debug, PartialEq)]
pub struct FilterPovm {
    pub name: String,
    pub kraus: Vec<DenseOperator>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum CatalogEntry {
    Basis(MeasurementBasis),
    Povm(FilterPovm),
}

impl MeasurementBasis {
    pub fn new(name: &str, vectors: Vec<Vec<C64>>) -> Self {
        MeasurementBasis { name: name.to_string(), vectors }
    }

    pub fn dim(&self) -> usize {
        self.vectors.first().map_or(0, Vec::len)
    }

    /// Largest deviation of `sum_k |v_k><v_k|` from the identity, or of the
    /// Gram matrix from the identity, whichever is larger.
    pub fn completeness_defect(&self) -> f64 {
        let d = self.dim();
        let mut gram: f64 = 0.0;
        for (i, a) in self.vectors.iter().enumerate() {
            for (j, b) in self.vectors.iter().enumerate() {
                let ov: C64 = a.iter().zip(b).map(|(x, y)| x.conj() * y).sum();
                let target = if i == j { 1.0 } else { 0.0 };
                gram = gram.max((ov - re(target)).norm());
            }
        }
        let mut sum = DMatrix::from_element(d, d, ZERO);
        for v in &self.vectors {
            for r in 0..d {
                for col in 0..d {
                    sum[(r, col)] += v[r] * v[col].conj();
                }
            }
        }
        let res = (sum - identity(d)).iter().map(|x| x.norm()).fold(0.0, f64::max);
        gram.max(res)
    }

    /// Basis `{op v_k}`.
    pub fn transformed(&self, name: &str, op: &DenseOperator) -> MeasurementBasis {
        let vectors = self
            .vectors
            .iter()
            .map(|v| {
                let col = op * nalgebra::DVector::from_column_slice(v);
                col.iter().copied().collect()
            })
            .collect();
        MeasurementBasis::new(name, vectors)
    }
}

impl FilterPovm {
    /// Largest entry of `sum_k K_k^dag K_k - I`.
    pub fn completeness_defect(&self) -> f64 {
        let d = self.kraus[0].ncols();
        let sum = self.kraus.iter().fold(DMatrix::from_element(d, d, ZERO), |acc, k| acc + k.adjoint() * k);
        (sum - identity(d)).iter().map(|x| x.norm()).fold(0.0, f64::max)
    }
}

fn ket4(m_twice: i32) -> Vec<C64> {
    let idx = HalfInt::THREE_HALVES.level_index(HalfInt::from_twice(m_twice)).expect("spin-3/2 level");
    let mut v = vec![ZERO; 4];
    v[idx] = re(1.0);
    v
}

fn combo(a: C64, x: &[C64], b: C64, y: &[C64]) -> Vec<C64> {
    x.iter().zip(y).map(|(p, q)| a * p + b * q).collect()
}

/// `R = exp(-i pi/2 S_y)` on spin 3/2: maps the S_z eigenbasis onto the S_x eigenbasis.
pub fn sx_rotation() -> DenseOperator {
    let sy = spin_operators(HalfInt::THREE_HALVES).expect("spin 3/2").y;
    let (vals, vecs) = eigh(&sy);
    let phases = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        vals.len(),
        vals.iter().map(|&l| C64::from_polar(1.0, -PI / 2.0 * l)),
    ));
    &vecs * phases * vecs.adjoint()
}

/// Qubit rotation `exp(-i pi/4 Y)`, which carries Z onto X.
pub fn qubit_ry_half_pi() -> DenseOperator {
    crate::linalg::from_real(2, 2, &[FRAC_1_SQRT_2, -FRAC_1_SQRT_2, FRAC_1_SQRT_2, FRAC_1_SQRT_2])
}

pub fn z_basis() -> MeasurementBasis {
    MeasurementBasis::new("z", [3, 1, -1, -3].iter().map(|&m| ket4(m)).collect())
}

pub fn qubit_z_basis() -> MeasurementBasis {
    MeasurementBasis::new("z2", vec![vec![re(1.0), ZERO], vec![ZERO, re(1.0)]])
}

pub fn qubit_x_basis() -> MeasurementBasis {
    let h = FRAC_1_SQRT_2;
    MeasurementBasis::new("x2", vec![vec![re(h), re(h)], vec![re(h), re(-h)]])
}

/// Canonical vertical states of one type: |0>,|1> for Z and |+>,|-> for X.
pub fn vertical_states(axis: Axis) -> MeasurementBasis {
    match axis {
        Axis::Z => qubit_z_basis(),
        Axis::X => qubit_x_basis(),
    }
}

/// `|mu_s>` for s = 0, 1 followed by `|nu_s>`.
pub fn mu_nu_basis() -> MeasurementBasis {
    let h = re(FRAC_1_SQRT_2);
    let mut v = Vec::new();
    for s in [1.0, -1.0] {
        v.push(combo(h, &ket4(-3), h * s, &ket4(1)));
    }
    for s in [1.0, -1.0] {
        v.push(combo(h, &ket4(-1), h * s, &ket4(3)));
    }
    MeasurementBasis::new("mu_nu", v)
}

/// `|mu'_s>` followed by `|nu'_s>`.
pub fn mu_nu_prime_basis() -> MeasurementBasis {
    let h = re(FRAC_1_SQRT_2);
    let mut v = Vec::new();
    for s in [1.0, -1.0] {
        v.push(combo(h, &ket4(-1), c(0.0, s * FRAC_1_SQRT_2), &ket4(1)));
    }
    for s in [1.0, -1.0] {
        v.push(combo(h, &ket4(-3), c(0.0, s * FRAC_1_SQRT_2), &ket4(3)));
    }
    MeasurementBasis::new("mu_nu_prime", v)
}

/// Real-coefficient companion of `mu_nu_prime`, used on B when the two A
/// outcomes select different Paulis.
pub fn real_companion_basis() -> MeasurementBasis {
    let h = re(FRAC_1_SQRT_2);
    let mut v = Vec::new();
    for s in [1.0, -1.0] {
        v.push(combo(h, &ket4(-1), h * s, &ket4(1)));
    }
    for s in [1.0, -1.0] {
        v.push(combo(h, &ket4(-3), h * s, &ket4(3)));
    }
    MeasurementBasis::new("real_companion", v)
}

/// `{(mu_0 +- nu_0)/sqrt2, (mu_1 +- nu_1)/sqrt2}`.
pub fn beta_basis() -> MeasurementBasis {
    let mn = mu_nu_basis();
    let h = re(FRAC_1_SQRT_2);
    let v = vec![
        combo(h, &mn.vectors[0], h, &mn.vectors[2]),
        combo(h, &mn.vectors[0], -h, &mn.vectors[2]),
        combo(h, &mn.vectors[1], h, &mn.vectors[3]),
        combo(h, &mn.vectors[1], -h, &mn.vectors[3]),
    ];
    MeasurementBasis::new("beta", v)
}

/// `{(|+3/2> + |-3/2>)/sqrt2, (|+3/2> - |-3/2>)/sqrt2, |+1/2>, |-1/2>}`.
pub fn alpha_basis() -> MeasurementBasis {
    let h = re(FRAC_1_SQRT_2);
    MeasurementBasis::new(
        "alpha",
        vec![combo(h, &ket4(3), h, &ket4(-3)), combo(h, &ket4(3), -h, &ket4(-3)), ket4(1), ket4(-1)],
    )
}

/// `{|+3/2>, (e^{-i theta}|-3/2> - |+1/2>)/sqrt2, -(e^{-i theta}|-3/2> + |+1/2>)/sqrt2, |-1/2>}`.
pub fn alpha_z_basis(theta: f64) -> MeasurementBasis {
    let h = FRAC_1_SQRT_2;
    let e = C64::from_polar(h, -theta);
    MeasurementBasis::new(
        "alpha_z",
        vec![ket4(3), combo(e, &ket4(-3), re(-h), &ket4(1)), combo(-e, &ket4(-3), re(-h), &ket4(1)), ket4(-1)],
    )
}

/// Filter `{L, Lbar}` in the S_z eigenbasis.
pub fn filter_z() -> FilterPovm {
    let s3 = 1.0 / 3f64.sqrt();
    let l = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![re(s3), re(1.0), re(1.0), re(s3)]));
    let t = (2.0f64 / 3.0).sqrt();
    let lbar = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![re(t), ZERO, ZERO, re(t)]));
    FilterPovm { name: "filter_z".into(), kraus: vec![l, lbar] }
}

/// Filter in the S_x eigenbasis: `R L R^dag`, `R Lbar R^dag`.
pub fn filter_x() -> FilterPovm {
    let r = sx_rotation();
    let z = filter_z();
    FilterPovm { name: "filter_x".into(), kraus: z.kraus.iter().map(|k| &r * k * r.adjoint()).collect() }
}

pub fn filter(axis: Axis) -> FilterPovm {
    match axis {
        Axis::Z => filter_z(),
        Axis::X => filter_x(),
    }
}

/// Frame change for an axis: identity for Z, `R` for X.
pub fn axis_rotation(axis: Axis) -> DenseOperator {
    match axis {
        Axis::Z => identity(4),
        Axis::X => sx_rotation(),
    }
}

/// Every basis and filter by name. `theta` feeds `alpha_z` and `alpha_x`.
pub fn basis_catalog(theta: f64) -> BTreeMap<String, CatalogEntry> {
    let r = sx_rotation();
    let mut out = BTreeMap::new();
    let bases = [
        z_basis(),
        qubit_z_basis(),
        qubit_x_basis(),
        mu_nu_basis(),
        mu_nu_prime_basis(),
        real_companion_basis(),
        beta_basis(),
        alpha_basis(),
        alpha_z_basis(theta),
        z_basis().transformed("sx", &r),
        alpha_basis().transformed("alpha_x", &r),
        alpha_z_basis(theta).transformed("alpha_z_x", &r),
    ];
    for b in bases {
        out.insert(b.name.clone(), CatalogEntry::Basis(b));
    }
    for f in [filter_z(), filter_x()] {
        out.insert(f.name.clone(), CatalogEntry::Povm(f));
    }
    out
}
