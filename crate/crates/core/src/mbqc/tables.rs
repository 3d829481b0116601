//! Outcome tables derived by exhaustive contraction of the site tensors.
//!
//! The committed artifact `data/outcome_tables.json` is embedded at compile
//! time; [`OutcomeTables::generate`] rebuilds it from the tensors and
//! [`verify_committed`] checks the two agree byte for byte.

use std::sync::OnceLock;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use super::bases::{
    alpha_basis, alpha_z_basis, axis_rotation, filter, mu_nu_basis, mu_nu_prime_basis, qubit_ry_half_pi,
    real_companion_basis, vertical_states, z_basis, Axis, MeasurementBasis,
};
use super::pauli::{proportional, rx, rz, Gate, Pauli};
use crate::linalg::{c, identity, kron, re, DenseOperator, C64, ZERO};
use crate::tensor_net::{constructed_a_down, constructed_a_up, constructed_b, site_tensor, Tensor, TensorKind};

pub const TABLE_VERSION: u32 = 1;
const COMMITTED: &str = include_str!("../../data/outcome_tables.json");
/// Angles at which rotation outcomes are classified.
pub const PROBE_ANGLES: [f64; 3] = [0.3, 1.1, 2.7];
const ZERO_TOL: f64 = 1e-12;
const MATCH_TOL: f64 = 1e-10;

#[derive(Debug, Error, PartialEq)]
pub enum TableError {
    #[error("no consistent table entry for {0}")]
    Unclassifiable(String),
    #[error("committed tables differ from regenerated tables at {path}: committed {committed}, regenerated {regenerated}")]
    Mismatch { path: String, committed: String, regenerated: String },
    #[error("tables are not valid JSON: {0}")]
    Parse(String),
}

/// Unit phase of a monomial matrix entry.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    #[serde(rename = "+1")]
    PlusOne,
    #[serde(rename = "-1")]
    MinusOne,
    #[serde(rename = "+i")]
    PlusI,
    #[serde(rename = "-i")]
    MinusI,
}

impl Phase {
    pub fn value(self) -> C64 {
        match self {
            Phase::PlusOne => re(1.0),
            Phase::MinusOne => re(-1.0),
            Phase::PlusI => c(0.0, 1.0),
            Phase::MinusI => c(0.0, -1.0),
        }
    }

    fn nearest(z: C64) -> Option<Phase> {
        [Phase::PlusOne, Phase::MinusOne, Phase::PlusI, Phase::MinusI].into_iter().find(|p| (p.value() - z).norm() < 1e-9)
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonomialEntry {
    pub row: usize,
    pub col: usize,
    pub phase: Phase,
}

/// What an outcome does to the logical qubit.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum Action {
    /// Zero probability.
    Never,
    /// Target operation done, with this byproduct.
    Apply { pauli: Pauli },
    /// Only a byproduct; the operation must be repeated.
    Retry { pauli: Pauli },
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum ReadoutAction {
    Never,
    /// Bond was in `|bit>` and is left in `|post>`.
    Bit { bit: u8, post: u8 },
    Retry { pauli: Pauli },
}

/// Filter passed, vertical qubit in canonical state `vertical` of type `axis`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SingleQubitEntry {
    pub axis: Axis,
    pub vertical: u8,
    /// Measurement basis is `R_axis Q alpha_z(theta)`.
    pub q: Vec<MonomialEntry>,
    pub outcomes: Vec<Action>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReadoutEntry {
    pub vertical: u8,
    /// Measurement basis is `Q z`.
    pub q: Vec<MonomialEntry>,
    pub outcomes: Vec<ReadoutAction>,
}

/// Filter failed: vertical qubit of type `vertical_axis`, A measured in `R_axis alpha`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoveryEntry {
    pub axis: Axis,
    pub vertical_axis: Axis,
    pub vertical: u8,
    pub outcomes: Vec<Action>,
}

/// Outcome `a` on the upper A and `d` on the lower A, both in `mu_nu`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntangleEntry {
    pub a: u8,
    pub d: u8,
    /// Gate on (upper, lower) when B is then measured in `b_basis`.
    pub gate: Gate,
    pub b_basis: String,
    /// Byproducts (upper, lower) per B outcome in `b_basis`.
    pub success: Vec<(Pauli, Pauli)>,
    /// Byproducts per B outcome in the z basis.
    pub failure: Vec<(Pauli, Pauli)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitEntry {
    pub outcome: u8,
    pub bond_bit: u8,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutcomeTables {
    pub version: u32,
    pub init: Vec<InitEntry>,
    pub single_qubit: Vec<SingleQubitEntry>,
    pub readout: Vec<ReadoutEntry>,
    pub recovery: Vec<RecoveryEntry>,
    pub entangle: Vec<EntangleEntry>,
}

pub fn monomial_matrix(entries: &[MonomialEntry]) -> DenseOperator {
    let mut q = DMatrix::from_element(4, 4, ZERO);
    for e in entries {
        q[(e.row, e.col)] = e.phase.value();
    }
    q
}

/// Canonical filtered tensor for vertical |0>: `K[+3/2] = 0`,
/// `K[+1/2] = -|1><0|`, `K[-1/2] = Z`, `K[-3/2] = |0><1|`, as `[r, l]` matrices.
pub fn canonical_tensor() -> Vec<DenseOperator> {
    let m = |v: [f64; 4]| crate::linalg::from_real(2, 2, &v);
    vec![m([0.0, 0.0, 0.0, 0.0]), m([0.0, 0.0, -1.0, 0.0]), m([1.0, 0.0, 0.0, -1.0]), m([0.0, 1.0, 0.0, 0.0])]
}

/// Bond operator `[r, l]` obtained from a tensor with legs `(l, r)` left.
fn bond_matrix(t: &Tensor) -> DenseOperator {
    let p = t.permuted(&["r", "l"]);
    DMatrix::from_row_slice(2, 2, &p.data)
}

/// Filtered upper-A tensor with the vertical leg contracted against `v`:
/// one `[r, l]` operator per physical level.
pub fn effective_tensor(axis: Axis, filter_outcome: usize, v: &[C64]) -> Vec<DenseOperator> {
    let k = &filter(axis).kraus[filter_outcome];
    let a = constructed_a_up().apply_op("p", k);
    let vert = Tensor::new(&["d"], &[2], v.to_vec());
    let e = a.contract(&vert);
    (0..4)
        .map(|p| {
            let mut bra = vec![ZERO; 4];
            bra[p] = re(1.0);
            bond_matrix(&e.apply_bra("p", &bra))
        })
        .collect()
}

/// `sum_p conj(phi_p) E[p]`.
pub fn induced(e: &[DenseOperator], phi: &[C64]) -> DenseOperator {
    e.iter().zip(phi).fold(DMatrix::from_element(2, 2, ZERO), |acc, (m, x)| acc + m * x.conj())
}

fn match_monomial(e: &[DenseOperator], vm: &DenseOperator) -> Option<Vec<MonomialEntry>> {
    let k = canonical_tensor();
    let et: Vec<DenseOperator> = e.iter().map(|m| vm.adjoint() * m * vm).collect();
    let ne: f64 = et.iter().map(|m| m.norm_squared()).sum::<f64>().sqrt();
    let nk: f64 = k.iter().map(|m| m.norm_squared()).sum::<f64>().sqrt();
    let lambda = ne / nk;
    let mut used = [false; 4];
    let mut out = Vec::new();
    for (s, m) in et.iter().enumerate() {
        let mut found = None;
        for (t, kt) in k.iter().enumerate() {
            if used[t] {
                continue;
            }
            if kt.norm() < ZERO_TOL {
                if m.norm() < 1e-9 {
                    found = Some((t, Phase::PlusOne));
                    break;
                }
                continue;
            }
            let ov: C64 = kt.iter().zip(m.iter()).map(|(a, b)| a.conj() * b).sum::<C64>() / kt.norm_squared();
            let resid = (m - kt * ov).norm();
            if resid < 1e-9 * lambda.max(1.0) {
                if let Some(p) = Phase::nearest(ov / lambda) {
                    found = Some((t, p));
                    break;
                }
            }
        }
        let (t, phase) = found?;
        used[t] = true;
        out.push(MonomialEntry { row: s, col: t, phase });
    }
    Some(out)
}

/// Basis `R_axis Q alpha_z(theta)` for a single-qubit entry.
pub fn rotation_basis(entry: &SingleQubitEntry, theta: f64) -> MeasurementBasis {
    let op = axis_rotation(entry.axis) * monomial_matrix(&entry.q);
    alpha_z_basis(theta).transformed("alpha_z_frame", &op)
}

pub fn readout_basis(entry: &ReadoutEntry) -> MeasurementBasis {
    z_basis().transformed("z_frame", &monomial_matrix(&entry.q))
}

pub fn recovery_basis(axis: Axis) -> MeasurementBasis {
    alpha_basis().transformed(if axis == Axis::Z { "alpha" } else { "alpha_x" }, &axis_rotation(axis))
}

fn target(axis: Axis, theta: f64) -> DenseOperator {
    match axis {
        Axis::Z => rz(theta),
        Axis::X => rx(theta),
    }
}

fn classify_pauli(w: &DenseOperator, g: &DenseOperator) -> Option<Pauli> {
    Pauli::ALL.into_iter().find(|p| proportional(w, &(p.matrix() * g), MATCH_TOL))
}

fn single_entry(axis: Axis, vertical: u8) -> Result<SingleQubitEntry, TableError> {
    let label = format!("single_qubit axis={axis:?} vertical={vertical}");
    let v = &vertical_states(axis).vectors[vertical as usize];
    let rf = axis_rotation(axis);
    let e = effective_tensor(axis, 0, v);
    // operators seen through the frame basis R|t>
    let erot: Vec<DenseOperator> = (0..4)
        .map(|t| {
            let col: Vec<C64> = (0..4).map(|s| rf[(s, t)]).collect();
            induced(&e, &col)
        })
        .collect();
    let vm = match axis {
        Axis::Z => identity(2),
        Axis::X => qubit_ry_half_pi(),
    };
    let q = match_monomial(&erot, &vm).ok_or_else(|| TableError::Unclassifiable(label.clone()))?;
    let mut entry = SingleQubitEntry { axis, vertical, q, outcomes: vec![] };
    for k in 0..4 {
        let ws: Vec<DenseOperator> = PROBE_ANGLES
            .iter()
            .map(|&th| induced(&e, &rotation_basis(&entry, th).vectors[k]))
            .collect();
        let action = if ws.iter().all(|w| w.norm() < ZERO_TOL) {
            Action::Never
        } else if let Some(p) = classify_pauli(&ws[0], &target(axis, PROBE_ANGLES[0]))
            .filter(|p| ws.iter().zip(PROBE_ANGLES).all(|(w, th)| proportional(w, &(p.matrix() * target(axis, th)), MATCH_TOL)))
        {
            Action::Apply { pauli: p }
        } else if let Some(p) = classify_pauli(&ws[0], &identity(2))
            .filter(|p| ws.iter().all(|w| proportional(w, &p.matrix(), MATCH_TOL)))
        {
            Action::Retry { pauli: p }
        } else {
            return Err(TableError::Unclassifiable(format!("{label} outcome={k}")));
        };
        entry.outcomes.push(action);
    }
    Ok(entry)
}

fn readout_entry(vertical: u8) -> Result<ReadoutEntry, TableError> {
    let label = format!("readout vertical={vertical}");
    let v = &vertical_states(Axis::Z).vectors[vertical as usize];
    let e = effective_tensor(Axis::Z, 0, v);
    let q = match_monomial(&e, &identity(2)).ok_or_else(|| TableError::Unclassifiable(label.clone()))?;
    let mut entry = ReadoutEntry { vertical, q, outcomes: vec![] };
    let basis = readout_basis(&entry);
    for k in 0..4 {
        let w = induced(&e, &basis.vectors[k]);
        let action = if w.norm() < ZERO_TOL {
            ReadoutAction::Never
        } else if let Some(p) = classify_pauli(&w, &identity(2)) {
            ReadoutAction::Retry { pauli: p }
        } else {
            let mut found = None;
            for post in 0..2u8 {
                for bit in 0..2u8 {
                    let mut proj = DMatrix::from_element(2, 2, ZERO);
                    proj[(post as usize, bit as usize)] = re(1.0);
                    if proportional(&w, &proj, MATCH_TOL) {
                        found = Some(ReadoutAction::Bit { bit, post });
                    }
                }
            }
            found.ok_or_else(|| TableError::Unclassifiable(format!("{label} outcome={k}")))?
        };
        entry.outcomes.push(action);
    }
    Ok(entry)
}

fn recovery_entry(axis: Axis, vertical_axis: Axis, vertical: u8) -> Option<RecoveryEntry> {
    let v = &vertical_states(vertical_axis).vectors[vertical as usize];
    let e = effective_tensor(axis, 1, v);
    let basis = recovery_basis(axis);
    let mut outcomes = Vec::new();
    for k in 0..4 {
        let w = induced(&e, &basis.vectors[k]);
        if w.norm() < ZERO_TOL {
            outcomes.push(Action::Never);
        } else {
            outcomes.push(Action::Apply { pauli: classify_pauli(&w, &identity(2))? });
        }
    }
    Some(RecoveryEntry { axis, vertical_axis, vertical, outcomes })
}

/// Two-chain bond operator `[(r_u, r_d), (l_u, l_d)]` for bras on (A_u, B, A_d)
/// after filter outcome L on both A sites.
pub fn two_chain_operator(a_bra: &[C64], b_bra: &[C64], d_bra: &[C64]) -> DenseOperator {
    let l = &filter(Axis::Z).kraus[0];
    let au = constructed_a_up().apply_op("p", l).apply_bra("p", a_bra).rename("l", "lu").rename("r", "ru").rename("d", "x");
    let b = constructed_b().apply_bra("p", b_bra).rename("u", "x").rename("d", "y");
    let ad = constructed_a_down().apply_op("p", l).apply_bra("p", d_bra).rename("l", "ld").rename("r", "rd").rename("u", "y");
    let t = au.contract(&b).contract(&ad).permuted(&["ru", "rd", "lu", "ld"]);
    DMatrix::from_row_slice(4, 4, &t.data)
}

fn classify_two(w: &DenseOperator, g: Option<Gate>) -> Option<(Pauli, Pauli)> {
    let base = g.map_or_else(|| identity(4), |g| g.matrix());
    for p1 in Pauli::ALL {
        for p2 in Pauli::ALL {
            if proportional(w, &(kron(&p1.matrix(), &p2.matrix()) * &base), MATCH_TOL) {
                return Some((p1, p2));
            }
        }
    }
    None
}

fn entangle_entry(a: u8, d: u8) -> Result<EntangleEntry, TableError> {
    let label = format!("entangle a={a} d={d}");
    let mn = mu_nu_basis();
    let (va, vd) = (&mn.vectors[a as usize], &mn.vectors[d as usize]);
    let z = z_basis();
    let failure = (0..4)
        .map(|k| classify_two(&two_chain_operator(va, &z.vectors[k], vd), None))
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| TableError::Unclassifiable(format!("{label} failure branch")))?;
    for basis in [mu_nu_prime_basis(), real_companion_basis()] {
        for gate in Gate::ALL {
            let success: Option<Vec<_>> =
                (0..4).map(|k| classify_two(&two_chain_operator(va, &basis.vectors[k], vd), Some(gate))).collect();
            if let Some(success) = success {
                return Ok(EntangleEntry { a, d, gate, b_basis: basis.name.clone(), success, failure });
            }
        }
    }
    Err(TableError::Unclassifiable(label))
}

fn init_entry(outcome: u8) -> Result<InitEntry, TableError> {
    let mut bra = vec![ZERO; 2];
    bra[outcome as usize] = re(1.0);
    let v = site_tensor(TensorKind::BoundaryLeft).apply_bra("p", &bra);
    let bond_bit = (0..2u8)
        .find(|&b| v.data[b as usize].norm() > 0.5 && v.data[1 - b as usize].norm() < ZERO_TOL)
        .ok_or_else(|| TableError::Unclassifiable(format!("init outcome={outcome}")))?;
    Ok(InitEntry { outcome, bond_bit })
}

impl OutcomeTables {
    /// Rebuild every table from the site tensors.
    pub fn generate() -> Result<OutcomeTables, TableError> {
        let init = (0..2).map(init_entry).collect::<Result<_, _>>()?;
        let mut single_qubit = Vec::new();
        let mut recovery = Vec::new();
        for axis in [Axis::Z, Axis::X] {
            for v in 0..2 {
                single_qubit.push(single_entry(axis, v)?);
            }
            // the failed side needs vertical states of whichever type makes every outcome a Pauli
            let mut found = None;
            for vertical_axis in [axis.other(), axis] {
                let pair: Option<Vec<RecoveryEntry>> = (0..2).map(|v| recovery_entry(axis, vertical_axis, v)).collect();
                if let Some(p) = pair {
                    found = Some(p);
                    break;
                }
            }
            recovery.extend(found.ok_or_else(|| TableError::Unclassifiable(format!("recovery axis={axis:?}")))?);
        }
        let readout = (0..2).map(readout_entry).collect::<Result<_, _>>()?;
        let mut entangle = Vec::new();
        for a in 0..4 {
            for d in 0..4 {
                entangle.push(entangle_entry(a, d)?);
            }
        }
        Ok(OutcomeTables { version: TABLE_VERSION, init, single_qubit, readout, recovery, entangle })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("tables serialize");
        s.push('\n');
        s
    }

    pub fn from_json(s: &str) -> Result<OutcomeTables, TableError> {
        serde_json::from_str(s).map_err(|e| TableError::Parse(e.to_string()))
    }

    /// Tables compiled into the library.
    pub fn embedded() -> &'static OutcomeTables {
        static TABLES: OnceLock<OutcomeTables> = OnceLock::new();
        TABLES.get_or_init(|| OutcomeTables::from_json(COMMITTED).expect("committed outcome tables parse"))
    }

    pub fn single(&self, axis: Axis, vertical: usize) -> &SingleQubitEntry {
        self.single_qubit.iter().find(|e| e.axis == axis && e.vertical as usize == vertical).expect("single-qubit entry")
    }

    pub fn readout_entry(&self, vertical: usize) -> &ReadoutEntry {
        self.readout.iter().find(|e| e.vertical as usize == vertical).expect("readout entry")
    }

    pub fn recovery_entry(&self, axis: Axis, vertical: usize) -> &RecoveryEntry {
        self.recovery.iter().find(|e| e.axis == axis && e.vertical as usize == vertical).expect("recovery entry")
    }

    /// Vertical type the failed side needs.
    pub fn recovery_axis(&self, axis: Axis) -> Axis {
        self.recovery_entry(axis, 0).vertical_axis
    }

    pub fn entangle_entry(&self, a: usize, d: usize) -> &EntangleEntry {
        self.entangle.iter().find(|e| e.a as usize == a && e.d as usize == d).expect("entangle entry")
    }

    pub fn init_bit(&self, outcome: usize) -> u8 {
        self.init.iter().find(|e| e.outcome as usize == outcome).expect("init entry").bond_bit
    }
}

/// The committed artifact text.
pub fn committed_json() -> &'static str {
    COMMITTED
}

/// First differing JSON path between two documents.
pub fn first_difference(committed: &Value, regenerated: &Value, path: &str) -> Option<(String, String, String)> {
    match (committed, regenerated) {
        (Value::Object(a), Value::Object(b)) => {
            let mut keys: Vec<&String> = a.keys().chain(b.keys()).collect();
            keys.sort();
            keys.dedup();
            for k in keys {
                let p = if path.is_empty() { k.clone() } else { format!("{path}.{k}") };
                match (a.get(k), b.get(k)) {
                    (Some(x), Some(y)) => {
                        if let Some(d) = first_difference(x, y, &p) {
                            return Some(d);
                        }
                    }
                    (x, y) => return Some((p, show(x), show(y))),
                }
            }
            None
        }
        (Value::Array(a), Value::Array(b)) => {
            for i in 0..a.len().max(b.len()) {
                let p = format!("{path}[{i}]");
                match (a.get(i), b.get(i)) {
                    (Some(x), Some(y)) => {
                        if let Some(d) = first_difference(x, y, &p) {
                            return Some(d);
                        }
                    }
                    (x, y) => return Some((p, show(x), show(y))),
                }
            }
            None
        }
        (x, y) if x == y => None,
        (x, y) => Some((path.to_string(), x.to_string(), y.to_string())),
    }
}

fn show(v: Option<&Value>) -> String {
    v.map_or_else(|| "<missing>".to_string(), Value::to_string)
}

/// Regenerate the tables and compare against `committed`.
pub fn verify_against(committed: &str) -> Result<OutcomeTables, TableError> {
    let fresh = OutcomeTables::generate()?;
    let text = fresh.to_json();
    if text == committed {
        return Ok(fresh);
    }
    let a: Value = serde_json::from_str(committed).map_err(|e| TableError::Parse(e.to_string()))?;
    let b: Value = serde_json::from_str(&text).expect("regenerated tables are JSON");
    let (path, committed, regenerated) =
        first_difference(&a, &b, "").unwrap_or_else(|| ("<formatting>".into(), "bytes differ".into(), "".into()));
    Err(TableError::Mismatch { path, committed, regenerated })
}

pub fn verify_committed() -> Result<OutcomeTables, TableError> {
    verify_against(COMMITTED)
}
