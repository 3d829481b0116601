//! Column-by-column measurement protocol on the exact resource state.
//!
//! The engine keeps one tensor `psi` holding every quantity not yet measured
//! that can still influence outcomes: the unmeasured left boundary spins
//! (legs `ref{q}`), the open bond entering the current column of each chain
//! (`o{q}`), the physical legs of the current column and the bonds leaving it
//! (`n{q}`). Columns further right are never expanded: their contraction with
//! their own conjugate is proportional to the identity on the open bonds, so
//! Born probabilities follow from norms of `psi` alone. `tests/engine.rs`
//! checks this against full contractions.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::bases::{
    mu_nu_basis, mu_nu_prime_basis, qubit_z_basis, real_companion_basis, vertical_states, z_basis, Axis,
    FilterPovm, MeasurementBasis,
};
use super::pauli::{Gate, Pauli, PauliFrame};
use super::program::{Instruction, LogicalProgram, ProgramError};
use super::tables::{readout_basis, recovery_basis, rotation_basis, Action, OutcomeTables, ReadoutAction};
use crate::lattice::{Lattice, SiteIndex, SiteKind};
use crate::linalg::{re, DenseOperator, C64, ZERO};
use crate::spin_algebra::HalfInt;
use crate::tensor_net::{constructed_b, singlet_gauge, site_tensor, Tensor, TensorKind};

pub const DEFAULT_RETRY_BUDGET: usize = 20;
/// Outcomes at or below this probability are treated as impossible.
pub const PRUNE: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error(transparent)]
    Program(#[from] ProgramError),
    #[error("site {0} has already been measured")]
    AlreadyMeasured(SiteIndex),
    #[error("lattice exhausted after {} columns before the program finished", .trajectory.columns_used)]
    LatticeExhausted { trajectory: Box<Trajectory> },
    #[error("instruction {instruction} failed {attempts} times, exceeding the retry budget")]
    RetryBudgetExhausted { instruction: usize, attempts: usize, trajectory: Box<Trajectory> },
    #[error("scripted outcomes ran out at a measurement")]
    BranchPoint { probabilities: Vec<f64> },
    #[error("scripted outcome {outcome} at {site} has zero probability")]
    ZeroProbability { site: SiteIndex, outcome: usize },
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("the protocol needs spin-3/2 chains with one pendant per site")]
    Unsupported,
    #[error("exhaustive enumeration exceeded {0} branches")]
    TooManyBranches(usize),
}

/// Where measurement outcomes come from.
#[derive(Clone, Debug)]
pub enum OutcomeSource {
    Sampled(Box<ChaCha8Rng>),
    /// Fixed outcome indices; running past the end reports a branch point.
    Scripted { script: Vec<usize>, pos: usize },
}

impl OutcomeSource {
    pub fn seeded(seed: u64) -> Self {
        OutcomeSource::Sampled(Box::new(ChaCha8Rng::seed_from_u64(seed)))
    }

    pub fn scripted(script: Vec<usize>) -> Self {
        OutcomeSource::Scripted { script, pos: 0 }
    }
}

/// What was applied to a site: a bra (projective outcome) or a Kraus operator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Effect {
    Bra { vector: Vec<C64> },
    Kraus { dim: usize, entries: Vec<C64> },
}

impl Effect {
    pub fn kraus(op: &DenseOperator) -> Self {
        let d = op.nrows();
        let entries = (0..d).flat_map(|r| (0..d).map(move |c| (r, c))).map(|(r, c)| op[(r, c)]).collect();
        Effect::Kraus { dim: d, entries }
    }

    pub fn kraus_matrix(&self) -> Option<DenseOperator> {
        match self {
            Effect::Kraus { dim, entries } => Some(DenseOperator::from_row_slice(*dim, *dim, entries)),
            Effect::Bra { .. } => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub site: SiteIndex,
    pub column: usize,
    pub basis: String,
    pub outcome: usize,
    pub probability: f64,
    pub effect: Effect,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepStatus {
    Succeeded,
    Retried,
    Pending,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogicalStep {
    pub instruction: usize,
    pub status: StepStatus,
    pub attempts: usize,
    /// Column in which the instruction completed.
    pub column: Option<usize>,
    pub bit: Option<u8>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub n_chains: usize,
    pub steps: Vec<Step>,
    pub frame: PauliFrame,
    pub logical: Vec<LogicalStep>,
    pub columns_used: usize,
    /// Product of the probabilities of all recorded outcomes.
    pub probability: f64,
    /// Largest probability seen on an outcome the tables mark impossible.
    pub forbidden_probability: f64,
}

impl Trajectory {
    fn new(n_chains: usize) -> Self {
        Trajectory {
            n_chains,
            steps: Vec::new(),
            frame: PauliFrame::identity(n_chains),
            logical: Vec::new(),
            columns_used: 0,
            probability: 1.0,
            forbidden_probability: 0.0,
        }
    }

    /// Chains whose left boundary was measured.
    pub fn initialized(&self) -> Vec<bool> {
        let mut out = vec![false; self.n_chains];
        for s in &self.steps {
            if s.site.kind == SiteKind::BoundaryLeft {
                out[s.site.chain] = true;
            }
        }
        out
    }

    /// Readout bits in instruction order as (instruction, bit).
    pub fn readout_bits(&self) -> Vec<(usize, u8)> {
        self.logical.iter().filter_map(|l| l.bit.map(|b| (l.instruction, b))).collect()
    }

    pub fn completed(&self) -> bool {
        self.logical.iter().all(|l| l.status == StepStatus::Succeeded)
    }
}

/// What one chain does in a column.
#[derive(Copy, Clone, Debug, PartialEq)]
pub enum ColumnAction {
    Idle,
    RotateZ(f64),
    RotateX(f64),
    Readout,
    /// Entangle with `partner`; `gate` is written as (upper chain, lower chain).
    Entangle { partner: usize, gate: Gate },
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum ChainOutcome {
    /// Transport only; nothing was attempted.
    Idle,
    Done { bit: Option<u8> },
    Retry,
}

/// Protocol state: one owned resource, consumed left to right.
pub struct Protocol<'t> {
    lattice: Lattice,
    tables: &'t OutcomeTables,
    psi: Tensor,
    column: usize,
    source: OutcomeSource,
    traj: Trajectory,
    filter_ok: Vec<Option<bool>>,
    axis: Vec<Axis>,
    vertical: Vec<Option<usize>>,
}

fn leg(site: SiteIndex) -> String {
    match site.kind {
        SiteKind::BoundaryLeft => format!("ref{}", site.chain),
        SiteKind::A => format!("pA{}", site.chain),
        SiteKind::Pendant => format!("pP{}", site.chain),
        SiteKind::B => format!("pB{}", site.chain),
        SiteKind::BoundaryRight => format!("pR{}", site.chain),
    }
}

impl<'t> Protocol<'t> {
    pub fn new(lattice: &Lattice, tables: &'t OutcomeTables, source: OutcomeSource) -> Result<Self, ProtocolError> {
        if lattice.chain.spin_a != HalfInt::THREE_HALVES || lattice.chain.pendants_per_a != 1 {
            return Err(ProtocolError::Unsupported);
        }
        let n = lattice.n_chains;
        let mut psi = Tensor::scalar(re(1.0));
        for q in 0..n {
            let b0 = site_tensor(TensorKind::BoundaryLeft).rename("p", &format!("ref{q}")).rename("r", &format!("o{q}"));
            psi = psi.contract(&b0);
        }
        let norm = psi.norm_sqr().sqrt();
        psi = psi.scale(re(1.0 / norm));
        Ok(Protocol {
            lattice: lattice.clone(),
            tables,
            psi,
            column: 0,
            source,
            traj: Trajectory::new(n),
            filter_ok: vec![None; n],
            axis: vec![Axis::Z; n],
            vertical: vec![None; n],
        })
    }

    pub fn n_chains(&self) -> usize {
        self.lattice.n_chains
    }

    pub fn column(&self) -> usize {
        self.column
    }

    pub fn trajectory(&self) -> &Trajectory {
        &self.traj
    }

    pub fn trajectory_mut(&mut self) -> &mut Trajectory {
        &mut self.traj
    }

    pub fn frame(&self) -> &PauliFrame {
        &self.traj.frame
    }

    pub fn into_parts(self) -> (Trajectory, OutcomeSource) {
        (self.traj, self.source)
    }

    /// Current normalised state tensor.
    pub fn state(&self) -> &Tensor {
        &self.psi
    }

    fn pick(&mut self, site: SiteIndex, probs: &[f64]) -> Result<usize, ProtocolError> {
        match &mut self.source {
            OutcomeSource::Sampled(rng) => {
                let total: f64 = probs.iter().sum();
                let r: f64 = rng.gen::<f64>() * total;
                let mut acc = 0.0;
                let mut last = None;
                for (k, &p) in probs.iter().enumerate() {
                    if p <= PRUNE {
                        continue;
                    }
                    acc += p;
                    last = Some(k);
                    if r < acc {
                        return Ok(k);
                    }
                }
                Ok(last.expect("some outcome has positive probability"))
            }
            OutcomeSource::Scripted { script, pos } => {
                if *pos >= script.len() {
                    return Err(ProtocolError::BranchPoint { probabilities: probs.to_vec() });
                }
                let o = script[*pos];
                *pos += 1;
                if o >= probs.len() || probs[o] <= PRUNE {
                    return Err(ProtocolError::ZeroProbability { site, outcome: o });
                }
                Ok(o)
            }
        }
    }

    fn require_leg(&self, site: SiteIndex) -> Result<String, ProtocolError> {
        let name = leg(site);
        if self.psi.leg(&name).is_none() {
            return Err(ProtocolError::AlreadyMeasured(site));
        }
        Ok(name)
    }

    fn commit(&mut self, site: SiteIndex, basis: &str, posts: Vec<Tensor>, effects: Vec<Effect>) -> Result<(usize, Vec<f64>), ProtocolError> {
        let norms: Vec<f64> = posts.iter().map(Tensor::norm_sqr).collect();
        let total: f64 = norms.iter().sum();
        let probs: Vec<f64> = norms.iter().map(|n| n / total).collect();
        let o = self.pick(site, &probs)?;
        let post = posts.into_iter().nth(o).expect("outcome");
        self.psi = post.scale(re(1.0 / norms[o].sqrt()));
        self.traj.probability *= probs[o];
        self.traj.steps.push(Step {
            site,
            column: self.column,
            basis: basis.to_string(),
            outcome: o,
            probability: probs[o],
            effect: effects.into_iter().nth(o).expect("effect"),
        });
        Ok((o, probs))
    }

    /// Projective measurement of one site; returns the outcome and all outcome probabilities.
    pub fn measure(&mut self, site: SiteIndex, basis: &MeasurementBasis) -> Result<(usize, Vec<f64>), ProtocolError> {
        let name = self.require_leg(site)?;
        let posts = basis.vectors.iter().map(|v| self.psi.apply_bra(&name, v)).collect();
        let effects = basis.vectors.iter().map(|v| Effect::Bra { vector: v.clone() }).collect();
        self.commit(site, &basis.name, posts, effects)
    }

    /// Generalised measurement with Kraus operators; the site stays unmeasured.
    pub fn apply_povm(&mut self, site: SiteIndex, povm: &FilterPovm) -> Result<(usize, Vec<f64>), ProtocolError> {
        let name = self.require_leg(site)?;
        let posts = povm.kraus.iter().map(|k| self.psi.apply_op(&name, k)).collect();
        let effects = povm.kraus.iter().map(Effect::kraus).collect();
        self.commit(site, &povm.name, posts, effects)
    }

    /// Measure b_0 of chain `q` in z and record an X byproduct if the prepared
    /// bond state is not `bit`.
    pub fn initialize(&mut self, q: usize, bit: u8) -> Result<(), ProtocolError> {
        let (k, _) = self.measure(SiteIndex::left(q), &qubit_z_basis())?;
        if self.tables.init_bit(k) != bit {
            self.traj.frame.push(q, Pauli::X);
        }
        Ok(())
    }

    fn a_kind(&self, q: usize, col: usize) -> (TensorKind, SiteIndex) {
        let v = self.lattice.vertical_partner(SiteIndex::a(q, col), 0);
        let kind = match v.kind {
            SiteKind::B if v.chain == q => TensorKind::AUp,
            SiteKind::B => TensorKind::ADown,
            _ => TensorKind::ChainA,
        };
        (kind, v)
    }

    /// Attach the next column's site tensors to the state.
    pub fn begin_column(&mut self) -> Result<(), ProtocolError> {
        if self.column >= self.lattice.n_blocks() {
            return Err(ProtocolError::LatticeExhausted { trajectory: Box::new(self.traj.clone()) });
        }
        self.column += 1;
        let col = self.column;
        for q in 0..self.n_chains() {
            let (kind, v) = self.a_kind(q, col);
            let mut a = site_tensor(kind).rename("p", &format!("pA{q}")).rename("l", &format!("o{q}")).rename("r", &format!("n{q}"));
            match kind {
                TensorKind::ADown => a = a.rename("u", &format!("vd{}", v.chain)),
                _ => a = a.rename("d", &format!("vu{q}")),
            }
            self.psi = self.psi.contract(&a);
            if v.kind == SiteKind::Pendant {
                let p = site_tensor(TensorKind::Pendant).rename("p", &format!("pP{q}")).rename("u", &format!("vu{q}"));
                self.psi = self.psi.contract(&p);
            }
        }
        let bs: Vec<SiteIndex> = self.lattice.merged_in_column(col).map(|(b, _, _)| b).collect();
        for b in bs {
            let u = b.chain;
            let t = site_tensor(TensorKind::Merged)
                .rename("p", &format!("pB{u}"))
                .rename("u", &format!("vu{u}"))
                .rename("d", &format!("vd{u}"));
            self.psi = self.psi.contract(&t);
        }
        let n = self.psi.norm_sqr().sqrt();
        self.psi = self.psi.clone().scale(re(1.0 / n));
        let nc = self.n_chains();
        self.filter_ok = vec![None; nc];
        self.axis = vec![Axis::Z; nc];
        self.vertical = vec![None; nc];
        Ok(())
    }

    /// Close the column: every physical leg of it must have been measured.
    pub fn end_column(&mut self) -> Result<(), ProtocolError> {
        let open: Vec<&String> =
            self.psi.legs.iter().filter(|l| l.starts_with("pA") || l.starts_with("pP") || l.starts_with("pB")).collect();
        if !open.is_empty() {
            return Err(ProtocolError::Precondition(format!("column {} has unmeasured legs {open:?}", self.column)));
        }
        for q in 0..self.n_chains() {
            self.psi = self.psi.clone().rename(&format!("n{q}"), &format!("o{q}"));
        }
        self.traj.columns_used = self.column;
        Ok(())
    }

    /// Filter `{L, Lbar}` on the A site of chain `q` in the current column.
    pub fn prenormalize(&mut self, q: usize, axis: Axis) -> Result<bool, ProtocolError> {
        let site = SiteIndex::a(q, self.column);
        let (k, _) = self.apply_povm(site, &super::bases::filter(axis))?;
        self.filter_ok[q] = Some(k == 0);
        self.axis[q] = axis;
        Ok(k == 0)
    }

    /// Vertical-state type chain `q` needs after its filter outcome.
    pub fn vertical_axis(&self, q: usize) -> Axis {
        let axis = self.axis[q];
        match self.filter_ok[q] {
            Some(false) => self.tables.recovery_axis(axis),
            _ => axis,
        }
    }

    /// Measure B in the product basis that leaves canonical vertical states of
    /// type `types.0` on the upper A and `types.1` on the lower A.
    pub fn decouple(&mut self, b: SiteIndex, types: (Axis, Axis)) -> Result<(usize, usize), ProtocolError> {
        let (upper, lower) = self.lattice.merged.get(&b).map(|(u, l)| (u.chain, l.chain)).ok_or_else(|| {
            ProtocolError::Precondition(format!("{b} is not a merged site"))
        })?;
        let basis = product_basis(types);
        let (k, _) = self.measure(b, &basis)?;
        self.vertical[upper] = Some(k / 2);
        self.vertical[lower] = Some(k % 2);
        Ok((k / 2, k % 2))
    }

    /// Measure the pendant of chain `q` in the vertical basis of type `axis`.
    pub fn measure_pendant(&mut self, q: usize, axis: Axis) -> Result<usize, ProtocolError> {
        let site = SiteIndex::pendant(q, self.column);
        let mut basis = vertical_states(axis);
        // bra conj(c_i) leaves c_i on the bond
        basis.vectors.iter_mut().for_each(|v| v.iter_mut().for_each(|x| *x = x.conj()));
        let (k, _) = self.measure(site, &basis)?;
        self.vertical[q] = Some(k);
        Ok(k)
    }

    fn ready(&self, q: usize) -> Result<usize, ProtocolError> {
        if self.filter_ok[q] != Some(true) {
            return Err(ProtocolError::Precondition(format!("chain {q} has not passed the filter in column {}", self.column)));
        }
        self.vertical[q].ok_or_else(|| ProtocolError::Precondition(format!("vertical qubit of chain {q} not prepared")))
    }

    fn note_forbidden(&mut self, probs: &[f64], never: impl Fn(usize) -> bool) {
        for (k, &p) in probs.iter().enumerate() {
            if never(k) {
                self.traj.forbidden_probability = self.traj.forbidden_probability.max(p);
            }
        }
    }

    /// Rotation about `axis` by `theta` (transport for theta = 0). The angle is
    /// flipped when the current byproduct anticommutes with the rotation axis.
    pub fn rotate(&mut self, q: usize, axis: Axis, theta: f64) -> Result<Action, ProtocolError> {
        let v = self.ready(q)?;
        if self.axis[q] != axis {
            return Err(ProtocolError::Precondition(format!("chain {q} was filtered in the {:?} frame", self.axis[q])));
        }
        let f = self.traj.frame.get(q).bits();
        let flip = match axis {
            Axis::Z => f.0,
            Axis::X => f.1,
        };
        let eff = if flip { -theta } else { theta };
        let entry = self.tables.single(axis, v).clone();
        let (k, probs) = self.measure(SiteIndex::a(q, self.column), &rotation_basis(&entry, eff))?;
        self.note_forbidden(&probs, |k| entry.outcomes[k] == Action::Never);
        let action = entry.outcomes[k];
        match action {
            Action::Apply { pauli } | Action::Retry { pauli } => self.traj.frame.push(q, pauli),
            Action::Never => unreachable!("zero-probability outcome selected"),
        }
        Ok(action)
    }

    pub fn rotate_z(&mut self, q: usize, theta: f64) -> Result<Action, ProtocolError> {
        self.rotate(q, Axis::Z, theta)
    }

    pub fn rotate_x(&mut self, q: usize, theta: f64) -> Result<Action, ProtocolError> {
        self.rotate(q, Axis::X, theta)
    }

    /// One readout attempt on chain `q`; `Some(bit)` on a terminal outcome.
    pub fn readout(&mut self, q: usize) -> Result<Option<u8>, ProtocolError> {
        let v = self.ready(q)?;
        if self.axis[q] != Axis::Z {
            return Err(ProtocolError::Precondition("readout needs the Z-frame filter".into()));
        }
        let entry = self.tables.readout_entry(v).clone();
        let (k, probs) = self.measure(SiteIndex::a(q, self.column), &readout_basis(&entry))?;
        self.note_forbidden(&probs, |k| entry.outcomes[k] == ReadoutAction::Never);
        match entry.outcomes[k] {
            ReadoutAction::Bit { bit, post } => {
                let logical = bit ^ self.traj.frame.x[q] as u8;
                // the bond is left in |post> = X^(post xor bit) |logical bit>
                let p = if post != logical { Pauli::X } else { Pauli::I };
                self.traj.frame.set(q, p);
                Ok(Some(logical))
            }
            ReadoutAction::Retry { pauli } => {
                self.traj.frame.push(q, pauli);
                Ok(None)
            }
            ReadoutAction::Never => unreachable!("zero-probability outcome selected"),
        }
    }

    /// After filter outcome Lbar: measure A in the recovery basis; the bond
    /// state is transported with a Pauli byproduct.
    pub fn recover(&mut self, q: usize) -> Result<Pauli, ProtocolError> {
        if self.filter_ok[q] != Some(false) {
            return Err(ProtocolError::Precondition(format!("chain {q} has no failed filter to recover from")));
        }
        let v = self.vertical[q].ok_or_else(|| ProtocolError::Precondition("vertical qubit not prepared".into()))?;
        let axis = self.axis[q];
        let entry = self.tables.recovery_entry(axis, v).clone();
        let (k, probs) = self.measure(SiteIndex::a(q, self.column), &recovery_basis(axis))?;
        self.note_forbidden(&probs, |k| entry.outcomes[k] == Action::Never);
        match entry.outcomes[k] {
            Action::Apply { pauli } | Action::Retry { pauli } => {
                self.traj.frame.push(q, pauli);
                Ok(pauli)
            }
            Action::Never => unreachable!("zero-probability outcome selected"),
        }
    }

    /// Entangling attempt on the pair joined by `b`, both filters passed.
    /// Returns true when `desired` (upper, lower) was applied.
    pub fn entangle(&mut self, b: SiteIndex, desired: Gate) -> Result<bool, ProtocolError> {
        let (upper, lower) = self.lattice.merged.get(&b).map(|(u, l)| (u.chain, l.chain)).ok_or_else(|| {
            ProtocolError::Precondition(format!("{b} is not a merged site"))
        })?;
        if self.filter_ok[upper] != Some(true) || self.filter_ok[lower] != Some(true) {
            return Err(ProtocolError::Precondition("entangling needs both filters passed".into()));
        }
        let mn = mu_nu_basis();
        let (a, _) = self.measure(SiteIndex::a(upper, self.column), &mn)?;
        let (d, _) = self.measure(SiteIndex::a(lower, self.column), &mn)?;
        let entry = self.tables.entangle_entry(a, d).clone();
        if entry.gate == desired {
            let basis = if entry.b_basis == "mu_nu_prime" { mu_nu_prime_basis() } else { real_companion_basis() };
            let (k, _) = self.measure(b, &basis)?;
            let (fu, fd) = entry.gate.propagate(self.traj.frame.get(upper), self.traj.frame.get(lower));
            self.traj.frame.set(upper, fu);
            self.traj.frame.set(lower, fd);
            let (pu, pd) = entry.success[k];
            self.traj.frame.push(upper, pu);
            self.traj.frame.push(lower, pd);
            Ok(true)
        } else {
            let (k, _) = self.measure(b, &z_basis())?;
            let (pu, pd) = entry.failure[k];
            self.traj.frame.push(upper, pu);
            self.traj.frame.push(lower, pd);
            Ok(false)
        }
    }

    /// Run one full column with the given per-chain actions.
    pub fn execute_column(&mut self, actions: &[ColumnAction]) -> Result<Vec<ChainOutcome>, ProtocolError> {
        let n = self.n_chains();
        assert_eq!(actions.len(), n);
        self.begin_column()?;
        let col = self.column;
        for (q, act) in actions.iter().enumerate() {
            let axis = if matches!(act, ColumnAction::RotateX(_)) { Axis::X } else { Axis::Z };
            self.prenormalize(q, axis)?;
        }
        let mut out: Vec<Option<ChainOutcome>> = vec![None; n];
        let mut paired = vec![false; n];
        let bs: Vec<(SiteIndex, usize, usize)> = self.lattice.merged_in_column(col).collect();
        for (b, u, d) in bs {
            let pair = match (actions[u], actions[d]) {
                (ColumnAction::Entangle { partner: pu, gate }, ColumnAction::Entangle { partner: pd, .. })
                    if pu == d && pd == u =>
                {
                    Some(gate)
                }
                _ => None,
            };
            if pair.is_some() {
                paired[u] = true;
                paired[d] = true;
            }
            match pair {
                Some(gate) if self.filter_ok[u] == Some(true) && self.filter_ok[d] == Some(true) => {
                    let ok = self.entangle(b, gate)?;
                    let o = if ok { ChainOutcome::Done { bit: None } } else { ChainOutcome::Retry };
                    out[u] = Some(o);
                    out[d] = Some(o);
                }
                _ => {
                    self.decouple(b, (self.vertical_axis(u), self.vertical_axis(d)))?;
                }
            }
        }
        for q in 0..n {
            if self.lattice.vertical_partner(SiteIndex::a(q, col), 0).kind == SiteKind::Pendant {
                self.measure_pendant(q, self.vertical_axis(q))?;
            }
        }
        for q in 0..n {
            if out[q].is_some() {
                continue;
            }
            let attempt = match actions[q] {
                ColumnAction::Idle => false,
                ColumnAction::Entangle { .. } => paired[q],
                _ => true,
            };
            let fallback = if attempt { ChainOutcome::Retry } else { ChainOutcome::Idle };
            if self.filter_ok[q] == Some(false) {
                self.recover(q)?;
                out[q] = Some(fallback);
                continue;
            }
            let o = match actions[q] {
                ColumnAction::Idle | ColumnAction::Entangle { .. } => {
                    self.rotate(q, Axis::Z, 0.0)?;
                    fallback
                }
                ColumnAction::RotateZ(t) | ColumnAction::RotateX(t) => {
                    let axis = self.axis[q];
                    match self.rotate(q, axis, t)? {
                        Action::Apply { .. } => ChainOutcome::Done { bit: None },
                        _ => ChainOutcome::Retry,
                    }
                }
                ColumnAction::Readout => match self.readout(q)? {
                    Some(bit) => ChainOutcome::Done { bit: Some(bit) },
                    None => ChainOutcome::Retry,
                },
            };
            out[q] = Some(o);
        }
        self.end_column()?;
        Ok(out.into_iter().map(|o| o.expect("every chain handled")).collect())
    }
}

/// B basis whose outcome `k = 2i + j` leaves canonical vertical state `i`
/// (type `types.0`) on the upper A and `j` (type `types.1`) on the lower A.
/// With (Z, Z) this is the z basis and with (X, X) the beta basis, up to
/// order and signs.
pub fn product_basis(types: (Axis, Axis)) -> MeasurementBasis {
    let b = constructed_b();
    let m = singlet_gauge();
    let up = vertical_states(types.0);
    let down = vertical_states(types.1);
    let mut vectors = Vec::new();
    for i in 0..2 {
        for j in 0..2 {
            // lower vertical leg must carry M c_j so that the A_d tensor sees c_j
            let lower: Vec<C64> = (0..2).map(|x| (0..2).map(|y| m[(x, y)] * down.vectors[j][y]).sum()).collect();
            let mut phi = vec![ZERO; 4];
            for (s, slot) in phi.iter_mut().enumerate() {
                for u in 0..2 {
                    for d in 0..2 {
                        let w = up.vectors[i][u] * lower[d];
                        *slot += b.get(&[s, u, d]) * w.conj();
                    }
                }
            }
            vectors.push(phi);
        }
    }
    let tag = |a: Axis| if a == Axis::Z { "z" } else { "x" };
    MeasurementBasis::new(&format!("b_product_{}{}", tag(types.0), tag(types.1)), vectors)
}

/// Execution options for [`run_program`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    pub retry_budget: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { retry_budget: DEFAULT_RETRY_BUDGET }
    }
}

/// Execute a logical program left to right on `lattice`.
pub fn run_program(
    lattice: &Lattice,
    program: &LogicalProgram,
    tables: &OutcomeTables,
    source: OutcomeSource,
    opts: &RunOptions,
) -> Result<Trajectory, ProtocolError> {
    let n = lattice.n_chains;
    program.validate(n)?;
    let mut proto = Protocol::new(lattice, tables, source)?;
    proto.traj.logical = (0..program.program.len())
        .map(|i| LogicalStep { instruction: i, status: StepStatus::Pending, attempts: 0, column: None, bit: None })
        .collect();
    let mut queues: Vec<VecDeque<usize>> = vec![VecDeque::new(); n];
    for (i, ins) in program.program.iter().enumerate() {
        if let Instruction::Init { q, bit } = *ins {
            proto.initialize(q, bit)?;
            let l = &mut proto.traj.logical[i];
            l.status = StepStatus::Succeeded;
            l.attempts = 1;
            l.column = Some(0);
            continue;
        }
        for q in ins.qubits() {
            queues[q].push_back(i);
        }
    }
    while queues.iter().any(|q| !q.is_empty()) {
        let actions: Vec<ColumnAction> = (0..n)
            .map(|q| match queues[q].front() {
                None => ColumnAction::Idle,
                Some(&i) => match program.program[i] {
                    Instruction::Rz { theta, .. } => ColumnAction::RotateZ(theta),
                    Instruction::Rx { theta, .. } => ColumnAction::RotateX(theta),
                    Instruction::Readout { .. } => ColumnAction::Readout,
                    Instruction::Entangle { .. } => {
                        let (u, d, gate) = program.program[i].oriented_gate().expect("entangle");
                        let partner = if q == u { d } else { u };
                        if queues[partner].front() == Some(&i) {
                            ColumnAction::Entangle { partner, gate }
                        } else {
                            ColumnAction::Idle
                        }
                    }
                    Instruction::Init { .. } => unreachable!("inits are not queued"),
                },
            })
            .collect();
        let outcomes = proto.execute_column(&actions)?;
        let col = proto.column;
        let mut counted = Vec::new();
        for q in 0..n {
            let Some(&i) = queues[q].front() else { continue };
            match outcomes[q] {
                ChainOutcome::Idle => continue,
                ChainOutcome::Done { bit } => {
                    queues[q].pop_front();
                    let l = &mut proto.traj.logical[i];
                    if !counted.contains(&i) {
                        l.attempts += 1;
                    }
                    l.status = StepStatus::Succeeded;
                    l.column = Some(col);
                    if bit.is_some() {
                        l.bit = bit;
                    }
                }
                ChainOutcome::Retry => {
                    let l = &mut proto.traj.logical[i];
                    if !counted.contains(&i) {
                        l.attempts += 1;
                    }
                    l.status = StepStatus::Retried;
                    if l.attempts >= opts.retry_budget {
                        let attempts = l.attempts;
                        return Err(ProtocolError::RetryBudgetExhausted {
                            instruction: i,
                            attempts,
                            trajectory: Box::new(proto.traj.clone()),
                        });
                    }
                }
            }
            counted.push(i);
        }
    }
    Ok(proto.traj)
}

/// Terminal state of one enumerated branch.
#[derive(Clone, Debug)]
pub enum Leaf {
    Completed(Trajectory),
    LatticeExhausted(Trajectory),
    BudgetExhausted(Trajectory),
}

impl Leaf {
    pub fn trajectory(&self) -> &Trajectory {
        match self {
            Leaf::Completed(t) | Leaf::LatticeExhausted(t) | Leaf::BudgetExhausted(t) => t,
        }
    }
}

/// Every outcome branch of nonzero probability, by depth-first replay.
pub fn enumerate_branches(
    lattice: &Lattice,
    program: &LogicalProgram,
    tables: &OutcomeTables,
    opts: &RunOptions,
    max_leaves: usize,
) -> Result<Vec<Leaf>, ProtocolError> {
    let mut leaves = Vec::new();
    let mut stack: Vec<Vec<usize>> = vec![Vec::new()];
    while let Some(script) = stack.pop() {
        match run_program(lattice, program, tables, OutcomeSource::scripted(script.clone()), opts) {
            Ok(t) => leaves.push(Leaf::Completed(t)),
            Err(ProtocolError::LatticeExhausted { trajectory }) => leaves.push(Leaf::LatticeExhausted(*trajectory)),
            Err(ProtocolError::RetryBudgetExhausted { trajectory, .. }) => leaves.push(Leaf::BudgetExhausted(*trajectory)),
            Err(ProtocolError::BranchPoint { probabilities }) => {
                for (o, &p) in probabilities.iter().enumerate().rev() {
                    if p > PRUNE {
                        let mut s = script.clone();
                        s.push(o);
                        stack.push(s);
                    }
                }
            }
            Err(e) => return Err(e),
        }
        if leaves.len() > max_leaves {
            return Err(ProtocolError::TooManyBranches(max_leaves));
        }
    }
    Ok(leaves)
}

/// Filter statistics on a single chain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterStatistics {
    pub samples: usize,
    pub attempts: usize,
    pub failures: usize,
    /// `successes_within[l-1]`: runs whose filter passed within `l` attempts.
    pub successes_within: Vec<usize>,
}

impl FilterStatistics {
    pub fn failure_rate(&self) -> f64 {
        self.failures as f64 / self.attempts as f64
    }

    pub fn success_fraction(&self, l: usize) -> f64 {
        self.successes_within[l - 1] as f64 / self.samples as f64
    }
}

/// Repeatedly filter the A site of a fresh single chain, recovering after each
/// failure, for up to `max_attempts` columns per sample.
pub fn filter_statistics(samples: usize, max_attempts: usize, seed: u64) -> Result<FilterStatistics, ProtocolError> {
    let lattice = Lattice::chain(&crate::lattice::QuasiChainSpec::spin32(max_attempts))
        .map_err(|e| ProtocolError::Precondition(e.to_string()))?;
    let tables = OutcomeTables::embedded();
    let mut source = OutcomeSource::seeded(seed);
    let mut stats = FilterStatistics { samples, attempts: 0, failures: 0, successes_within: vec![0; max_attempts] };
    for _ in 0..samples {
        let mut proto = Protocol::new(&lattice, tables, source)?;
        let mut first = None;
        for l in 1..=max_attempts {
            proto.begin_column()?;
            let ok = proto.prenormalize(0, Axis::Z)?;
            stats.attempts += 1;
            let vaxis = proto.vertical_axis(0);
            proto.measure_pendant(0, vaxis)?;
            if ok {
                proto.rotate(0, Axis::Z, 0.0)?;
                proto.end_column()?;
                first = Some(l);
                break;
            }
            stats.failures += 1;
            proto.recover(0)?;
            proto.end_column()?;
        }
        if let Some(l) = first {
            for s in &mut stats.successes_within[l - 1..] {
                *s += 1;
            }
        }
        source = proto.into_parts().1;
    }
    Ok(stats)
}
