//! Independent check of the engine: replay a trajectory on the full tensor
//! network of the used columns and extract the induced map on the bonds.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::engine::{Effect, StepStatus, Trajectory};
use super::pauli::{rx, rz};
use super::program::{Instruction, LogicalProgram};
use crate::lattice::{Lattice, SiteIndex, SiteKind};
use crate::linalg::{embed_dense, process_fidelity, re, DenseOperator, ZERO};
use crate::tensor_net::{build_ground_network, Tensor, TensorError, TensorNetwork, STATE_CAP};

#[derive(Debug, Error)]
pub enum OracleError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("lattice: {0}")]
    Lattice(String),
    #[error("trajectory measured no column; nothing to verify")]
    NoColumns,
    #[error("claimed map is {got:?}, expected {expected:?}")]
    Shape { expected: (usize, usize), got: (usize, usize) },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    /// Process fidelity of the replayed map against (frame) x (claimed map).
    pub fidelity: f64,
    /// Squared norm of the replayed branch over that of the resource.
    pub replay_probability: f64,
    /// Product of the probabilities the engine recorded.
    pub trajectory_probability: f64,
}

/// Resource restricted to the used columns with every recorded effect applied.
pub fn replay_network(lattice: &Lattice, traj: &Trajectory) -> Result<(TensorNetwork, TensorNetwork), OracleError> {
    if traj.columns_used == 0 {
        return Err(OracleError::NoColumns);
    }
    let lat = lattice.truncated(traj.columns_used).map_err(|e| OracleError::Lattice(e.to_string()))?;
    let fresh = build_ground_network(&lat)?;
    let mut net = fresh.clone();
    for step in &traj.steps {
        net = match &step.effect {
            Effect::Bra { vector } => net.contract_bra(step.site, vector)?,
            Effect::Kraus { .. } => net.apply_local(step.site, &step.effect.kraus_matrix().expect("kraus"))?,
        };
    }
    Ok((fresh, net))
}

/// Induced map from the input bonds of never-initialised chains to the output
/// bonds of all chains, as a `2^n x 2^(refs)` matrix with chain 0 most significant.
pub fn induced_map(lattice: &Lattice, traj: &Trajectory) -> Result<(DenseOperator, f64), OracleError> {
    let (fresh, mut net) = replay_network(lattice, traj)?;
    let ratio = net.norm_sqr() / fresh.norm_sqr();
    let init = traj.initialized();
    // an unmeasured b_0 with identity tensor exposes the input bond index directly
    for (q, &done) in init.iter().enumerate() {
        if !done {
            let id = Tensor::from_fn(&["p", "r"], &[2, 2], |i| if i[0] == i[1] { re(1.0) } else { ZERO });
            net.sites.get_mut(&SiteIndex::left(q)).expect("b0").tensor = id;
        }
    }
    let v = net.to_state_vector(STATE_CAP)?;
    let n = traj.n_chains;
    // open legs in position order: per chain, [b0 if reference], bR
    let mut kinds = Vec::new();
    for (q, &done) in init.iter().enumerate() {
        if !done {
            kinds.push((q, SiteKind::BoundaryLeft));
        }
        kinds.push((q, SiteKind::BoundaryRight));
    }
    let n_ref = init.iter().filter(|d| !**d).count();
    let mut w = DMatrix::from_element(1 << n, 1 << n_ref, ZERO);
    for (idx, amp) in v.iter().enumerate() {
        let mut out = 0usize;
        let mut inp = 0usize;
        for (k, &(_, kind)) in kinds.iter().enumerate() {
            let bit = (idx >> (kinds.len() - 1 - k)) & 1;
            if kind == SiteKind::BoundaryLeft {
                inp = (inp << 1) | bit;
            } else {
                out = (out << 1) | bit;
            }
        }
        w[(out, inp)] = *amp;
    }
    Ok((w, ratio))
}

fn single(n: usize, q: usize, op: &DenseOperator) -> DenseOperator {
    embed_dense(op, &[q], &vec![2; n])
}

/// Ideal logical map of the instructions the trajectory completed, including
/// readout projectors on the reported bits; inputs are the never-initialised chains.
pub fn logical_map(program: &LogicalProgram, traj: &Trajectory) -> DenseOperator {
    let n = traj.n_chains;
    let init = traj.initialized();
    let mut bits = vec![0u8; n];
    for ins in &program.program {
        if let Instruction::Init { q, bit } = *ins {
            bits[q] = bit;
        }
    }
    // input embedding: |bit> on initialised chains, identity on the rest
    let mut map = DMatrix::from_element(1, 1, re(1.0));
    for q in 0..n {
        let factor = if init[q] {
            let mut k = DMatrix::from_element(2, 1, ZERO);
            k[(bits[q] as usize, 0)] = re(1.0);
            k
        } else {
            crate::linalg::identity(2)
        };
        map = crate::linalg::kron(&map, &factor);
    }
    for (i, ins) in program.program.iter().enumerate() {
        let Some(step) = traj.logical.get(i) else { continue };
        if step.status != StepStatus::Succeeded {
            continue;
        }
        let op = match *ins {
            Instruction::Init { .. } => continue,
            Instruction::Rz { q, theta } => single(n, q, &rz(theta)),
            Instruction::Rx { q, theta } => single(n, q, &rx(theta)),
            Instruction::Readout { q } => {
                let mut p = DMatrix::from_element(2, 2, ZERO);
                let b = step.bit.expect("completed readout has a bit") as usize;
                p[(b, b)] = re(1.0);
                single(n, q, &p)
            }
            Instruction::Entangle { .. } => {
                let (u, d, gate) = ins.oriented_gate().expect("entangle");
                debug_assert_eq!(d, u + 1);
                embed_dense(&gate.matrix(), &[u, d], &vec![2; n])
            }
        };
        map = op * map;
    }
    map
}

/// Replay `traj` on the full network and compare with (frame) x `claimed`.
pub fn oracle_verify(lattice: &Lattice, traj: &Trajectory, claimed: &DenseOperator) -> Result<OracleReport, OracleError> {
    let (w, ratio) = induced_map(lattice, traj)?;
    let target = traj.frame.operator() * claimed;
    if target.shape() != w.shape() {
        return Err(OracleError::Shape { expected: w.shape(), got: target.shape() });
    }
    Ok(OracleReport { fidelity: process_fidelity(&w, &target), replay_probability: ratio, trajectory_probability: traj.probability })
}

/// Outcome distribution of the readouts of an ideal circuit in which every
/// qubit starts in |0> or its init bit and readouts come last.
pub fn ideal_readout_distribution(program: &LogicalProgram, n_chains: usize) -> BTreeMap<Vec<u8>, f64> {
    let n = n_chains;
    let mut psi = DMatrix::from_element(1 << n, 1, ZERO);
    let mut start = 0usize;
    for ins in &program.program {
        if let Instruction::Init { q, bit } = *ins {
            start |= (bit as usize) << (n - 1 - q);
        }
    }
    psi[(start, 0)] = re(1.0);
    let mut read = Vec::new();
    for ins in &program.program {
        let op = match *ins {
            Instruction::Init { .. } => continue,
            Instruction::Readout { q } => {
                read.push(q);
                continue;
            }
            Instruction::Rz { q, theta } => single(n, q, &rz(theta)),
            Instruction::Rx { q, theta } => single(n, q, &rx(theta)),
            Instruction::Entangle { .. } => {
                let (u, d, gate) = ins.oriented_gate().expect("entangle");
                embed_dense(&gate.matrix(), &[u, d], &vec![2; n])
            }
        };
        psi = op * psi;
    }
    let mut dist = BTreeMap::new();
    for idx in 0..(1usize << n) {
        let p = psi[(idx, 0)].norm_sqr();
        let key: Vec<u8> = read.iter().map(|&q| ((idx >> (n - 1 - q)) & 1) as u8).collect();
        *dist.entry(key).or_insert(0.0) += p;
    }
    dist
}

/// Used to build a claimed map by hand in tests and the CLI.
pub fn embed_on(n: usize, sites: &[usize], op: &DenseOperator) -> DenseOperator {
    embed_dense(op, sites, &vec![2; n])
}
