//! `aklt`: gap certification, ground-state validation, protocol simulation
//! and outcome-table verification, each emitting a JSON report.
//!
//! Exit codes: 0 success, 1 a check failed, 2 usage or configuration error,
//! 3 eigensolver did not converge.

mod report;

use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use aklt_core::hamiltonian::build_lattice_hamiltonian;
use aklt_core::lattice::{alternating_pairing, ladder_pairing, merge_chains, Lattice, QuasiChainSpec};
use aklt_core::linalg::{kron, C64};
use aklt_core::mbqc::pauli::proportional;
use aklt_core::mbqc::tables::{committed_json, verify_against, TableError};
use aklt_core::mbqc::{
    ideal_readout_distribution, logical_map, oracle_verify, run_program, Gate, LogicalProgram, OutcomeSource,
    OutcomeTables, Pauli, ProtocolError, RunOptions, Trajectory,
};
use aklt_core::reference::reference;
use aklt_core::spectra::{block_gap, certify_gap, full_spectrum, kernel_vectors, SolverError, SolverOptions};
use aklt_core::tensor_net::build_ground_network;
use clap::{Args, Parser, Subcommand, ValueEnum};
use report::{Checked, Report};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "aklt", version, about = "Spin-3/2 AKLT quasi-chain laboratory")]
struct Cli {
    /// Write the JSON report here instead of stdout.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Block gap, Knabe constant and the resulting gap bound.
    CertifyGap(CertifyArgs),
    /// Build the tensor-network ground state and validate it against exact diagonalization.
    GroundState(GroundArgs),
    /// Run a logical program on the resource state.
    Simulate(SimulateArgs),
    /// Regenerate the outcome tables and compare with the committed artifact.
    VerifyTables(TablesArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum Model {
    #[value(name = "spin32_chain")]
    Spin32Chain,
    #[value(name = "spin2_chain")]
    Spin2Chain,
    #[value(name = "octagonal")]
    Octagonal,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum Pairing {
    /// Every column of chains 0 and 1 merged (two chains only).
    Ladder,
    /// Brick pattern: chain c merges with c + 1 in column i when c + i is odd.
    Alternating,
}

#[derive(Args, Serialize)]
struct CertifyArgs {
    #[arg(long, value_enum, default_value = "spin32_chain")]
    model: Model,
    /// Sub-chain length of the Knabe criterion.
    #[arg(long, default_value_t = 4, value_parser = at_least::<2>)]
    n: usize,
    #[arg(long = "J", default_value_t = 1.0)]
    coupling: f64,
    /// Only compute the block gap.
    #[arg(long)]
    gamma_only: bool,
    /// Also report epsilon for the sub-chain that contains the left boundary.
    #[arg(long)]
    boundary: bool,
    /// Compare against the reference constants that apply to this configuration.
    #[arg(long)]
    expect: bool,
    #[arg(long, default_value_t = 1 << 24)]
    dim_cap: usize,
    /// Seed of the Lanczos start vectors.
    #[arg(long, default_value_t = 0x5eed)]
    seed: u64,
}

#[derive(Args, Serialize)]
struct GroundArgs {
    #[arg(long, value_enum, default_value = "spin32_chain")]
    model: Model,
    /// Blocks per chain.
    #[arg(long = "N", default_value_t = 3, value_parser = at_least::<1>)]
    blocks: usize,
    /// Chains of the octagonal lattice.
    #[arg(long, default_value_t = 2, value_parser = at_least::<2>)]
    chains: usize,
    /// Defaults to ladder for two chains, alternating otherwise.
    #[arg(long, value_enum)]
    pairing: Option<Pairing>,
    /// Largest Hilbert-space dimension to diagonalize.
    #[arg(long, default_value_t = 1 << 20)]
    dim_cap: usize,
    /// Also compare the full spectrum with that of the unmerged chains.
    #[arg(long)]
    compare_unmerged: bool,
}

#[derive(Args, Serialize)]
struct SimulateArgs {
    /// Program file: {"program": [{"op": "init", "q": 0, "bit": 0}, ...]}.
    program: PathBuf,
    /// Chains; defaults to one more than the largest qubit index.
    #[arg(long)]
    chains: Option<usize>,
    /// Columns available to the protocol.
    #[arg(long = "N", default_value_t = 300)]
    blocks: usize,
    #[arg(long, value_enum)]
    pairing: Option<Pairing>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Independent runs with seeds seed, seed + 1, ...
    #[arg(long, default_value_t = 1)]
    samples: u64,
    #[arg(long, default_value_t = 150)]
    retry_budget: usize,
    /// Replay every run on the full tensor network and check the process fidelity.
    #[arg(long)]
    oracle: bool,
    /// Include the full measurement record of the first run.
    #[arg(long)]
    trajectory: bool,
}

#[derive(Args, Serialize)]
struct TablesArgs {
    /// Compare this file instead of the committed artifact.
    #[arg(long)]
    against: Option<PathBuf>,
    /// Write the regenerated tables to this path.
    #[arg(long)]
    write: Option<PathBuf>,
}

fn at_least<const MIN: usize>(s: &str) -> Result<usize, String> {
    let v: usize = s.parse().map_err(|e| format!("{e}"))?;
    if v < MIN {
        return Err(format!("must be at least {MIN}"));
    }
    Ok(v)
}

enum Failure {
    Usage(String),
    Solver(String),
}

impl From<SolverError> for Failure {
    fn from(e: SolverError) -> Self {
        match e {
            SolverError::NotConverged { .. } => Failure::Solver(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

fn usage(e: impl ToString) -> Failure {
    Failure::Usage(e.to_string())
}

const FIDELITY_TOL: f64 = 1e-9;
const RESIDUAL_TOL: f64 = 1e-9;
const OVERLAP_TOL: f64 = 1e-10;
const SPECTRUM_TOL: f64 = 1e-9;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::CertifyGap(a) => cmd_certify_gap(a),
        Command::GroundState(a) => cmd_ground_state(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::VerifyTables(a) => cmd_verify_tables(a),
    };
    match result {
        Ok(report) => {
            let text = report.to_json();
            match &cli.output {
                Some(path) => {
                    if let Err(e) = fs::write(path, &text) {
                        eprintln!("error: cannot write {}: {e}", path.display());
                        return ExitCode::from(2);
                    }
                }
                None => print!("{text}"),
            }
            if report.passed() {
                ExitCode::SUCCESS
            } else {
                eprintln!("failed checks: {}", report.failures.join(", "));
                ExitCode::from(1)
            }
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Solver(msg)) => {
            eprintln!("solver error: {msg}");
            ExitCode::from(3)
        }
    }
}

fn chain_spec(model: Model, blocks: usize) -> QuasiChainSpec {
    match model {
        Model::Spin32Chain | Model::Octagonal => QuasiChainSpec::spin32(blocks),
        Model::Spin2Chain => QuasiChainSpec::spin2(blocks),
    }
}

fn expect_near(report: &mut Report, key: &str, reference_key: &str, value: f64) {
    let r = reference(reference_key);
    report.check(key, Checked::near(value, r.value, r.tolerance));
}

fn cmd_certify_gap(a: &CertifyArgs) -> Result<Report, Failure> {
    if a.model == Model::Octagonal {
        return Err(usage("certify-gap works on chain models (spin32_chain, spin2_chain)"));
    }
    let n = a.n;
    let spec = chain_spec(a.model, n + 2);
    let opts = SolverOptions { dimension_cap: a.dim_cap, seed: a.seed, ..SolverOptions::default() };
    let mut report = Report::new("certify-gap", a);
    let gamma = report.timed("gamma", || block_gap(&spec))?;
    report.put("gamma", gamma);
    if a.expect {
        let key = if a.model == Model::Spin2Chain { "block_gap_spin2" } else { "block_gap_spin32" };
        expect_near(&mut report, "expect_gamma", key, gamma);
    }
    if a.gamma_only {
        return Ok(report);
    }
    let cert = report.timed("certificate", || certify_gap(&spec, n, a.coupling, a.boundary, &opts))?;
    report.put("epsilon", cert.epsilon);
    report.put("delta_e_bound", cert.delta_e_bound);
    report.put("certificate", if cert.valid { "VALID" } else { "INVALID" });
    if !cert.valid {
        report.fail("certificate");
    }
    if a.expect && a.model == Model::Spin32Chain && n == 4 {
        expect_near(&mut report, "expect_epsilon", "knabe_epsilon_spin32_n4", cert.epsilon);
        expect_near(&mut report, "expect_bound", "gap_bound_spin32_n4", cert.delta_e_bound / a.coupling);
    }
    report.put("certificate_details", &cert);
    Ok(report)
}

fn merged_lattice(chains: usize, blocks: usize, pairing: Option<Pairing>) -> Result<Lattice, Failure> {
    let chain = QuasiChainSpec::spin32(blocks);
    let pairing = pairing.unwrap_or(if chains == 2 { Pairing::Ladder } else { Pairing::Alternating });
    let pairs = match pairing {
        Pairing::Ladder if chains != 2 => return Err(usage("ladder pairing needs exactly two chains")),
        Pairing::Ladder => ladder_pairing(blocks),
        Pairing::Alternating => alternating_pairing(chains, blocks),
    };
    Lattice::from_octagonal(&merge_chains(&chain, chains, &pairs).map_err(usage)?).map_err(usage)
}

fn norm(v: &[C64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

fn cmd_ground_state(a: &GroundArgs) -> Result<Report, Failure> {
    let blocks = a.blocks;
    let lattice = match a.model {
        Model::Spin32Chain => Lattice::chain(&QuasiChainSpec::spin32(blocks)).map_err(usage)?,
        Model::Octagonal => merged_lattice(a.chains, blocks, a.pairing)?,
        Model::Spin2Chain => return Err(usage("the ground-state network is implemented for spin-3/2 sites only")),
    };
    let dim = lattice.hilbert_dim();
    if dim > a.dim_cap {
        return Err(usage(format!("Hilbert-space dimension {dim} exceeds --dim-cap {}", a.dim_cap)));
    }
    let mut report = Report::new("ground-state", a);
    report.put("dimension", dim);
    let h = build_lattice_hamiltonian(&lattice, 1.0).map_err(usage)?;
    let opts = SolverOptions { dimension_cap: a.dim_cap, ..SolverOptions::default() };
    let kernel = report.timed("kernel", || kernel_vectors(&h, &opts))?;
    report.put("kernel_dimension", kernel.len());
    if kernel.len() != 1 {
        report.fail("kernel_dimension");
    }
    let state = report
        .timed("network", || build_ground_network(&lattice).and_then(|n| n.to_state_vector(a.dim_cap)))
        .map_err(usage)?;
    report.check("network_residual", Checked::at_most(norm(&h.apply(&state)) / norm(&state), RESIDUAL_TOL));
    if let Some(k) = kernel.first() {
        let ip: C64 = k.iter().zip(&state).map(|(x, y)| x.conj() * y).sum();
        let ov = ip.norm_sqr() / (norm(k) * norm(&state)).powi(2);
        report.check("network_overlap", Checked::near_one(ov, OVERLAP_TOL));
    }
    if a.compare_unmerged && a.model == Model::Octagonal {
        let chain = QuasiChainSpec::spin32(blocks);
        let unmerged =
            Lattice::from_octagonal(&merge_chains(&chain, a.chains, &[]).map_err(usage)?).map_err(usage)?;
        let h0 = build_lattice_hamiltonian(&unmerged, 1.0).map_err(usage)?;
        let (s0, s1) = report.timed("spectra", || (full_spectrum(&h0, 8192), full_spectrum(&h, 8192)));
        let (s0, s1) = (s0?, s1?);
        let dev = s0.iter().zip(&s1).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        report.check("spectrum_vs_unmerged", Checked::at_most(dev, SPECTRUM_TOL));
    }
    Ok(report)
}

#[derive(Serialize)]
struct RunSummary {
    seed: u64,
    completed: bool,
    columns_used: usize,
    measurements: usize,
    probability: f64,
    readout: Vec<(usize, u8)>,
    frame: Vec<Pauli>,
    attempts: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    fidelity: Option<Checked>,
    #[serde(skip_serializing_if = "Option::is_none")]
    replay_probability: Option<Checked>,
}

fn summarize(seed: u64, t: &Trajectory, error: Option<String>) -> RunSummary {
    RunSummary {
        seed,
        completed: t.completed() && error.is_none(),
        columns_used: t.columns_used,
        measurements: t.steps.len(),
        probability: t.probability,
        readout: t.readout_bits(),
        frame: (0..t.n_chains).map(|q| t.frame.get(q)).collect(),
        attempts: t.logical.iter().map(|l| l.attempts).collect(),
        error,
        fidelity: None,
        replay_probability: None,
    }
}

fn cmd_simulate(a: &SimulateArgs) -> Result<Report, Failure> {
    let text = fs::read_to_string(&a.program).map_err(|e| usage(format!("{}: {e}", a.program.display())))?;
    let program = LogicalProgram::from_json(&text).map_err(|e| usage(format!("{}: {e}", a.program.display())))?;
    let max_q = program.program.iter().flat_map(|i| i.qubits()).max().unwrap_or(0);
    let chains = a.chains.unwrap_or(max_q + 1).max(1);
    program.validate(chains).map_err(usage)?;
    if a.blocks == 0 || a.samples == 0 || a.retry_budget == 0 {
        return Err(usage("--N, --samples and --retry-budget must be positive"));
    }
    let lattice = if chains == 1 {
        Lattice::chain(&QuasiChainSpec::spin32(a.blocks)).map_err(usage)?
    } else {
        merged_lattice(chains, a.blocks, a.pairing)?
    };
    let tables = OutcomeTables::embedded();
    let opts = RunOptions { retry_budget: a.retry_budget };
    let mut report = Report::new("simulate", a);
    report.put("chains", chains);
    let mut runs = Vec::new();
    let mut first = None;
    let mut histogram: BTreeMap<String, u64> = BTreeMap::new();
    let t0 = std::time::Instant::now();
    for k in 0..a.samples {
        let seed = a.seed + k;
        let (traj, error) = match run_program(&lattice, &program, tables, OutcomeSource::seeded(seed), &opts) {
            Ok(t) => (t, None),
            Err(e @ ProtocolError::LatticeExhausted { .. }) | Err(e @ ProtocolError::RetryBudgetExhausted { .. }) => {
                let msg = e.to_string();
                let t = match e {
                    ProtocolError::LatticeExhausted { trajectory } => *trajectory,
                    ProtocolError::RetryBudgetExhausted { trajectory, .. } => *trajectory,
                    _ => unreachable!(),
                };
                (t, Some(msg))
            }
            Err(e) => return Err(usage(e)),
        };
        let mut summary = summarize(seed, &traj, error);
        if !summary.completed {
            report.fail(&format!("run_{seed}"));
        } else {
            let key: String = traj.readout_bits().iter().map(|(_, b)| char::from(b'0' + b)).collect();
            *histogram.entry(key).or_default() += 1;
        }
        if a.oracle && summary.completed && traj.columns_used > 0 {
            let r = oracle_verify(&lattice, &traj, &logical_map(&program, &traj)).map_err(usage)?;
            let fid = Checked::near_one(r.fidelity, FIDELITY_TOL);
            let rel = (r.replay_probability / r.trajectory_probability - 1.0).abs();
            let rep = Checked::at_most(rel, 1e-8);
            if !fid.pass {
                report.fail(&format!("fidelity_{seed}"));
            }
            if !rep.pass {
                report.fail(&format!("replay_probability_{seed}"));
            }
            summary.fidelity = Some(fid);
            summary.replay_probability = Some(rep);
        }
        if first.is_none() {
            first = Some(traj);
        }
        runs.push(summary);
    }
    report.timings_ms.insert("runs".into(), t0.elapsed().as_secs_f64() * 1e3);
    report.put("runs", runs);
    if a.samples > 1 {
        report.put("readout_histogram", &histogram);
        let ideal: BTreeMap<String, f64> = ideal_readout_distribution(&program, chains)
            .into_iter()
            .map(|(k, v)| (k.iter().map(|b| char::from(b'0' + b)).collect(), v))
            .collect();
        report.put("ideal_readout_distribution", ideal);
    }
    if a.trajectory {
        report.put("trajectory", first);
    }
    Ok(report)
}

/// `V (P1 (x) P2) V^dag` against the propagated pair, for all 16 inputs of every gate.
fn propagation_identities() -> (usize, Vec<String>) {
    let mut held = 0;
    let mut broken = Vec::new();
    for gate in Gate::ALL {
        let v = gate.matrix();
        for p1 in Pauli::ALL {
            for p2 in Pauli::ALL {
                let (q1, q2) = gate.propagate(p1, p2);
                let lhs = &v * kron(&p1.matrix(), &p2.matrix()) * v.adjoint();
                if proportional(&lhs, &kron(&q1.matrix(), &q2.matrix()), 1e-10) {
                    held += 1;
                } else {
                    broken.push(format!("{gate}: {p1:?}{p2:?}"));
                }
            }
        }
    }
    (held, broken)
}

fn cmd_verify_tables(a: &TablesArgs) -> Result<Report, Failure> {
    let committed = match &a.against {
        Some(p) => fs::read_to_string(p).map_err(|e| usage(format!("{}: {e}", p.display())))?,
        None => committed_json().to_string(),
    };
    let mut report = Report::new("verify-tables", a);
    match report.timed("regenerate", || verify_against(&committed)) {
        Ok(_) => report.put("tables", "identical"),
        Err(TableError::Mismatch { path, committed, regenerated }) => {
            report.put("tables", "mismatch");
            report.put("mismatch", serde_json::json!({"entry": path, "committed": committed, "regenerated": regenerated}));
            report.fail("tables");
        }
        Err(TableError::Parse(e)) => return Err(usage(format!("tables are not valid JSON: {e}"))),
        Err(e @ TableError::Unclassifiable(_)) => {
            report.put("tables", e.to_string());
            report.fail("tables");
        }
    }
    if let Some(path) = &a.write {
        let fresh = OutcomeTables::generate().map_err(usage)?;
        fs::write(path, fresh.to_json()).map_err(|e| usage(format!("{}: {e}", path.display())))?;
        report.put("written", path.display().to_string());
    }
    let (held, broken) = propagation_identities();
    report.put("propagation_identities_held", held);
    if !broken.is_empty() {
        report.put("propagation_identities_broken", broken);
        report.fail("propagation_identities");
    }
    Ok(report)
}
