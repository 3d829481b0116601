//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.
//!
//! Run with `cargo test -p aklt-core --test acceptance`.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use aklt_core::hamiltonian::{
    build_chain_hamiltonian, build_lattice_hamiltonian, build_residual_hamiltonian, literal_phase, logical_operators,
    logical_operators_with_phase, pi_down, pi_up,
};
use aklt_core::lattice::{Lattice, QuasiChainSpec};
use aklt_core::linalg::{identity, is_unitary, max_norm, re, C64};
use aklt_core::mbqc::{
    enumerate_branches, filter_statistics, logical_map, oracle_verify, Gate, Instruction, Leaf, LogicalProgram,
    OutcomeTables, RunOptions,
};
use aklt_core::reference::reference;
use aklt_core::spectra::{block_gap, full_spectrum, kernel_dimension, kernel_vectors, knabe_epsilon, GapCertificate, SolverOptions};
use aklt_core::spin_algebra::{effective_spins, merging_unitary, spin_operators, HalfInt};
use aklt_core::sparse::SparseOperator;
use aklt_core::tensor_net::{build_ground_network, STATE_CAP};

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn opts() -> SolverOptions {
    SolverOptions::default()
}

fn c1_block_gap() -> Outcome {
    let t = Instant::now();
    let gamma = block_gap(&QuasiChainSpec::spin32(4)).map_err(|e| e.to_string())?;
    let secs = t.elapsed().as_secs_f64();
    let r = reference("block_gap_spin32");
    ensure(r.matches(gamma), format!("gamma = {gamma:.6}, expected {} +- {}", r.value, r.tolerance))?;
    ensure(secs < 1.0, format!("took {secs:.3} s"))?;
    Ok(format!("gamma = {gamma:.6} in {secs:.3} s"))
}

fn epsilon_n4() -> Result<(f64, usize, f64), String> {
    let t = Instant::now();
    let e = knabe_epsilon(&QuasiChainSpec::spin32(6), 4, &opts()).map_err(|e| e.to_string())?;
    Ok((e.epsilon, e.dim, t.elapsed().as_secs_f64()))
}

fn c2_knabe_epsilon() -> Outcome {
    let (eps, dim, secs) = epsilon_n4()?;
    let r = reference("knabe_epsilon_spin32_n4");
    ensure(dim == 32768, format!("h_4 has dimension {dim}"))?;
    ensure(r.matches(eps), format!("epsilon = {eps:.6}, expected {} +- {}", r.value, r.tolerance))?;
    ensure(secs < 300.0, format!("took {secs:.1} s"))?;
    Ok(format!("epsilon(4) = {eps:.6} on dim {dim} in {secs:.1} s"))
}

fn c3_certificate() -> Outcome {
    let gamma = block_gap(&QuasiChainSpec::spin32(4)).map_err(|e| e.to_string())?;
    let (eps, _, _) = epsilon_n4()?;
    let cert = GapCertificate::assemble(gamma, eps, 4, 1.0, Default::default());
    let r = reference("gap_bound_spin32_n4");
    ensure(r.matches(cert.delta_e_bound), format!("bound = {:.6}", cert.delta_e_bound))?;
    ensure(cert.valid && eps > 0.25, "certificate not valid")?;
    Ok(format!("Delta E >= {:.6} J, VALID", cert.delta_e_bound))
}

fn c4_spin2() -> Outcome {
    let gamma = block_gap(&QuasiChainSpec::spin2(3)).map_err(|e| e.to_string())?;
    let r = reference("block_gap_spin2");
    ensure(r.matches(gamma), format!("gamma(spin 2) = {gamma:.6}"))?;
    let eps = reference("knabe_epsilon_spin2").value;
    let bound = reference("gap_bound_spin2");
    let product = r.value * eps;
    ensure(bound.matches(product), format!("0.241 x 0.1735 = {product:.5}"))?;
    Ok(format!(
        "gamma = {gamma:.6}; epsilon_p and the bound are not reproduced at desk scale, formula check {product:.5}"
    ))
}

fn kernel_dim(op: &SparseOperator) -> Result<usize, String> {
    kernel_dimension(op, &opts()).map(|k| k.kernel_dim).map_err(|e| e.to_string())
}

fn ladder_2x2() -> Lattice {
    Lattice::ladder(2).expect("ladder")
}

fn c5_kernels() -> Outcome {
    let mut found = Vec::new();
    for n in 2..=4 {
        let h = build_chain_hamiltonian(&QuasiChainSpec::spin32(n), 1.0).map_err(|e| e.to_string())?;
        let k = kernel_dim(&h)?;
        ensure(k == 1, format!("chain N = {n}: kernel {k}"))?;
        found.push(format!("H(N={n})={k}"));
    }
    let h2d = build_lattice_hamiltonian(&ladder_2x2(), 1.0).map_err(|e| e.to_string())?;
    let k = kernel_dim(&h2d)?;
    ensure(k == 1, format!("H_2d 2x2: kernel {k}"))?;
    found.push(format!("H_2d={k}"));
    for j in [1, 2] {
        let (_, h) = build_residual_hamiltonian(&QuasiChainSpec::spin32(3), j, 1.0).map_err(|e| e.to_string())?;
        let k = kernel_dim(&h)?;
        ensure(k == 2, format!("H(j={j}): kernel {k}"))?;
        found.push(format!("H(3,{j})={k}"));
    }
    Ok(found.join(" "))
}

fn norm(v: &[C64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

fn c6_ground_state() -> Outcome {
    let mut lattices: Vec<(String, Lattice)> = (1..=4)
        .map(|n| (format!("chain N={n}"), Lattice::chain(&QuasiChainSpec::spin32(n)).expect("chain")))
        .collect();
    lattices.push(("ladder 2x1".into(), Lattice::ladder(1).expect("ladder")));
    lattices.push(("ladder 2x2".into(), ladder_2x2()));
    let mut worst_res: f64 = 0.0;
    let mut worst_ov: f64 = 1.0;
    for (name, lat) in &lattices {
        let h = build_lattice_hamiltonian(lat, 1.0).map_err(|e| e.to_string())?;
        let g = build_ground_network(lat).and_then(|n| n.to_state_vector(STATE_CAP)).map_err(|e| e.to_string())?;
        let res = norm(&h.apply(&g)) / norm(&g);
        let kernel = kernel_vectors(&h, &opts()).map_err(|e| e.to_string())?;
        ensure(kernel.len() == 1, format!("{name}: kernel {}", kernel.len()))?;
        let ip: C64 = kernel[0].iter().zip(&g).map(|(a, b)| a.conj() * b).sum();
        let ov = ip.norm_sqr() / (norm(&kernel[0]) * norm(&g)).powi(2);
        ensure(res <= 1e-9, format!("{name}: residual {res:e}"))?;
        ensure(ov >= 1.0 - 1e-10, format!("{name}: overlap {ov}"))?;
        worst_res = worst_res.max(res);
        worst_ov = worst_ov.min(ov);
    }
    Ok(format!("{} lattices, max residual {worst_res:.1e}, min overlap 1 - {:.1e}", lattices.len(), 1.0 - worst_ov))
}

fn c7_algebra() -> Outcome {
    let spec = QuasiChainSpec::spin32(1);
    ensure(is_unitary(&merging_unitary(), 1e-12), "U is not unitary")?;
    let a = spin_operators(HalfInt::THREE_HALVES).map_err(|e| e.to_string())?;
    let (sp, spp) = effective_spins();
    let id = identity(16);
    let up = sp.dot_left(&a) * re(0.5) + &id * re(5.0 / 8.0);
    let down = spp.dot_right(&a) * re(0.5) + &id * re(5.0 / 8.0);
    let du = max_norm(&(pi_up(&spec).map_err(|e| e.to_string())? - up));
    let dd = max_norm(&(pi_down(&spec).map_err(|e| e.to_string())? - down));
    ensure(du <= 1e-12 && dd <= 1e-12, format!("Pi^u defect {du:e}, Pi^d defect {dd:e}"))?;
    // two decoupled chains: every level is a sum of one level from each chain
    let single = full_spectrum(
        &build_chain_hamiltonian(&QuasiChainSpec::spin32(2), 1.0).map_err(|e| e.to_string())?,
        8192,
    )
    .map_err(|e| e.to_string())?;
    let mut spec_a: Vec<f64> = single.iter().flat_map(|x| single.iter().map(move |y| x + y)).collect();
    spec_a.sort_by(f64::total_cmp);
    let spec_b = full_spectrum(&build_lattice_hamiltonian(&ladder_2x2(), 1.0).map_err(|e| e.to_string())?, 8192)
        .map_err(|e| e.to_string())?;
    ensure(spec_a.len() == spec_b.len(), "spectra differ in length")?;
    let dev = spec_a.iter().zip(&spec_b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    ensure(dev <= 1e-9, format!("spectrum deviation {dev:e}"))?;
    Ok(format!("Pi defects {du:.1e}/{dd:.1e}, 2x2 spectrum ({} levels) deviation {dev:.1e}", spec_a.len()))
}

struct Tally {
    branches: usize,
    completed: usize,
    min_fidelity: f64,
    max_forbidden: f64,
}

fn exhaust(lattice: &Lattice, program: &LogicalProgram, budget: usize, tally: &mut Tally) -> Result<(), String> {
    let tables = OutcomeTables::embedded();
    let leaves = enumerate_branches(lattice, program, tables, &RunOptions { retry_budget: budget }, 100_000)
        .map_err(|e| e.to_string())?;
    let total: f64 = leaves.iter().map(|l| l.trajectory().probability).sum();
    ensure((total - 1.0).abs() < 1e-9, format!("branch weights sum to {total}"))?;
    for leaf in &leaves {
        tally.branches += 1;
        tally.max_forbidden = tally.max_forbidden.max(leaf.trajectory().forbidden_probability);
        if let Leaf::Completed(t) = leaf {
            tally.completed += 1;
            let r = oracle_verify(lattice, t, &logical_map(program, t)).map_err(|e| e.to_string())?;
            tally.min_fidelity = tally.min_fidelity.min(r.fidelity);
            ensure(
                (r.replay_probability - r.trajectory_probability).abs() <= 1e-9 * r.trajectory_probability + 1e-14,
                "engine probability disagrees with the contraction",
            )?;
        }
    }
    Ok(())
}

fn c8_protocol() -> Outcome {
    let mut tally = Tally { branches: 0, completed: 0, min_fidelity: 1.0, max_forbidden: 0.0 };
    let chain = Lattice::chain(&QuasiChainSpec::spin32(2)).map_err(|e| e.to_string())?;
    exhaust(&chain, &LogicalProgram::new(vec![Instruction::Readout { q: 0 }]), 2, &mut tally)?;
    for bit in 0..2 {
        let p = LogicalProgram::new(vec![Instruction::Init { q: 0, bit }, Instruction::Readout { q: 0 }]);
        exhaust(&chain, &p, 2, &mut tally)?;
    }
    for theta in [0.0, 0.3, 1.1, 2.7] {
        exhaust(&chain, &LogicalProgram::new(vec![Instruction::Rz { q: 0, theta }]), 2, &mut tally)?;
        exhaust(&chain, &LogicalProgram::new(vec![Instruction::Rx { q: 0, theta }]), 2, &mut tally)?;
    }
    let ladder = Lattice::ladder(1).map_err(|e| e.to_string())?;
    for gate in Gate::ALL {
        let p = LogicalProgram::new(vec![Instruction::Entangle { q1: 0, q2: 1, m: gate.m, n: gate.n }]);
        exhaust(&ladder, &p, 1, &mut tally)?;
    }
    ensure(tally.completed > 0, "no branch completed")?;
    ensure(tally.min_fidelity >= 1.0 - 1e-9, format!("min fidelity {}", tally.min_fidelity))?;
    ensure(tally.max_forbidden <= 1e-12, format!("forbidden outcome weight {:e}", tally.max_forbidden))?;
    Ok(format!(
        "{} branches, {} completed, min fidelity 1 - {:.1e}, forbidden weight {:.1e}",
        tally.branches,
        tally.completed,
        1.0 - tally.min_fidelity,
        tally.max_forbidden
    ))
}

fn c9_filter() -> Outcome {
    let samples = 10_000;
    let max_attempts = 8;
    let stats = filter_statistics(samples, max_attempts, 2024).map_err(|e| e.to_string())?;
    let r = reference("filter_failure_probability");
    let rate = stats.failure_rate();
    ensure(r.matches(rate), format!("failure rate {rate:.4}"))?;
    let mut worst: f64 = 0.0;
    for l in 1..=max_attempts {
        let p = 1.0 - (1.0f64 / 3.0).powi(l as i32);
        let f = stats.success_fraction(l);
        let sigma = (p * (1.0 - p) / samples as f64).sqrt();
        let z = (f - p).abs() / sigma.max(1.0 / samples as f64);
        ensure(z <= 4.0, format!("l = {l}: {f:.4} vs {p:.4}"))?;
        worst = worst.max(z);
    }
    Ok(format!("failure rate {rate:.4} over {} attempts, worst deviation {worst:.2} sigma", stats.attempts))
}

fn c10_ground_code() -> Outcome {
    let spec = QuasiChainSpec::spin32(3);
    let mut worst: f64 = 0.0;
    for j in [1, 2] {
        let (_, h) = build_residual_hamiltonian(&spec, j, 1.0).map_err(|e| e.to_string())?;
        let (sx, sz) = logical_operators(&spec, j).map_err(|e| e.to_string())?;
        let comm = sx.commutator(&h).max_abs().max(sz.commutator(&h).max_abs());
        ensure(comm <= 1e-10, format!("j = {j}: commutator {comm:e}"))?;
        let kernel = kernel_vectors(&h, &opts()).map_err(|e| e.to_string())?;
        let anti = sx.matmul(&sz).add(&sz.matmul(&sx));
        for u in &kernel {
            for v in &kernel {
                let x: C64 = u.iter().zip(anti.apply(v)).map(|(a, b)| a.conj() * b).sum();
                ensure(x.norm() <= 1e-10, format!("j = {j}: anticommutator element {}", x.norm()))?;
            }
        }
        worst = worst.max(comm);
    }
    let (_, h) = build_residual_hamiltonian(&spec, 1, 1.0).map_err(|e| e.to_string())?;
    let (lit, _) = logical_operators_with_phase(&spec, 1, literal_phase()).map_err(|e| e.to_string())?;
    Ok(format!(
        "max commutator {worst:.1e}; with the factor i on the (+3/2,-3/2) pair the commutator is {:.2}",
        lit.commutator(&h).max_abs()
    ))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("block gap", c1_block_gap),
        ("Knabe epsilon", c2_knabe_epsilon),
        ("certified bound", c3_certificate),
        ("spin-2 block gap", c4_spin2),
        ("kernel dimensions", c5_kernels),
        ("ground-state identity", c6_ground_state),
        ("algebraic identities", c7_algebra),
        ("protocol fidelity", c8_protocol),
        ("filter statistics", c9_filter),
        ("ground-code algebra", c10_ground_code),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {:>2} {name}: PASS ({detail}) [{secs:.1} s]", k + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} {name}: FAIL ({detail}) [{secs:.1} s]", k + 1);
            }
        }
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
