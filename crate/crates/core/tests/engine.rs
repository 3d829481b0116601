use aklt_core::lattice::{Lattice, QuasiChainSpec};
use aklt_core::mbqc::{
    embed_on, enumerate_branches, filter_statistics, ideal_readout_distribution, logical_map, oracle_verify, run_program,
    Gate, Instruction, Leaf, LogicalProgram, OutcomeSource, OutcomeTables, PauliFrame, ProtocolError, RunOptions, Sigma,
};
use rayon::prelude::*;

fn chain(n: usize) -> Lattice {
    Lattice::chain(&QuasiChainSpec::spin32(n)).unwrap()
}

fn check_all_leaves(lattice: &Lattice, program: &LogicalProgram, opts: &RunOptions) -> usize {
    let tables = OutcomeTables::embedded();
    let leaves = enumerate_branches(lattice, program, tables, opts, 200_000).unwrap();
    let mut completed = 0;
    let mut total = 0.0;
    for leaf in &leaves {
        let t = leaf.trajectory();
        total += t.probability;
        assert!(t.forbidden_probability <= 1e-12, "forbidden weight {}", t.forbidden_probability);
        if let Leaf::Completed(t) = leaf {
            completed += 1;
            let claimed = logical_map(program, t);
            let r = oracle_verify(lattice, t, &claimed).unwrap();
            assert!(r.fidelity > 1.0 - 1e-9, "fidelity {} on {:?}", r.fidelity, t.steps.iter().map(|s| (s.basis.clone(), s.outcome)).collect::<Vec<_>>());
            assert!((r.replay_probability - r.trajectory_probability).abs() < 1e-9 * r.trajectory_probability.max(1e-300) + 1e-12,
                "replay {} vs engine {}", r.replay_probability, r.trajectory_probability);
        }
    }
    assert!((total - 1.0).abs() < 1e-9, "branch probabilities sum to {total}");
    completed
}

#[test]
fn rz_exhaustive_single_chain() {
    for theta in [0.0, 0.3, 1.1, 2.7] {
        let p = LogicalProgram::new(vec![Instruction::Rz { q: 0, theta }]);
        let n = check_all_leaves(&chain(2), &p, &RunOptions { retry_budget: 2 });
        assert!(n > 0);
    }
}

#[test]
fn rx_exhaustive_single_chain() {
    for theta in [0.0, 0.3, 1.1, 2.7] {
        let p = LogicalProgram::new(vec![Instruction::Rx { q: 0, theta }]);
        assert!(check_all_leaves(&chain(2), &p, &RunOptions { retry_budget: 2 }) > 0);
    }
}

#[test]
fn readout_exhaustive_single_chain() {
    let p = LogicalProgram::new(vec![Instruction::Readout { q: 0 }]);
    assert!(check_all_leaves(&chain(2), &p, &RunOptions { retry_budget: 2 }) > 0);
    for bit in 0..2 {
        let p = LogicalProgram::new(vec![Instruction::Init { q: 0, bit }, Instruction::Readout { q: 0 }]);
        check_all_leaves(&chain(2), &p, &RunOptions { retry_budget: 2 });
    }
}

#[test]
fn composed_rotations_exhaustive() {
    let p = LogicalProgram::new(vec![Instruction::Rz { q: 0, theta: 0.3 }, Instruction::Rx { q: 0, theta: 1.1 }]);
    check_all_leaves(&chain(2), &p, &RunOptions { retry_budget: 1 });
}

#[test]
fn entangle_exhaustive_ladder() {
    let lattice = Lattice::ladder(1).unwrap();
    for gate in Gate::ALL {
        let p = LogicalProgram::new(vec![Instruction::Entangle { q1: 0, q2: 1, m: gate.m, n: gate.n }]);
        check_all_leaves(&lattice, &p, &RunOptions { retry_budget: 1 });
    }
}

fn bell_program() -> LogicalProgram {
    LogicalProgram::new(vec![
        Instruction::Init { q: 0, bit: 0 },
        Instruction::Init { q: 1, bit: 0 },
        Instruction::Rx { q: 0, theta: 1.1 },
        Instruction::Entangle { q1: 0, q2: 1, m: Sigma::X, n: Sigma::Y },
        Instruction::Readout { q: 0 },
        Instruction::Readout { q: 1 },
    ])
}

#[test]
fn dropping_the_frame_breaks_fidelity() {
    let lattice = chain(2);
    let p = LogicalProgram::new(vec![Instruction::Rz { q: 0, theta: 1.1 }]);
    let leaves = enumerate_branches(&lattice, &p, OutcomeTables::embedded(), &RunOptions { retry_budget: 2 }, 10_000).unwrap();
    let mut worst: f64 = 1.0;
    for leaf in &leaves {
        if let Leaf::Completed(t) = leaf {
            let mut bare = t.clone();
            bare.frame = PauliFrame::identity(1);
            worst = worst.min(oracle_verify(&lattice, &bare, &logical_map(&p, t)).unwrap().fidelity);
        }
    }
    assert!(worst < 0.5, "frame never mattered: {worst}");
}

#[test]
fn wrong_gate_is_rejected() {
    let lattice = Lattice::ladder(1).unwrap();
    let p = LogicalProgram::new(vec![Instruction::Entangle { q1: 0, q2: 1, m: Sigma::X, n: Sigma::X }]);
    let leaves = enumerate_branches(&lattice, &p, OutcomeTables::embedded(), &RunOptions { retry_budget: 1 }, 10_000).unwrap();
    let wrong = embed_on(2, &[0, 1], &Gate { m: Sigma::Y, n: Sigma::X }.matrix());
    let mut seen = 0;
    for leaf in &leaves {
        if let Leaf::Completed(t) = leaf {
            seen += 1;
            assert!(oracle_verify(&lattice, t, &wrong).unwrap().fidelity < 0.5);
        }
    }
    assert!(seen > 0);
}

#[test]
fn sampled_runs_agree_with_replay() {
    let lattice = Lattice::ladder(300).unwrap();
    let p = bell_program();
    let tables = OutcomeTables::embedded();
    for seed in 0..4 {
        let t = run_program(&lattice, &p, tables, OutcomeSource::seeded(seed), &RunOptions { retry_budget: 150 }).unwrap();
        assert!(t.completed());
        let r = oracle_verify(&lattice, &t, &logical_map(&p, &t)).unwrap();
        assert!(r.fidelity > 1.0 - 1e-9, "seed {seed}: {}", r.fidelity);
        assert!((r.replay_probability / r.trajectory_probability - 1.0).abs() < 1e-8);
    }
}

#[test]
fn runs_are_deterministic_per_seed() {
    let lattice = Lattice::ladder(300).unwrap();
    let tables = OutcomeTables::embedded();
    let opts = RunOptions { retry_budget: 150 };
    let a = run_program(&lattice, &bell_program(), tables, OutcomeSource::seeded(11), &opts).unwrap();
    let b = run_program(&lattice, &bell_program(), tables, OutcomeSource::seeded(11), &opts).unwrap();
    assert_eq!(a, b);
}

#[test]
fn readout_statistics_match_ideal_circuit() {
    let lattice = Lattice::ladder(300).unwrap();
    let p = bell_program();
    let tables = OutcomeTables::embedded();
    let samples = 4000u64;
    let bits: Vec<Vec<u8>> = (0..samples)
        .into_par_iter()
        .map(|seed| {
            let t = run_program(&lattice, &p, tables, OutcomeSource::seeded(1000 + seed), &RunOptions { retry_budget: 150 })
                .unwrap();
            t.readout_bits().into_iter().map(|(_, b)| b).collect()
        })
        .collect();
    let ideal = ideal_readout_distribution(&p, 2);
    let mut tv = 0.0;
    for (key, &pi) in &ideal {
        let freq = bits.iter().filter(|b| *b == key).count() as f64 / samples as f64;
        tv += 0.5 * (freq - pi).abs();
    }
    assert!(tv < 0.03, "total variation {tv}");
}

#[test]
fn short_lattice_and_tight_budget_fail_cleanly() {
    let tables = OutcomeTables::embedded();
    let p = LogicalProgram::new(vec![Instruction::Entangle { q1: 0, q2: 1, m: Sigma::Y, n: Sigma::Y }]);
    let lattice = Lattice::ladder(2).unwrap();
    let mut exhausted = false;
    for seed in 0..50 {
        match run_program(&lattice, &p, tables, OutcomeSource::seeded(seed), &RunOptions { retry_budget: 100 }) {
            Err(ProtocolError::LatticeExhausted { trajectory }) => {
                assert_eq!(trajectory.columns_used, 2);
                exhausted = true;
            }
            Ok(t) => assert!(t.completed()),
            Err(e) => panic!("{e}"),
        }
    }
    assert!(exhausted);
    let lattice = Lattice::ladder(50).unwrap();
    let mut budget = false;
    for seed in 0..50 {
        if let Err(ProtocolError::RetryBudgetExhausted { attempts, .. }) =
            run_program(&lattice, &p, tables, OutcomeSource::seeded(seed), &RunOptions { retry_budget: 1 })
        {
            assert_eq!(attempts, 1);
            budget = true;
        }
    }
    assert!(budget);
}

#[test]
fn invalid_program_is_rejected_before_measuring() {
    let lattice = chain(3);
    let p = LogicalProgram::new(vec![Instruction::Rz { q: 1, theta: 0.1 }]);
    let err = run_program(&lattice, &p, OutcomeTables::embedded(), OutcomeSource::seeded(0), &RunOptions::default());
    assert!(matches!(err, Err(ProtocolError::Program(_))));
}

#[test]
fn filter_failure_rate_is_a_third() {
    let stats = filter_statistics(3000, 6, 5).unwrap();
    assert!((stats.failure_rate() - 1.0 / 3.0).abs() < 0.03, "{}", stats.failure_rate());
    for l in 1..=6 {
        let expected = 1.0 - (1.0f64 / 3.0).powi(l as i32);
        assert!((stats.success_fraction(l) - expected).abs() < 0.03);
    }
}
