//! Measurement-based computation on the merged resource: bases, filter,
//! outcome tables, the column-by-column engine and its contraction oracle.

pub mod bases;
pub mod engine;
pub mod oracle;
pub mod pauli;
pub mod program;
pub mod tables;

pub use bases::{basis_catalog, Axis, CatalogEntry, FilterPovm, MeasurementBasis};
pub use engine::{
    enumerate_branches, filter_statistics, run_program, ChainOutcome, ColumnAction, Effect, Leaf, OutcomeSource,
    Protocol, ProtocolError, RunOptions, Step, StepStatus, Trajectory,
};
pub use oracle::{embed_on, ideal_readout_distribution, logical_map, oracle_verify, OracleReport};
pub use pauli::{Gate, Pauli, PauliFrame, Sigma};
pub use program::{Instruction, LogicalProgram, ProgramError};
pub use tables::OutcomeTables;
