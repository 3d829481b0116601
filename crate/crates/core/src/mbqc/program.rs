//! Logical programs: the instruction list fed to the protocol engine.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::pauli::{Gate, Sigma};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
pub enum Instruction {
    Init { q: usize, bit: u8 },
    Rz { q: usize, theta: f64 },
    Rx { q: usize, theta: f64 },
    Entangle { q1: usize, q2: usize, m: Sigma, n: Sigma },
    Readout { q: usize },
}

impl Instruction {
    pub fn qubits(&self) -> Vec<usize> {
        match *self {
            Instruction::Init { q, .. } | Instruction::Rz { q, .. } | Instruction::Rx { q, .. } | Instruction::Readout { q } => {
                vec![q]
            }
            Instruction::Entangle { q1, q2, .. } => vec![q1, q2],
        }
    }

    /// For an entangle, the gate written as (upper chain, lower chain).
    pub fn oriented_gate(&self) -> Option<(usize, usize, Gate)> {
        match *self {
            Instruction::Entangle { q1, q2, m, n } if q1 < q2 => Some((q1, q2, Gate { m, n })),
            Instruction::Entangle { q1, q2, m, n } => Some((q2, q1, Gate { m: n, n: m })),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogicalProgram {
    pub program: Vec<Instruction>,
}

#[derive(Debug, Error, PartialEq)]
pub enum ProgramError {
    #[error("program parse error: {0}")]
    Parse(String),
    #[error("instruction {index}: qubit {q} does not exist (lattice has {n_chains} chains)")]
    NoSuchQubit { index: usize, q: usize, n_chains: usize },
    #[error("instruction {index}: chains {q1} and {q2} are not adjacent")]
    NotAdjacent { index: usize, q1: usize, q2: usize },
    #[error("instruction {index}: init must be the first operation on qubit {q}")]
    LateInit { index: usize, q: usize },
    #[error("instruction {index}: init bit must be 0 or 1, got {bit}")]
    BadBit { index: usize, bit: u8 },
    #[error("instruction {index}: qubit {q} was already read out")]
    AfterReadout { index: usize, q: usize },
    #[error("instruction {index}: theta must be finite")]
    BadAngle { index: usize },
}

impl LogicalProgram {
    pub fn new(program: Vec<Instruction>) -> Self {
        LogicalProgram { program }
    }

    /// Parse the JSON program format; errors carry serde's line/column and field.
    pub fn from_json(text: &str) -> Result<Self, ProgramError> {
        serde_json::from_str(text).map_err(|e| ProgramError::Parse(e.to_string()))
    }

    pub fn validate(&self, n_chains: usize) -> Result<(), ProgramError> {
        let mut touched = vec![false; n_chains];
        let mut read = vec![false; n_chains];
        for (index, ins) in self.program.iter().enumerate() {
            for q in ins.qubits() {
                if q >= n_chains {
                    return Err(ProgramError::NoSuchQubit { index, q, n_chains });
                }
                if read[q] {
                    return Err(ProgramError::AfterReadout { index, q });
                }
            }
            match *ins {
                Instruction::Init { q, bit } => {
                    if touched[q] {
                        return Err(ProgramError::LateInit { index, q });
                    }
                    if bit > 1 {
                        return Err(ProgramError::BadBit { index, bit });
                    }
                }
                Instruction::Rz { theta, .. } | Instruction::Rx { theta, .. } if !theta.is_finite() => {
                    return Err(ProgramError::BadAngle { index });
                }
                Instruction::Entangle { q1, q2, .. } if q1.abs_diff(q2) != 1 => {
                    return Err(ProgramError::NotAdjacent { index, q1, q2 });
                }
                Instruction::Readout { q } => read[q] = true,
                _ => {}
            }
            for q in ins.qubits() {
                touched[q] = true;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_documented_schema() {
        let p = LogicalProgram::from_json(
            r#"{"program": [{"op":"init","q":0,"bit":0}, {"op":"rz","q":0,"theta":0.7},
                {"op":"entangle","q1":0,"q2":1,"m":"X","n":"Y"}, {"op":"readout","q":0}]}"#,
        )
        .unwrap();
        assert_eq!(p.program.len(), 4);
        assert!(p.validate(2).is_ok());
        assert!(matches!(p.validate(1), Err(ProgramError::NoSuchQubit { index: 2, q: 1, .. })));
    }

    #[test]
    fn malformed_reports_position() {
        let err = LogicalProgram::from_json("{\"program\": [\n{\"op\":\"rz\",\"q\":0}]}").unwrap_err();
        let ProgramError::Parse(msg) = err else { panic!() };
        assert!(msg.contains("theta") && msg.contains("line 2"), "{msg}");
    }

    #[test]
    fn orientation_swaps_gate() {
        let ins = Instruction::Entangle { q1: 1, q2: 0, m: Sigma::X, n: Sigma::Y };
        assert_eq!(ins.oriented_gate(), Some((0, 1, Gate { m: Sigma::Y, n: Sigma::X })));
    }

    #[test]
    fn rejects_late_init_and_non_adjacent() {
        let p = LogicalProgram::new(vec![Instruction::Readout { q: 0 }, Instruction::Init { q: 0, bit: 0 }]);
        assert!(matches!(p.validate(1), Err(ProgramError::AfterReadout { .. })));
        let p = LogicalProgram::new(vec![Instruction::Rz { q: 0, theta: 0.1 }, Instruction::Init { q: 0, bit: 0 }]);
        assert!(matches!(p.validate(1), Err(ProgramError::LateInit { .. })));
        let p = LogicalProgram::new(vec![Instruction::Entangle { q1: 0, q2: 2, m: Sigma::X, n: Sigma::X }]);
        assert!(matches!(p.validate(3), Err(ProgramError::NotAdjacent { .. })));
    }
}
