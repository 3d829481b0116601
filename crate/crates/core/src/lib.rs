//! Numerical laboratory for the spin-3/2 AKLT quasi-chain, its merged 2D
//! lattice, Knabe-type gap certification, and measurement-based quantum
//! computation on the resulting tensor-network ground state.

pub mod hamiltonian;
pub mod lattice;
pub mod linalg;
pub mod mbqc;
pub mod reference;
pub mod sparse;
pub mod spectra;
pub mod spin_algebra;
pub mod tensor_net;
