//! Paulis modulo phase, Pauli frames, target gates and Clifford propagation
//! through the entangling gates.

use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::linalg::{c, kron, re, DenseOperator, C64, ZERO};

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];

    pub fn from_bits(x: bool, z: bool) -> Pauli {
        match (x, z) {
            (false, false) => Pauli::I,
            (true, false) => Pauli::X,
            (true, true) => Pauli::Y,
            (false, true) => Pauli::Z,
        }
    }

    pub fn bits(self) -> (bool, bool) {
        match self {
            Pauli::I => (false, false),
            Pauli::X => (true, false),
            Pauli::Y => (true, true),
            Pauli::Z => (false, true),
        }
    }

    /// Product modulo phase.
    pub fn mul(self, other: Pauli) -> Pauli {
        let (a, b) = self.bits();
        let (p, q) = other.bits();
        Pauli::from_bits(a ^ p, b ^ q)
    }

    pub fn matrix(self) -> DenseOperator {
        let o = re(1.0);
        let i = c(0.0, 1.0);
        match self {
            Pauli::I => DMatrix::from_row_slice(2, 2, &[o, ZERO, ZERO, o]),
            Pauli::X => DMatrix::from_row_slice(2, 2, &[ZERO, o, o, ZERO]),
            Pauli::Y => DMatrix::from_row_slice(2, 2, &[ZERO, -i, i, ZERO]),
            Pauli::Z => DMatrix::from_row_slice(2, 2, &[o, ZERO, ZERO, -o]),
        }
    }
}

impl fmt::Display for Pauli {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

/// Pauli appearing in an entangling gate `V_{m,n}`.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Sigma {
    X,
    Y,
}

impl Sigma {
    pub fn pauli(self) -> Pauli {
        match self {
            Sigma::X => Pauli::X,
            Sigma::Y => Pauli::Y,
        }
    }
}

/// `V_{m,n}` with `m` on the first factor.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Gate {
    pub m: Sigma,
    pub n: Sigma,
}

impl Gate {
    pub const ALL: [Gate; 4] = [
        Gate { m: Sigma::X, n: Sigma::X },
        Gate { m: Sigma::X, n: Sigma::Y },
        Gate { m: Sigma::Y, n: Sigma::X },
        Gate { m: Sigma::Y, n: Sigma::Y },
    ];

    pub fn swapped(self) -> Gate {
        Gate { m: self.n, n: self.m }
    }

    /// `(I (x) I + i sigma_m (x) sigma_n)/sqrt2`.
    pub fn matrix(self) -> DenseOperator {
        let id = kron(&Pauli::I.matrix(), &Pauli::I.matrix());
        let s = kron(&self.m.pauli().matrix(), &self.n.pauli().matrix());
        (id + s * c(0.0, 1.0)) * re(std::f64::consts::FRAC_1_SQRT_2)
    }

    /// `(P1', P2')` with `V (P1 (x) P2) V^dag = phase * P1' (x) P2'`.
    pub fn propagate(self, p1: Pauli, p2: Pauli) -> (Pauli, Pauli) {
        let v = self.matrix();
        let conj = &v * kron(&p1.matrix(), &p2.matrix()) * v.adjoint();
        for a in Pauli::ALL {
            for b in Pauli::ALL {
                if proportional(&conj, &kron(&a.matrix(), &b.matrix()), 1e-10) {
                    return (a, b);
                }
            }
        }
        unreachable!("V_mn is Clifford")
    }
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}{:?}", self.m, self.n)
    }
}

/// True when `a = lambda b` with `|lambda| > 0`, to relative tolerance `tol`.
pub fn proportional(a: &DenseOperator, b: &DenseOperator, tol: f64) -> bool {
    let na = a.norm();
    let nb = b.norm();
    if na < 1e-14 || nb < 1e-14 {
        return false;
    }
    let ov: C64 = a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum();
    (1.0 - ov.norm() / (na * nb)).abs() <= tol
}

/// `R_z(theta) = |0><0| + e^{i theta}|1><1|`.
pub fn rz(theta: f64) -> DenseOperator {
    DMatrix::from_row_slice(2, 2, &[re(1.0), ZERO, ZERO, C64::from_polar(1.0, theta)])
}

/// `R_x(theta) = |+><+| + e^{i theta}|-><-|`.
pub fn rx(theta: f64) -> DenseOperator {
    let e = C64::from_polar(1.0, theta);
    let a = (re(1.0) + e) * 0.5;
    let b = (re(1.0) - e) * 0.5;
    DMatrix::from_row_slice(2, 2, &[a, b, b, a])
}

/// Accumulated byproduct per logical qubit: the bond state is `F |logical>`
/// with `F = X^x Z^z` up to a global phase, which is not tracked.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PauliFrame {
    pub x: Vec<bool>,
    pub z: Vec<bool>,
    /// Always false: frames are exact only modulo global phase.
    pub phase_tracked: bool,
}

impl PauliFrame {
    pub fn identity(n: usize) -> Self {
        PauliFrame { x: vec![false; n], z: vec![false; n], phase_tracked: false }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn get(&self, q: usize) -> Pauli {
        Pauli::from_bits(self.x[q], self.z[q])
    }

    pub fn set(&mut self, q: usize, p: Pauli) {
        let (x, z) = p.bits();
        self.x[q] = x;
        self.z[q] = z;
    }

    /// Left-multiply qubit `q` by `p`.
    pub fn push(&mut self, q: usize, p: Pauli) {
        let next = p.mul(self.get(q));
        self.set(q, next);
    }

    /// Compose another frame applied after this one.
    pub fn compose(&self, later: &PauliFrame) -> PauliFrame {
        let mut out = self.clone();
        for q in 0..self.len() {
            out.push(q, later.get(q));
        }
        out
    }

    /// Dense operator `F_0 (x) F_1 (x) ...`.
    pub fn operator(&self) -> DenseOperator {
        (0..self.len()).fold(DMatrix::from_element(1, 1, re(1.0)), |acc, q| kron(&acc, &self.get(q).matrix()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vxx_propagates_z() {
        let g = Gate { m: Sigma::X, n: Sigma::X };
        // V (Z (x) I) = (Y (x) X) V up to phase
        assert_eq!(g.propagate(Pauli::Z, Pauli::I), (Pauli::Y, Pauli::X));
    }

    #[test]
    fn frame_push_is_xor() {
        let mut f = PauliFrame::identity(1);
        f.push(0, Pauli::X);
        f.push(0, Pauli::Z);
        assert_eq!(f.get(0), Pauli::Y);
        f.push(0, Pauli::Y);
        assert_eq!(f.get(0), Pauli::I);
    }

    #[test]
    fn rotations_at_zero_are_identity() {
        assert!(proportional(&rz(0.0), &Pauli::I.matrix(), 1e-14));
        assert!(proportional(&rx(0.0), &Pauli::I.matrix(), 1e-14));
    }
}
