//! Spin matrices, total-spin projectors, effective two-level spins and the
//! merging unitary.
//!
//! Every spin-s space is ordered by descending magnetization
//! `m = +s, s-1, ..., -s`, so level index `k` carries `m = s - k`.

use std::fmt;

use nalgebra::DMatrix;
use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{c, re, DenseOperator, ZERO};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SpinError {
    #[error("spin magnitude must be non-negative, got {0}")]
    Negative(HalfInt),
    #[error("total spin {total} is outside the coupling range of {s1} and {s2}")]
    CouplingOutOfRange { s1: HalfInt, s2: HalfInt, total: HalfInt },
    #[error("{0} is not a level of a spin-3/2 site")]
    NotALevel(HalfInt),
}

/// A half-integer stored as twice its value.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HalfInt {
    twice: i32,
}

impl HalfInt {
    pub const ZERO: HalfInt = HalfInt { twice: 0 };
    pub const HALF: HalfInt = HalfInt { twice: 1 };
    pub const ONE: HalfInt = HalfInt { twice: 2 };
    pub const THREE_HALVES: HalfInt = HalfInt { twice: 3 };
    pub const TWO: HalfInt = HalfInt { twice: 4 };
    pub const FIVE_HALVES: HalfInt = HalfInt { twice: 5 };
    pub const THREE: HalfInt = HalfInt { twice: 6 };
    pub const FOUR: HalfInt = HalfInt { twice: 8 };

    pub const fn from_twice(twice: i32) -> Self {
        HalfInt { twice }
    }

    pub const fn twice(self) -> i32 {
        self.twice
    }

    pub fn value(self) -> f64 {
        f64::from(self.twice) / 2.0
    }

    /// Dimension `2s + 1` of the spin-s representation.
    pub fn dim(self) -> usize {
        assert!(self.twice >= 0, "dimension of a negative spin");
        (self.twice + 1) as usize
    }

    /// Magnetizations in basis order (descending).
    pub fn levels(self) -> Vec<HalfInt> {
        (0..=self.twice)
            .map(|k| HalfInt::from_twice(self.twice - 2 * k))
            .collect()
    }

    /// Basis index of magnetization `m` within the spin-`self` space.
    pub fn level_index(self, m: HalfInt) -> Option<usize> {
        let k = self.twice - m.twice;
        if m.twice.abs() <= self.twice && k % 2 == 0 {
            Some((k / 2) as usize)
        } else {
            None
        }
    }

    /// True when `self` and `other` differ by an integer.
    fn same_parity(self, other: HalfInt) -> bool {
        (self.twice - other.twice) % 2 == 0
    }
}

impl fmt::Display for HalfInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.twice % 2 == 0 {
            write!(f, "{}", self.twice / 2)
        } else {
            write!(f, "{}/2", self.twice)
        }
    }
}

impl std::ops::Add for HalfInt {
    type Output = HalfInt;
    fn add(self, o: HalfInt) -> HalfInt {
        HalfInt::from_twice(self.twice + o.twice)
    }
}

impl std::ops::Sub for HalfInt {
    type Output = HalfInt;
    fn sub(self, o: HalfInt) -> HalfInt {
        HalfInt::from_twice(self.twice - o.twice)
    }
}

impl std::ops::Neg for HalfInt {
    type Output = HalfInt;
    fn neg(self) -> HalfInt {
        HalfInt::from_twice(-self.twice)
    }
}

/// Hermitian spin matrices `(Sx, Sy, Sz)`.
#[derive(Clone, Debug)]
pub struct SpinTriple {
    pub x: DenseOperator,
    pub y: DenseOperator,
    pub z: DenseOperator,
}

impl SpinTriple {
    pub fn components(&self) -> [&DenseOperator; 3] {
        [&self.x, &self.y, &self.z]
    }

    /// `S_a . S_b` as an operator on the product space `a (x) b`.
    pub fn dot(&self, other: &SpinTriple) -> DenseOperator {
        self.x.kronecker(&other.x) + self.y.kronecker(&other.y) + self.z.kronecker(&other.z)
    }

    /// Raising operator `Sx + i Sy`.
    pub fn raising(&self) -> DenseOperator {
        &self.x + &self.y * c(0.0, 1.0)
    }
}

/// Spin matrices for spin `s` in the descending-m basis.
pub fn spin_operators(s: HalfInt) -> Result<SpinTriple, SpinError> {
    if s.twice() < 0 {
        return Err(SpinError::Negative(s));
    }
    let d = s.dim();
    let sv = s.value();
    let ms: Vec<f64> = s.levels().iter().map(|m| m.value()).collect();
    let mut plus = DMatrix::zeros(d, d);
    for k in 1..d {
        let m = ms[k];
        plus[(k - 1, k)] = re(((sv - m) * (sv + m + 1.0)).sqrt());
    }
    let minus = plus.adjoint();
    let x = (&plus + &minus) * re(0.5);
    let y = (&plus - &minus) * c(0.0, -0.5);
    let z = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        d,
        ms.iter().map(|&m| re(m)),
    ));
    Ok(SpinTriple { x, y, z })
}

fn factorial(n: i64) -> i128 {
    (1..=n as i128).product()
}

/// Clebsch–Gordan coefficient `<j1 m1; j2 m2 | J M>` in the Condon–Shortley
/// convention (Racah's closed form; the alternating sum is exact rational).
pub fn clebsch_gordan(j1: HalfInt, m1: HalfInt, j2: HalfInt, m2: HalfInt, jt: HalfInt, mt: HalfInt) -> f64 {
    if m1 + m2 != mt
        || m1.twice().abs() > j1.twice()
        || m2.twice().abs() > j2.twice()
        || mt.twice().abs() > jt.twice()
        || !j1.same_parity(m1)
        || !j2.same_parity(m2)
        || !jt.same_parity(mt)
        || jt.twice() > j1.twice() + j2.twice()
        || jt.twice() < (j1.twice() - j2.twice()).abs()
    {
        return 0.0;
    }
    // all combinations below are integers; work with twice-values halved
    let h = |x: i32| -> i64 {
        debug_assert!(x % 2 == 0);
        i64::from(x / 2)
    };
    let (a, b, cc) = (j1.twice(), j2.twice(), jt.twice());
    let (ma, mb, mc) = (m1.twice(), m2.twice(), mt.twice());
    let t1 = h(a + b - cc);
    let t2 = h(a - ma);
    let t3 = h(b + mb);
    let t4 = h(cc - b + ma);
    let t5 = h(cc - a - mb);
    let kmin = 0.max(-t4).max(-t5);
    let kmax = t1.min(t2).min(t3);
    let mut sum = Ratio::<i128>::from_integer(0);
    for k in kmin..=kmax {
        let den = factorial(k)
            * factorial(t1 - k)
            * factorial(t2 - k)
            * factorial(t3 - k)
            * factorial(t4 + k)
            * factorial(t5 + k);
        let term = Ratio::new(if k % 2 == 0 { 1 } else { -1 }, den);
        sum += term;
    }
    let f = |n: i64| factorial(n) as f64;
    let pref = f64::from(cc + 1) * f(h(cc + a - b)) * f(h(cc - a + b)) * f(h(a + b - cc))
        / f(h(a + b + cc) + 1)
        * f(h(cc + mc))
        * f(h(cc - mc))
        * f(h(a - ma))
        * f(h(a + ma))
        * f(h(b - mb))
        * f(h(b + mb));
    let s = *sum.numer() as f64 / *sum.denom() as f64;
    s * pref.sqrt()
}

/// Projector onto total spin `total` inside `s1 (x) s2`, built from
/// Clebsch–Gordan vectors.
pub fn total_spin_projector(s1: HalfInt, s2: HalfInt, total: HalfInt) -> Result<DenseOperator, SpinError> {
    for s in [s1, s2, total] {
        if s.twice() < 0 {
            return Err(SpinError::Negative(s));
        }
    }
    if total.twice() > s1.twice() + s2.twice()
        || total.twice() < (s1.twice() - s2.twice()).abs()
        || !total.same_parity(s1 + s2)
    {
        return Err(SpinError::CouplingOutOfRange { s1, s2, total });
    }
    let (d1, d2) = (s1.dim(), s2.dim());
    let mut p = DMatrix::zeros(d1 * d2, d1 * d2);
    for mt in total.levels() {
        let mut v = nalgebra::DVector::<crate::linalg::C64>::zeros(d1 * d2);
        for (i1, m1) in s1.levels().into_iter().enumerate() {
            for (i2, m2) in s2.levels().into_iter().enumerate() {
                let cg = clebsch_gordan(s1, m1, s2, m2, total, mt);
                if cg != 0.0 {
                    v[i1 * d2 + i2] = re(cg);
                }
            }
        }
        p += &v * v.adjoint();
    }
    Ok(p)
}

/// `U |m1>|m2> = |3/2, m1 + 2 m2>` on two spin-1/2 sites.
pub fn merging_unitary() -> DenseOperator {
    let half = HalfInt::HALF;
    let big = HalfInt::THREE_HALVES;
    let mut u = DMatrix::from_element(4, 4, ZERO);
    for (i1, m1) in half.levels().into_iter().enumerate() {
        for (i2, m2) in half.levels().into_iter().enumerate() {
            let m = m1 + m2 + m2;
            let row = big.level_index(m).expect("m1 + 2 m2 is a spin-3/2 level");
            u[(row, i1 * 2 + i2)] = re(1.0);
        }
    }
    u
}

/// Three 4x4 operators acting as a spin-1/2 on a pair of spin-3/2 levels each.
#[derive(Clone, Debug)]
pub struct EffectiveSpinTriple {
    pub x: DenseOperator,
    pub y: DenseOperator,
    pub z: DenseOperator,
}

impl EffectiveSpinTriple {
    pub fn components(&self) -> [&DenseOperator; 3] {
        [&self.x, &self.y, &self.z]
    }

    /// `S_other . self` with `other` acting on the first tensor factor.
    pub fn dot_left(&self, other: &SpinTriple) -> DenseOperator {
        other.x.kronecker(&self.x) + other.y.kronecker(&self.y) + other.z.kronecker(&self.z)
    }

    /// `self . S_other` with `self` acting on the first tensor factor.
    pub fn dot_right(&self, other: &SpinTriple) -> DenseOperator {
        self.x.kronecker(&other.x) + self.y.kronecker(&other.y) + self.z.kronecker(&other.z)
    }

    fn add(&self, o: &EffectiveSpinTriple) -> EffectiveSpinTriple {
        EffectiveSpinTriple { x: &self.x + &o.x, y: &self.y + &o.y, z: &self.z + &o.z }
    }
}

/// `s(alpha, beta)`: spin-1/2 operators on the spin-3/2 levels `alpha`
/// (spin down) and `beta` (spin up), zero elsewhere.
pub fn effective_spin(alpha: HalfInt, beta: HalfInt) -> Result<EffectiveSpinTriple, SpinError> {
    let big = HalfInt::THREE_HALVES;
    let ia = big.level_index(alpha).ok_or(SpinError::NotALevel(alpha))?;
    let ib = big.level_index(beta).ok_or(SpinError::NotALevel(beta))?;
    let half = spin_operators(HalfInt::HALF)?;
    let lift = |op: &DenseOperator| {
        let mut m = DMatrix::from_element(4, 4, ZERO);
        let idx = [ib, ia];
        for r in 0..2 {
            for col in 0..2 {
                m[(idx[r], idx[col])] = op[(r, col)];
            }
        }
        m
    };
    Ok(EffectiveSpinTriple { x: lift(&half.x), y: lift(&half.y), z: lift(&half.z) })
}

/// `(S', S'')` with `S' = s(-3/2,-1/2) + s(+1/2,+3/2)` and
/// `S'' = s(-3/2,+1/2) + s(-1/2,+3/2)`.
pub fn effective_spins() -> (EffectiveSpinTriple, EffectiveSpinTriple) {
    let h = |t| HalfInt::from_twice(t);
    let sp = effective_spin(h(-3), h(-1))
        .expect("valid levels")
        .add(&effective_spin(h(1), h(3)).expect("valid levels"));
    let spp = effective_spin(h(-3), h(1))
        .expect("valid levels")
        .add(&effective_spin(h(-1), h(3)).expect("valid levels"));
    (sp, spp)
}
