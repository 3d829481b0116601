//! Small dense linear-algebra helpers shared by every module.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type DenseOperator = DMatrix<C64>;
pub type StateVector = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

pub fn identity(n: usize) -> DenseOperator {
    DMatrix::identity(n, n)
}

pub fn from_real(rows: usize, cols: usize, data: &[f64]) -> DenseOperator {
    DMatrix::from_row_iterator(rows, cols, data.iter().map(|&x| re(x)))
}

pub fn kron(a: &DenseOperator, b: &DenseOperator) -> DenseOperator {
    a.kronecker(b)
}

pub fn kron_all(ops: &[&DenseOperator]) -> DenseOperator {
    ops.iter()
        .fold(identity(1), |acc, op| acc.kronecker(*op))
}

pub fn max_norm(m: &DenseOperator) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn commutator(a: &DenseOperator, b: &DenseOperator) -> DenseOperator {
    a * b - b * a
}

pub fn is_hermitian(m: &DenseOperator, tol: f64) -> bool {
    m.is_square() && max_norm(&(m - m.adjoint())) <= tol
}

pub fn is_unitary(m: &DenseOperator, tol: f64) -> bool {
    m.is_square() && max_norm(&(m.adjoint() * m - identity(m.nrows()))) <= tol
}

fn is_real(m: &DenseOperator) -> bool {
    m.iter().all(|z| z.im == 0.0)
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
///
/// Purely real input takes the faster real-symmetric path.
pub fn eigh(m: &DenseOperator) -> (Vec<f64>, DenseOperator) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), DMatrix::zeros(0, 0));
    }
    let (vals, vecs) = if is_real(m) {
        let r = m.map(|z| z.re);
        let e = SymmetricEigen::new(r);
        (e.eigenvalues.as_slice().to_vec(), e.eigenvectors.map(re))
    } else {
        let h = (m + m.adjoint()) * re(0.5);
        let e = SymmetricEigen::new(h);
        (e.eigenvalues.as_slice().to_vec(), e.eigenvectors)
    };
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
    let sorted_vals = order.iter().map(|&k| vals[k]).collect();
    let sorted_vecs = DMatrix::from_fn(n, n, |i, j| vecs[(i, order[j])]);
    (sorted_vals, sorted_vecs)
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn eigvalsh(m: &DenseOperator) -> Vec<f64> {
    let n = m.nrows();
    if n == 0 {
        return Vec::new();
    }
    let mut vals: Vec<f64> = if is_real(m) {
        m.map(|z| z.re).symmetric_eigenvalues().as_slice().to_vec()
    } else {
        let h = (m + m.adjoint()) * re(0.5);
        h.symmetric_eigenvalues().as_slice().to_vec()
    };
    vals.sort_by(f64::total_cmp);
    vals
}

/// Projector onto the span of eigenvectors whose eigenvalue satisfies `keep`.
pub fn spectral_projector(m: &DenseOperator, keep: impl Fn(f64) -> bool) -> DenseOperator {
    let (vals, vecs) = eigh(m);
    let n = m.nrows();
    let mut p = DMatrix::zeros(n, n);
    for (k, &v) in vals.iter().enumerate() {
        if keep(v) {
            let col = vecs.column(k);
            p += &col * col.adjoint();
        }
    }
    p
}

/// Mixed-radix digits of `index` for the given dimensions (first site most significant).
pub fn digits(mut index: usize, dims: &[usize]) -> Vec<usize> {
    let mut out = vec![0; dims.len()];
    for k in (0..dims.len()).rev() {
        out[k] = index % dims[k];
        index /= dims[k];
    }
    out
}

/// Embed an operator acting on `sites` (in the given order) into the full product space.
///
/// Dense and intended for small spaces; the sparse builder lives in `hamiltonian`.
pub fn embed_dense(op: &DenseOperator, sites: &[usize], dims: &[usize]) -> DenseOperator {
    let total: usize = dims.iter().product();
    let local_dims: Vec<usize> = sites.iter().map(|&s| dims[s]).collect();
    let mut out = DMatrix::zeros(total, total);
    for col in 0..total {
        let dcol = digits(col, dims);
        let lc = local_index(&dcol, sites, &local_dims);
        for lr in 0..op.nrows() {
            let v = op[(lr, lc)];
            if v == ZERO {
                continue;
            }
            let ldig = digits(lr, &local_dims);
            let mut drow = dcol.clone();
            for (k, &s) in sites.iter().enumerate() {
                drow[s] = ldig[k];
            }
            out[(flat_index(&drow, dims), col)] += v;
        }
    }
    out
}

pub fn flat_index(digits: &[usize], dims: &[usize]) -> usize {
    digits
        .iter()
        .zip(dims)
        .fold(0, |acc, (&d, &n)| acc * n + d)
}

fn local_index(full: &[usize], sites: &[usize], local_dims: &[usize]) -> usize {
    sites
        .iter()
        .zip(local_dims)
        .fold(0, |acc, (&s, &n)| acc * n + full[s])
}

pub fn normalize(v: &StateVector) -> StateVector {
    let n = v.norm();
    v / re(n)
}

/// |<a|b>|^2 / (<a|a><b|b>).
pub fn overlap_sq(a: &StateVector, b: &StateVector) -> f64 {
    let ov = a.dotc(b).norm_sqr();
    ov / (a.norm_squared() * b.norm_squared())
}

/// Distance between two operators modulo a global phase, after normalising both
/// to unit Frobenius norm.
pub fn phase_distance(a: &DenseOperator, b: &DenseOperator) -> f64 {
    let na = a.norm();
    let nb = b.norm();
    if na == 0.0 || nb == 0.0 {
        return if na == nb { 0.0 } else { f64::INFINITY };
    }
    let inner: C64 = a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum();
    let phase = if inner.norm() > 0.0 { inner / inner.norm() } else { ONE };
    let diff = a * (phase / re(na)) - b / re(nb);
    max_norm(&diff)
}

/// Process fidelity |Tr(A^dagger B)|^2 / (Tr(A^dagger A) Tr(B^dagger B)).
pub fn process_fidelity(a: &DenseOperator, b: &DenseOperator) -> f64 {
    let inner: C64 = a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum();
    let na = a.norm_squared();
    let nb = b.norm_squared();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    inner.norm_sqr() / (na * nb)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigh_sorts_and_reconstructs() {
        let m = from_real(3, 3, &[2.0, 1.0, 0.0, 1.0, 2.0, 0.0, 0.0, 0.0, -1.0]);
        let (vals, vecs) = eigh(&m);
        assert!((vals[0] + 1.0).abs() < 1e-12);
        assert!((vals[1] - 1.0).abs() < 1e-12);
        assert!((vals[2] - 3.0).abs() < 1e-12);
        let d = DMatrix::from_diagonal(&DVector::from_iterator(3, vals.iter().map(|&x| re(x))));
        assert!(max_norm(&(&vecs * d * vecs.adjoint() - &m)) < 1e-12);
    }

    #[test]
    fn complex_hermitian_path() {
        let m = DMatrix::from_row_slice(2, 2, &[re(0.0), c(0.0, -1.0), c(0.0, 1.0), re(0.0)]);
        assert_eq!(eigvalsh(&m).len(), 2);
        let v = eigvalsh(&m);
        assert!((v[0] + 1.0).abs() < 1e-12 && (v[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn embedding_matches_kron() {
        let a = from_real(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let b = from_real(3, 3, &[1.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 3.0]);
        let ab = kron(&a, &b);
        let dims = [3, 2, 3];
        let direct = kron_all(&[&identity(3), &a, &b]);
        assert!(max_norm(&(embed_dense(&ab, &[1, 2], &dims) - &direct)) < 1e-15);
        // reversed site order swaps the kron factors
        let ba = kron(&b, &a);
        assert!(max_norm(&(embed_dense(&ba, &[2, 1], &dims) - &direct)) < 1e-15);
    }

    #[test]
    fn phase_distance_ignores_global_phase() {
        let a = from_real(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let b = &a * c(0.0, 3.0);
        assert!(phase_distance(&a, &b) < 1e-15);
        assert!((process_fidelity(&a, &b) - 1.0).abs() < 1e-15);
    }
}
