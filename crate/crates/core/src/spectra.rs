//! Sector-blocked eigensolvers and the Knabe gap-certification pipeline.
//!
//! Operators at or below `dense_max_dim` are diagonalized densely (sector by
//! sector when charge labels are present). Larger operators use a Lanczos
//! iteration with full reorthogonalization, one eigenpair per run, locking
//! converged vectors so the next run finds the next eigenvalue up.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hamiltonian::{
    build_boundary_subchain_sum, build_chain_hamiltonian, build_subchain_sum, interior_block, HamiltonianError,
    KERNEL_TOL,
};
use crate::lattice::QuasiChainSpec;
use crate::linalg::{eigvalsh, C64, ZERO};
use crate::sparse::SparseOperator;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("eigensolver did not converge in sector {sector:?} (dim {dim}); converged so far: {found:?}")]
    NotConverged { sector: Vec<i32>, dim: usize, found: Vec<f64> },
    #[error("dimension {dim} exceeds the configured cap {cap}")]
    DimensionCap { dim: usize, cap: usize },
    #[error("operator is not Hermitian (defect {0:e})")]
    NotHermitian(f64),
    #[error("requested {requested} eigenvalues from an operator of dimension {dim}")]
    TooMany { requested: usize, dim: usize },
    #[error(transparent)]
    Hamiltonian(#[from] HamiltonianError),
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SolverOptions {
    /// Dense diagonalization at or below this operator dimension.
    pub dense_max_dim: usize,
    pub kernel_tol: f64,
    /// Residual bound relative to the operator-norm estimate.
    pub residual_rel_tol: f64,
    pub max_krylov: usize,
    pub max_restarts: usize,
    pub seed: u64,
    /// Refuse operators above this dimension.
    pub dimension_cap: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            dense_max_dim: 4096,
            kernel_tol: KERNEL_TOL,
            residual_rel_tol: 1e-8,
            max_krylov: 160,
            max_restarts: 60,
            seed: 0x5eed,
            dimension_cap: 1 << 24,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Dense,
    Lanczos,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SectorReport {
    pub label: Vec<i32>,
    pub dim: usize,
    pub method: Method,
    /// Lowest eigenvalues resolved in this sector (ascending).
    pub eigenvalues: Vec<f64>,
    pub residuals: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EigenReport {
    pub requested: usize,
    pub eigenvalues: Vec<f64>,
    pub residuals: Vec<f64>,
    pub converged: Vec<bool>,
    pub kernel_tol: f64,
    pub norm_estimate: f64,
    pub sectors: Vec<SectorReport>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KernelReport {
    pub kernel_dim: usize,
    /// Smallest eigenvalue at or above the kernel tolerance (None if the operator is all kernel).
    pub first_nonzero: Option<f64>,
    pub kernel_tol: f64,
    pub norm_estimate: f64,
    pub sectors: Vec<SectorReport>,
}

/// Operator-norm estimate by power iteration with a fixed start vector.
pub fn norm_estimate(op: &SparseOperator) -> f64 {
    let d = op.dim();
    if d == 0 {
        return 0.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x9e37);
    let mut v: Vec<C64> = (0..d).map(|_| C64::new(rng.gen::<f64>() - 0.5, 0.0)).collect();
    let mut lambda = 0.0;
    for _ in 0..60 {
        let n = norm(&v);
        if n == 0.0 {
            return 0.0;
        }
        v.iter_mut().for_each(|x| *x /= n);
        let w = op.apply(&v);
        lambda = norm(&w);
        v = w;
    }
    lambda.max(f64::MIN_POSITIVE)
}

fn norm(v: &[C64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn axpy(y: &mut [C64], a: C64, x: &[C64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += a * xi);
}

fn orthogonalize(w: &mut [C64], basis: &[Vec<C64>]) {
    for _ in 0..2 {
        for b in basis {
            let p = dot(b, w);
            axpy(w, -p, b);
        }
    }
}

fn random_vector(rng: &mut ChaCha8Rng, d: usize) -> Vec<C64> {
    (0..d).map(|_| C64::new(rng.gen::<f64>() - 0.5, 0.0)).collect()
}

fn residual(op: &SparseOperator, v: &[C64], lambda: f64) -> f64 {
    let mut w = op.apply(v);
    axpy(&mut w, C64::new(-lambda, 0.0), v);
    norm(&w)
}

/// Lowest eigenpair of `op` restricted to the complement of `locked`.
fn lanczos_lowest(
    op: &SparseOperator,
    locked: &[Vec<C64>],
    tol: f64,
    opts: &SolverOptions,
    rng: &mut ChaCha8Rng,
) -> Option<(f64, Vec<C64>, f64)> {
    let d = op.dim();
    let avail = d.checked_sub(locked.len())?;
    if avail == 0 {
        return None;
    }
    let mut start = random_vector(rng, d);
    for _ in 0..=opts.max_restarts {
        orthogonalize(&mut start, locked);
        let n0 = norm(&start);
        if n0 < 1e-14 {
            start = random_vector(rng, d);
            continue;
        }
        start.iter_mut().for_each(|x| *x /= n0);
        let m_max = avail.min(opts.max_krylov);
        let mut basis: Vec<Vec<C64>> = vec![start.clone()];
        let mut alphas: Vec<f64> = Vec::new();
        let mut betas: Vec<f64> = Vec::new();
        let mut best: Option<(f64, Vec<f64>)> = None;
        loop {
            let j = basis.len() - 1;
            let mut w = op.apply(&basis[j]);
            let a = dot(&basis[j], &w).re;
            alphas.push(a);
            orthogonalize(&mut w, &basis);
            orthogonalize(&mut w, locked);
            let b = norm(&w);
            let m = alphas.len();
            let check = m == m_max || m % 12 == 0 || b < 1e-12;
            if check {
                let t = DMatrix::from_fn(m, m, |r, c| {
                    if r == c {
                        alphas[r]
                    } else if r + 1 == c || c + 1 == r {
                        betas[r.min(c)]
                    } else {
                        0.0
                    }
                });
                let e = SymmetricEigen::new(t);
                let k = (0..m).min_by(|&x, &y| e.eigenvalues[x].total_cmp(&e.eigenvalues[y])).expect("m > 0");
                let theta = e.eigenvalues[k];
                let y: Vec<f64> = e.eigenvectors.column(k).iter().copied().collect();
                let est = b * y[m - 1].abs();
                best = Some((theta, y));
                if est <= 0.1 * tol || m == m_max {
                    break;
                }
            }
            if b < 1e-12 {
                // invariant subspace: continue with a fresh orthogonal direction
                let mut fresh = random_vector(rng, d);
                orthogonalize(&mut fresh, &basis);
                orthogonalize(&mut fresh, locked);
                let nf = norm(&fresh);
                if nf < 1e-10 {
                    break;
                }
                fresh.iter_mut().for_each(|x| *x /= nf);
                betas.push(0.0);
                basis.push(fresh);
            } else {
                w.iter_mut().for_each(|x| *x /= b);
                betas.push(b);
                basis.push(w);
            }
        }
        let (_, y) = best?;
        let mut x = vec![ZERO; d];
        for (coef, v) in y.iter().zip(&basis) {
            axpy(&mut x, C64::new(*coef, 0.0), v);
        }
        orthogonalize(&mut x, locked);
        let nx = norm(&x);
        x.iter_mut().for_each(|z| *z /= nx);
        let lambda = op.expectation(&x);
        let r = residual(op, &x, lambda);
        if r <= tol {
            return Some((lambda, x, r));
        }
        start = x;
    }
    None
}

/// Resolve the lowest eigenvalues of one sector until `enough` says stop.
fn solve_sector(
    op: &SparseOperator,
    label: &[i32],
    max_count: usize,
    enough: &(dyn Fn(&[f64]) -> bool + Sync),
    tol: f64,
    opts: &SolverOptions,
) -> Result<SectorReport, SolverError> {
    let d = op.dim();
    if d <= opts.dense_max_dim {
        let vals = eigvalsh(&op.to_dense());
        let mut take = vals.len().min(max_count);
        for k in 1..=vals.len().min(max_count) {
            if enough(&vals[..k]) {
                take = k;
                break;
            }
        }
        let vals = vals[..take].to_vec();
        let residuals = vec![0.0; vals.len()];
        return Ok(SectorReport { label: label.to_vec(), dim: d, method: Method::Dense, eigenvalues: vals, residuals });
    }
    let seed = opts.seed ^ label.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, &q| (h ^ q as u64).wrapping_mul(0x100_0000_01b3));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut locked: Vec<Vec<C64>> = Vec::new();
    let mut vals = Vec::new();
    let mut residuals = Vec::new();
    while vals.len() < max_count.min(d) {
        match lanczos_lowest(op, &locked, tol, opts, &mut rng) {
            Some((lambda, v, r)) => {
                vals.push(lambda);
                residuals.push(r);
                locked.push(v);
            }
            None => {
                return Err(SolverError::NotConverged { sector: label.to_vec(), dim: d, found: vals });
            }
        }
        if enough(&vals) {
            break;
        }
    }
    // locking can return values slightly out of order near degeneracies
    let mut idx: Vec<usize> = (0..vals.len()).collect();
    idx.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
    let vals2 = idx.iter().map(|&k| vals[k]).collect();
    let res2 = idx.iter().map(|&k| residuals[k]).collect();
    Ok(SectorReport { label: label.to_vec(), dim: d, method: Method::Lanczos, eigenvalues: vals2, residuals: res2 })
}

fn check_op(op: &SparseOperator, opts: &SolverOptions) -> Result<(), SolverError> {
    if op.dim() > opts.dimension_cap {
        return Err(SolverError::DimensionCap { dim: op.dim(), cap: opts.dimension_cap });
    }
    if !op.hermitian {
        return Err(SolverError::NotHermitian(op.hermiticity_defect()));
    }
    Ok(())
}

/// Split an operator into its charge sectors (one sector when unlabeled).
fn sectors(op: &SparseOperator) -> Vec<(Vec<i32>, SparseOperator)> {
    match &op.sectors {
        Some(s) => s.labels.iter().cloned().zip(s.members()).map(|(l, m)| (l, op.restrict(&m))).collect(),
        None => vec![(Vec::new(), op.clone())],
    }
}

fn per_sector(
    op: &SparseOperator,
    max_count: usize,
    enough: &(dyn Fn(&[f64]) -> bool + Sync),
    opts: &SolverOptions,
) -> Result<(f64, Vec<SectorReport>), SolverError> {
    check_op(op, opts)?;
    let scale = norm_estimate(op);
    let tol = opts.residual_rel_tol * scale;
    let dense_whole = op.dim() <= opts.dense_max_dim;
    let local = SolverOptions { dense_max_dim: if dense_whole { usize::MAX } else { 0 }, ..opts.clone() };
    let parts = sectors(op);
    let reports: Result<Vec<SectorReport>, SolverError> = parts
        .par_iter()
        .map(|(label, sub)| solve_sector(sub, label, max_count, enough, tol, &local))
        .collect();
    Ok((scale, reports?))
}

/// The `k` lowest eigenvalues across all sectors.
pub fn eigs_lowest(op: &SparseOperator, k: usize, opts: &SolverOptions) -> Result<EigenReport, SolverError> {
    if k == 0 || k > op.dim() {
        return Err(SolverError::TooMany { requested: k, dim: op.dim() });
    }
    let (scale, reports) = per_sector(op, k, &|_: &[f64]| false, opts)?;
    let mut all: Vec<(f64, f64)> =
        reports.iter().flat_map(|s| s.eigenvalues.iter().copied().zip(s.residuals.iter().copied())).collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    all.truncate(k);
    let tol = opts.residual_rel_tol * scale;
    Ok(EigenReport {
        requested: k,
        eigenvalues: all.iter().map(|e| e.0).collect(),
        residuals: all.iter().map(|e| e.1).collect(),
        converged: all.iter().map(|e| e.1 <= tol).collect(),
        kernel_tol: opts.kernel_tol,
        norm_estimate: scale,
        sectors: reports,
    })
}

/// Kernel dimension of a PSD operator, exhibiting the first eigenvalue above
/// the tolerance in every sector that has one.
pub fn kernel_dimension(op: &SparseOperator, opts: &SolverOptions) -> Result<KernelReport, SolverError> {
    let tol = opts.kernel_tol;
    let enough = move |v: &[f64]| v.last().is_some_and(|&x| x >= tol);
    let (scale, reports) = per_sector(op, usize::MAX, &enough, opts)?;
    let kernel_dim = reports.iter().map(|s| s.eigenvalues.iter().filter(|&&x| x < tol).count()).sum();
    let first_nonzero = reports
        .iter()
        .filter_map(|s| s.eigenvalues.iter().copied().find(|&x| x >= tol))
        .min_by(f64::total_cmp);
    Ok(KernelReport { kernel_dim, first_nonzero, kernel_tol: tol, norm_estimate: scale, sectors: reports })
}

/// All eigenvalues, sector by sector, densely. Each sector must fit `max_sector`.
pub fn full_spectrum(op: &SparseOperator, max_sector: usize) -> Result<Vec<f64>, SolverError> {
    let parts = sectors(op);
    if let Some((_, big)) = parts.iter().find(|(_, s)| s.dim() > max_sector) {
        return Err(SolverError::DimensionCap { dim: big.dim(), cap: max_sector });
    }
    let mut all: Vec<f64> = parts.par_iter().flat_map(|(_, s)| eigvalsh(&s.to_dense())).collect();
    all.sort_by(f64::total_cmp);
    Ok(all)
}

/// Smallest nonzero eigenvalue of the interior block.
pub fn block_gap(spec: &QuasiChainSpec) -> Result<f64, SolverError> {
    let b = interior_block(spec)?;
    let vals = eigvalsh(&b.op);
    vals.into_iter()
        .find(|&v| v >= KERNEL_TOL)
        .ok_or(SolverError::NotConverged { sector: vec![], dim: b.op.nrows(), found: vec![] })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EpsilonReport {
    pub n: usize,
    pub epsilon: f64,
    pub kernel_dim: usize,
    pub dim: usize,
    pub kernel: KernelReport,
}

fn epsilon_from(op: &SparseOperator, n: usize, opts: &SolverOptions) -> Result<EpsilonReport, SolverError> {
    if op.dim() > opts.dimension_cap {
        return Err(SolverError::DimensionCap { dim: op.dim(), cap: opts.dimension_cap });
    }
    let kernel = kernel_dimension(op, opts)?;
    let epsilon = kernel
        .first_nonzero
        .ok_or(SolverError::NotConverged { sector: vec![], dim: op.dim(), found: vec![] })?;
    Ok(EpsilonReport { n, epsilon, kernel_dim: kernel.kernel_dim, dim: op.dim(), kernel })
}

/// Smallest nonzero eigenvalue of the interior sub-chain sum `h_n`.
pub fn knabe_epsilon(spec: &QuasiChainSpec, n: usize, opts: &SolverOptions) -> Result<EpsilonReport, SolverError> {
    let dim = (spec.a_dim() * (1usize << spec.pendants_per_a)).checked_pow(n as u32 + 1).unwrap_or(usize::MAX);
    if dim > opts.dimension_cap {
        return Err(SolverError::DimensionCap { dim, cap: opts.dimension_cap });
    }
    let h = build_subchain_sum(spec, n, 1)?;
    epsilon_from(&h.op, n, opts)
}

/// Same as [`knabe_epsilon`] with the left boundary block as the first block.
pub fn knabe_epsilon_boundary(spec: &QuasiChainSpec, n: usize, opts: &SolverOptions) -> Result<EpsilonReport, SolverError> {
    let h = build_boundary_subchain_sum(spec, n)?;
    epsilon_from(&h.op, n, opts)
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct GapCertificate {
    pub gamma: f64,
    pub epsilon: f64,
    pub n: usize,
    pub coupling: f64,
    /// `J gamma n/(n-1) (epsilon - 1/n)`.
    pub delta_e_bound: f64,
    /// True iff `epsilon > 1/n`.
    pub valid: bool,
    pub metadata: CertificateMetadata,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Default)]
pub struct CertificateMetadata {
    pub subchain_dim: usize,
    pub subchain_kernel_dim: usize,
    pub sector_sizes: Vec<usize>,
    pub sector_eigenvalue_counts: Vec<usize>,
    pub kernel_tol: f64,
    pub residual_rel_tol: f64,
    pub boundary_epsilon: Option<f64>,
}

impl GapCertificate {
    /// Pure assembly from the solver outputs.
    pub fn assemble(gamma: f64, epsilon: f64, n: usize, coupling: f64, metadata: CertificateMetadata) -> Self {
        let nf = n as f64;
        let delta_e_bound = coupling * gamma * (nf / (nf - 1.0)) * (epsilon - 1.0 / nf);
        GapCertificate { gamma, epsilon, n, coupling, delta_e_bound, valid: epsilon > 1.0 / nf, metadata }
    }
}

/// Knabe certificate: `gamma` from the block, `epsilon` from `h_n`.
pub fn certify_gap(
    spec: &QuasiChainSpec,
    n: usize,
    coupling: f64,
    with_boundary: bool,
    opts: &SolverOptions,
) -> Result<GapCertificate, SolverError> {
    if n < 2 {
        return Err(HamiltonianError::SubchainTooShort(n).into());
    }
    let gamma = block_gap(spec)?;
    let eps = knabe_epsilon(spec, n, opts)?;
    let boundary_epsilon = if with_boundary { Some(knabe_epsilon_boundary(spec, n, opts)?.epsilon) } else { None };
    let metadata = CertificateMetadata {
        subchain_dim: eps.dim,
        subchain_kernel_dim: eps.kernel_dim,
        sector_sizes: eps.kernel.sectors.iter().map(|s| s.dim).collect(),
        sector_eigenvalue_counts: eps.kernel.sectors.iter().map(|s| s.eigenvalues.len()).collect(),
        kernel_tol: opts.kernel_tol,
        residual_rel_tol: opts.residual_rel_tol,
        boundary_epsilon,
    };
    Ok(GapCertificate::assemble(gamma, eps.epsilon, n, coupling, metadata))
}

/// Gap of the finite chain: smallest eigenvalue above the (unique) ground energy 0.
pub fn finite_size_gap(spec: &QuasiChainSpec, coupling: f64, opts: &SolverOptions) -> Result<f64, SolverError> {
    let h = build_chain_hamiltonian(spec, coupling)?;
    let k = kernel_dimension(&h, opts)?;
    k.first_nonzero.ok_or(SolverError::NotConverged { sector: vec![], dim: h.dim(), found: vec![] })
}

/// Kernel vectors of an operator (all sectors), as full-space vectors.
pub fn kernel_vectors(op: &SparseOperator, opts: &SolverOptions) -> Result<Vec<Vec<C64>>, SolverError> {
    check_op(op, opts)?;
    let scale = norm_estimate(op);
    let tol = opts.residual_rel_tol * scale;
    let members: Vec<Vec<usize>> = match &op.sectors {
        Some(s) => s.members(),
        None => vec![(0..op.dim()).collect()],
    };
    let labels: Vec<Vec<i32>> = match &op.sectors {
        Some(s) => s.labels.clone(),
        None => vec![Vec::new()],
    };
    // same dense/Lanczos policy as `per_sector`
    let dense = op.dim() <= opts.dense_max_dim;
    let per: Result<Vec<Vec<Vec<C64>>>, SolverError> = members
        .par_iter()
        .zip(labels.par_iter())
        .map(|(m, label)| {
            let sub = op.restrict(m);
            let local: Vec<Vec<C64>> = if dense {
                let (vals, vecs) = crate::linalg::eigh(&sub.to_dense());
                vals.iter()
                    .enumerate()
                    .filter(|(_, &v)| v < opts.kernel_tol)
                    .map(|(k, _)| vecs.column(k).iter().copied().collect())
                    .collect()
            } else {
                let seed = opts.seed ^ label.iter().fold(7u64, |h, &q| h.wrapping_mul(31).wrapping_add(q as u64));
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut locked: Vec<Vec<C64>> = Vec::new();
                loop {
                    match lanczos_lowest(&sub, &locked, tol, opts, &mut rng) {
                        Some((l, v, _)) if l < opts.kernel_tol => locked.push(v),
                        Some(_) => break,
                        None if locked.len() == sub.dim() => break,
                        None => {
                            return Err(SolverError::NotConverged { sector: label.clone(), dim: sub.dim(), found: vec![] })
                        }
                    }
                }
                locked
            };
            Ok(local
                .into_iter()
                .map(|v| {
                    let mut full = vec![ZERO; op.dim()];
                    for (k, &g) in m.iter().enumerate() {
                        full[g] = v[k];
                    }
                    full
                })
                .collect())
        })
        .collect();
    Ok(per?.into_iter().flatten().collect())
}
