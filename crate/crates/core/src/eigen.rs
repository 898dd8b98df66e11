//! Lowest eigenpairs: Lanczos with full reorthogonalization, a dense oracle,
//! and ground-state selection that stays on one branch across level crossings.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pauli::{build_global_spin, build_hamiltonian, parity, staggered_magnetization, ModelKind, ModelSpec, SparseOperator, SpinAxis};
use crate::state::{dot, norm, QuantumState};
use crate::C64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    /// Relative gap below which the two lowest levels count as degenerate.
    pub degeneracy_rel: f64,
    /// Upper bound on the bytes held by the Krylov basis.
    pub krylov_budget: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 4000, seed: 2024, degeneracy_rel: 1e-11, krylov_budget: 1 << 30 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sector {
    Full,
    /// Π σ^z = +1
    EvenParity,
}

#[derive(Clone, Debug)]
pub struct EigenResult {
    pub e0: f64,
    pub e1: f64,
    pub ground: QuantumState,
    pub first_excited: QuantumState,
    pub gap: f64,
    pub residual: f64,
    pub degenerate: bool,
    pub iterations: usize,
}

fn sub_scaled(w: &mut [C64], q: &[C64], s: C64) {
    w.iter_mut().zip(q).for_each(|(a, b)| *a -= s * b);
}

fn project(v: &mut [C64], sector: Sector) {
    if sector == Sector::EvenParity {
        for (b, z) in v.iter_mut().enumerate() {
            if parity(b) < 0 {
                *z = C64::new(0.0, 0.0);
            }
        }
    }
}

/// Make the largest amplitude real and positive, so outputs do not depend on
/// the arbitrary phase picked by the solver.
fn fix_phase(v: &mut [C64]) {
    let (mut best, mut arg) = (0.0, 0.0);
    for z in v.iter() {
        // strict comparison keeps the first index among exact ties
        if z.norm() > best * (1.0 + 1e-12) {
            best = z.norm();
            arg = z.arg();
        }
    }
    let p = C64::from_polar(1.0, -arg);
    v.iter_mut().for_each(|z| *z *= p);
}

/// Real operators get real start vectors, so their eigenvectors stay exactly
/// real and Bargmann phases in real parameter planes vanish identically.
fn random_vector(rng: &mut ChaCha8Rng, dim: usize, sector: Sector, real: bool) -> Vec<C64> {
    let im = if real { 0.0 } else { 1.0 };
    let mut v: Vec<C64> = (0..dim).map(|_| C64::new(rng.random::<f64>() - 0.5, im * (rng.random::<f64>() - 0.5))).collect();
    project(&mut v, sector);
    v
}

/// Gram–Schmidt against `basis`, repeated only when a pass cancels most of
/// the vector (Kahan–Parlett "twice is enough").
fn orthogonalize(w: &mut [C64], basis: &[Vec<C64>]) {
    for _ in 0..2 {
        let before = norm(w);
        for q in basis {
            let c = dot(q, w);
            sub_scaled(w, q, c);
        }
        if norm(w) > 0.7 * before {
            break;
        }
    }
}

fn residual(op: &SparseOperator, v: &[C64], e: f64) -> Result<f64> {
    let mut hv = op.apply_vec(v)?;
    sub_scaled(&mut hv, v, C64::new(e, 0.0));
    Ok(norm(&hv))
}

fn tridiagonal_eigen(alpha: &[f64], beta: &[f64]) -> (Vec<f64>, DMatrix<f64>) {
    let m = alpha.len();
    let mut t = DMatrix::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alpha[i];
        if i + 1 < m {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    let eig = SymmetricEigen::new(t);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = DMatrix::from_fn(m, m, |r, c| eig.eigenvectors[(r, order[c])]);
    (vals, vecs)
}

/// Two lowest eigenpairs by Lanczos. `k` must be 2.
pub fn lanczos_lowest(op: &SparseOperator, k: usize, tol: f64, max_iter: usize, seed: u64) -> Result<EigenResult> {
    if k != 2 {
        return Err(Error::InvalidInput(format!("k = {k}: only the two lowest eigenpairs are supported")));
    }
    let opts = SolverOptions { tol, max_iter, seed, ..SolverOptions::default() };
    lanczos(op, Sector::Full, &opts)
}

pub fn lanczos(op: &SparseOperator, sector: Sector, opts: &SolverOptions) -> Result<EigenResult> {
    const K: usize = 2;
    if !op.is_hermitian() {
        return Err(Error::NotHermitian);
    }
    let dim = op.dim();
    let eff_dim = if sector == Sector::EvenParity { dim / 2 } else { dim };
    if eff_dim < 4 {
        return Err(Error::InvalidInput(format!("dimension {eff_dim} too small for Lanczos")));
    }
    let m_max = (opts.krylov_budget / (16 * dim)).clamp(K + 8, 600).min(eff_dim);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let real = op.is_real();
    let mut start = random_vector(&mut rng, dim, sector, real);
    let mut iterations = 0;
    let mut best_residual = f64::INFINITY;

    loop {
        let nrm = norm(&start);
        start.iter_mut().for_each(|z| *z /= nrm);
        let mut basis = vec![start];
        let (mut alpha, mut beta) = (Vec::new(), Vec::new());
        let mut w = vec![C64::new(0.0, 0.0); dim];
        let (vals, vecs) = loop {
            let j = basis.len() - 1;
            op.apply_into(&basis[j], &mut w)?;
            project(&mut w, sector);
            iterations += 1;
            let a = dot(&basis[j], &w).re;
            sub_scaled(&mut w, &basis[j], C64::new(a, 0.0));
            if j > 0 {
                sub_scaled(&mut w, &basis[j - 1], C64::new(beta[j - 1], 0.0));
            }
            orthogonalize(&mut w, &basis);
            alpha.push(a);
            let b = norm(&w);
            let m = basis.len();
            let scale = alpha.iter().map(|x| x.abs()).fold(0.0, f64::max).max(1.0);
            let breakdown = b < 1e-10 * scale;
            let exhausted = m >= eff_dim;
            let out_of_budget = m >= m_max || iterations >= opts.max_iter;

            if m >= K && (m % (m / 8).max(4) == 0 || exhausted || out_of_budget || breakdown) {
                let (vals, vecs) = tridiagonal_eigen(&alpha, &beta);
                let converged = (0..K).all(|i| b * vecs[(m - 1, i)].abs() < 0.1 * opts.tol);
                if (converged && !breakdown) || exhausted || out_of_budget {
                    break (vals, vecs);
                }
            }
            if breakdown {
                // Invariant subspace: members of degenerate eigenspaces beyond
                // the one already found are unreachable, so continue with a
                // fresh direction.
                let mut v = random_vector(&mut rng, dim, sector, real);
                orthogonalize(&mut v, &basis);
                let nv = norm(&v);
                if nv < 1e-8 {
                    break tridiagonal_eigen(&alpha, &beta);
                }
                v.iter_mut().for_each(|z| *z /= nv);
                beta.push(0.0);
                basis.push(v);
            } else {
                beta.push(b);
                basis.push(w.iter().map(|z| z / b).collect());
            }
        };

        let m = alpha.len();
        let mut ys = Vec::with_capacity(K);
        for i in 0..K {
            let mut y = vec![C64::new(0.0, 0.0); dim];
            for (l, q) in basis.iter().enumerate().take(m) {
                let s = vecs[(l, i)];
                y.iter_mut().zip(q).for_each(|(a, b)| *a += s * b);
            }
            let ny = norm(&y);
            y.iter_mut().for_each(|z| *z /= ny);
            ys.push(y);
        }
        let r0 = residual(op, &ys[0], vals[0])?;
        let r1 = residual(op, &ys[1], vals[1])?;
        best_residual = best_residual.min(r0.max(r1));
        if r0 < opts.tol && r1 < opts.tol {
            let (e0, e1) = (vals[0], vals[1]);
            let mut it = ys.into_iter();
            let mut g = it.next().unwrap();
            let mut x = it.next().unwrap();
            fix_phase(&mut g);
            fix_phase(&mut x);
            let gap = (e1 - e0).max(0.0);
            return Ok(EigenResult {
                e0,
                e1,
                ground: QuantumState::new(g)?,
                first_excited: QuantumState::new(x)?,
                gap,
                residual: r0,
                degenerate: gap < opts.degeneracy_rel * e0.abs().max(1.0),
                iterations,
            });
        }
        if iterations >= opts.max_iter {
            return Err(Error::NoConvergence { iterations, residual: best_residual });
        }
        // restart from the current Ritz pair (weighted so both survive)
        start = ys[0].iter().zip(&ys[1]).map(|(a, b)| a + b * 0.5).collect();
    }
}

pub fn dense_lowest(op: &SparseOperator, k: usize) -> Result<EigenResult> {
    if op.dim() > 1 << 12 {
        return Err(Error::DenseTooLarge(op.dim()));
    }
    if !op.is_hermitian() {
        return Err(Error::NotHermitian);
    }
    if k != 2 || op.dim() < 2 {
        return Err(Error::InvalidInput("dense_lowest returns the two lowest eigenpairs".into()));
    }
    dense_from_matrix(op.to_dense())
}

fn dense_from_matrix(m: DMatrix<C64>) -> Result<EigenResult> {
    let h = m.clone();
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let pick = |i: usize| {
        let mut v: Vec<C64> = eig.eigenvectors.column(order[i]).iter().copied().collect();
        fix_phase(&mut v);
        v
    };
    let (e0, e1) = (eig.eigenvalues[order[0]], eig.eigenvalues[order[1]]);
    let g = pick(0);
    let gv = nalgebra::DVector::from_column_slice(&g);
    let res = (&h * &gv - &gv * C64::new(e0, 0.0)).norm();
    let gap = (e1 - e0).max(0.0);
    Ok(EigenResult {
        e0,
        e1,
        ground: QuantumState::new(g)?,
        first_excited: QuantumState::new(pick(1))?,
        gap,
        residual: res,
        degenerate: gap < SolverOptions::default().degeneracy_rel * e0.abs().max(1.0),
        iterations: 0,
    })
}

/// The observable whose largest eigenvector breaks ties inside a degenerate
/// ground doublet when no earlier state is available.
fn order_parameter(spec: &ModelSpec) -> Result<SparseOperator> {
    match spec.kind {
        ModelKind::FerroIsing => build_global_spin(spec.n, SpinAxis::Z),
        ModelKind::AntiferroIsing => staggered_magnetization(spec.n),
        ModelKind::XyChain => build_global_spin(spec.n, SpinAxis::Z),
    }
}

/// The XY chain is solved in the even-parity sector, where its free-fermion
/// solution lives; the Ising chains use the full space.
pub fn sector_for(spec: &ModelSpec) -> Sector {
    if spec.kind == ModelKind::XyChain {
        Sector::EvenParity
    } else {
        Sector::Full
    }
}

pub fn ground_state(spec: &ModelSpec, opts: &SolverOptions) -> Result<EigenResult> {
    let h = build_hamiltonian(spec)?;
    lanczos(&h, sector_for(spec), opts)
}

/// Ground state with a consistent branch choice inside a (near-)degenerate
/// doublet: the projection of `previous` if given, else the doublet state
/// maximizing the order parameter.
pub fn ground_state_tracked(spec: &ModelSpec, previous: Option<&QuantumState>, opts: &SolverOptions) -> Result<EigenResult> {
    let mut res = ground_state(spec, opts)?;
    if !res.degenerate {
        return Ok(res);
    }
    let (v0, v1) = (res.ground.amplitudes(), res.first_excited.amplitudes());
    if let Some(p) = previous {
        let (c0, c1) = (dot(v0, p.amplitudes()), dot(v1, p.amplitudes()));
        if (c0.norm_sqr() + c1.norm_sqr()).sqrt() > 1e-6 {
            let mut v: Vec<C64> = v0.iter().zip(v1).map(|(a, b)| a * c0 + b * c1).collect();
            fix_phase(&mut v);
            res.ground = QuantumState::new(v)?;
            return Ok(res);
        }
    }
    let o = order_parameter(spec)?;
    let (o0, o1) = (o.apply_vec(v0)?, o.apply_vec(v1)?);
    let m00 = dot(v0, &o0).re;
    let m11 = dot(v1, &o1).re;
    let m01 = dot(v0, &o1);
    // top eigenvector of [[m00, m01], [m01*, m11]]
    let half = (m00 - m11) / 2.0;
    let r = (half * half + m01.norm_sqr()).sqrt();
    if r < 1e-12 {
        return Ok(res);
    }
    let (c0, c1) = if half >= 0.0 {
        (C64::new(half + r, 0.0), m01.conj())
    } else {
        (m01, C64::new(r - half, 0.0))
    };
    let mut v: Vec<C64> = v0.iter().zip(v1).map(|(a, b)| a * c0 + b * c1).collect();
    fix_phase(&mut v);
    res.ground = QuantumState::new(v)?;
    Ok(res)
}
