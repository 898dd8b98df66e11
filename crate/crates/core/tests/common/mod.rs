//! Independent oracles: dense Kronecker-product Hamiltonians, finite-difference
//! QFIM, analytic single-spin Berry curvature, even-sector XY diagonalization.
#![allow(dead_code)]

use critmetro::metrology::{Point, Probe, StateFamily};
use critmetro::{QuantumState, Result, C64};
use nalgebra::{DMatrix, DVector, Matrix3, SymmetricEigen};

const I: C64 = C64::new(0.0, 1.0);

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Pauli matrices in the (↑, ↓) basis, ↑ being σz = +1.
pub fn pauli(axis: usize) -> DMatrix<C64> {
    match axis {
        0 => DMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(1.0), c(0.0)]),
        1 => DMatrix::from_row_slice(2, 2, &[c(0.0), -I, I, c(0.0)]),
        _ => DMatrix::from_row_slice(2, 2, &[c(1.0), c(0.0), c(0.0), c(-1.0)]),
    }
}

/// Operator `ops` acting on the listed sites of an n-spin chain; site 0 is
/// the least significant bit of the basis index.
pub fn sites(n: usize, ops: &[(usize, DMatrix<C64>)]) -> DMatrix<C64> {
    let mut m = DMatrix::from_element(1, 1, c(1.0));
    for s in (0..n).rev() {
        let f = ops.iter().find(|(i, _)| *i == s).map(|(_, o)| o.clone()).unwrap_or_else(|| DMatrix::identity(2, 2));
        m = m.kronecker(&f);
    }
    m
}

/// s = +1 ferro (−zz + h·σ), s = −1 antiferro (+zz − h·σ), periodic.
pub fn ising_dense(n: usize, h: [f64; 3], s: f64) -> DMatrix<C64> {
    let dim = 1 << n;
    let mut m = DMatrix::zeros(dim, dim);
    for i in 0..n {
        m -= sites(n, &[(i, pauli(2)), ((i + 1) % n, pauli(2))]) * c(s);
        for a in 0..3 {
            if h[a] != 0.0 {
                m += sites(n, &[(i, pauli(a))]) * c(s * h[a]);
            }
        }
    }
    m
}

/// Lowest eigenpair of a dense Hermitian matrix, and the gap.
pub fn dense_ground(h: &DMatrix<C64>) -> (f64, DVector<C64>, f64) {
    let e = SymmetricEigen::new(h.clone());
    let mut order: Vec<usize> = (0..e.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| e.eigenvalues[a].total_cmp(&e.eigenvalues[b]));
    let v = e.eigenvectors.column(order[0]).into_owned();
    (e.eigenvalues[order[0]], v, e.eigenvalues[order[1]] - e.eigenvalues[order[0]])
}

/// F_μν = 4 Re[⟨∂μψ|∂νψ⟩ − ⟨∂μψ|ψ⟩⟨ψ|∂νψ⟩] with central differences of
/// gauge-fixed dense ground states.
pub fn fd_qfim(ham: impl Fn(&[f64; 3]) -> DMatrix<C64>, point: [f64; 3], eps: f64) -> Matrix3<f64> {
    let (_, psi, _) = dense_ground(&ham(&point));
    let gauge = |v: DVector<C64>| {
        let o = psi.dotc(&v);
        v * (o.conj() / o.norm())
    };
    let mut d = Vec::new();
    for a in 0..3 {
        let (mut p, mut m) = (point, point);
        p[a] += eps;
        m[a] -= eps;
        let vp = gauge(dense_ground(&ham(&p)).1);
        let vm = gauge(dense_ground(&ham(&m)).1);
        d.push((vp - vm) / c(2.0 * eps));
    }
    Matrix3::from_fn(|a, b| 4.0 * (d[a].dotc(&d[b]) - d[a].dotc(&psi) * psi.dotc(&d[b])).re)
}

/// Ground state of B·σ for a single spin: the spin points along −B̂.
pub struct SingleSpin;

impl SingleSpin {
    pub fn state(b: &Point) -> Vec<C64> {
        let r = (b[0] * b[0] + b[1] * b[1] + b[2] * b[2]).sqrt();
        let (nx, ny, nz) = (-b[0] / r, -b[1] / r, -b[2] / r);
        let theta = nz.clamp(-1.0, 1.0).acos();
        let phi = ny.atan2(nx);
        vec![c((theta / 2.0).cos()), C64::from_polar((theta / 2.0).sin(), phi)]
    }

    /// U_μν = −ε_μνλ B_λ / (2|B|³): half the solid angle per unit area swept
    /// by −B̂, counterclockwise loops giving positive phase about the spin.
    pub fn curvature(b: &Point, mu: usize, nu: usize) -> f64 {
        let r3 = (b[0] * b[0] + b[1] * b[1] + b[2] * b[2]).powf(1.5);
        let l = 3 - mu - nu;
        let eps = match (mu, nu) {
            (0, 1) | (1, 2) | (2, 0) => 1.0,
            _ => -1.0,
        };
        -eps * b[l] / (2.0 * r3)
    }
}

impl StateFamily for SingleSpin {
    fn probe(&self, point: &Point, _previous: Option<&QuantumState>) -> Result<Probe> {
        Ok(Probe { state: QuantumState::new(Self::state(point))?, degenerate: false })
    }
}

/// Even-parity (Π σz = +1) ground state of the periodic XY chain
/// −Σ[(1+γ)/2 xx + (1−γ)/2 yy + λ z]: xx flips a pair, yy flips it with
/// sign −z_i z_j.
pub struct XyEd {
    pub e0: f64,
    pub f: Matrix3<f64>,
    pub u: Matrix3<f64>,
}

fn z(b: usize, i: usize) -> f64 {
    if (b >> i) & 1 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// S_axis ψ by explicit spin flips (σy|s⟩ = i·z|s̄⟩).
pub fn apply_spin(n: usize, axis: usize, psi: &DVector<C64>) -> DVector<C64> {
    let mut out = DVector::zeros(psi.len());
    for b in 0..psi.len() {
        for i in 0..n {
            match axis {
                0 => out[b ^ (1 << i)] += psi[b] * 0.5,
                1 => out[b ^ (1 << i)] += psi[b] * I * (0.5 * z(b, i)),
                _ => out[b] += psi[b] * (0.5 * z(b, i)),
            }
        }
    }
    out
}

fn translate(b: usize, n: usize) -> usize {
    ((b << 1) | (b >> (n - 1))) & ((1 << n) - 1)
}

/// The couplings are non-positive off the diagonal in the σz basis, so the
/// even-sector ground state is positive and translation invariant: it is
/// found in the zero-momentum block spanned by normalized orbit sums.
pub fn xy_ed(n: usize, gamma: f64, lambda: f64) -> XyEd {
    let dim = 1usize << n;
    let mut rep = vec![usize::MAX; dim];
    let mut orbits: Vec<Vec<usize>> = Vec::new();
    for b in (0..dim).filter(|b| b.count_ones() % 2 == 0) {
        if rep[b] != usize::MAX {
            continue;
        }
        let mut orbit = vec![b];
        let mut t = translate(b, n);
        while t != b {
            orbit.push(t);
            t = translate(t, n);
        }
        for &o in &orbit {
            rep[o] = orbits.len();
        }
        orbits.push(orbit);
    }
    let m = orbits.len();
    let mut h = DMatrix::<f64>::zeros(m, m);
    for (r, orbit) in orbits.iter().enumerate() {
        let b = orbit[0];
        let d = orbit.len() as f64;
        for i in 0..n {
            let j = (i + 1) % n;
            h[(r, r)] -= lambda * z(b, i);
            let s = b ^ (1 << i) ^ (1 << j);
            let k = rep[s];
            let amp = (1.0 + gamma) / 2.0 - (1.0 - gamma) / 2.0 * z(b, i) * z(b, j);
            h[(k, r)] -= amp * (d / orbits[k].len() as f64).sqrt();
        }
    }
    let e = SymmetricEigen::new(h);
    let k = e.eigenvalues.imin();
    let mut psi = DVector::<C64>::zeros(dim);
    for (r, orbit) in orbits.iter().enumerate() {
        let a = e.eigenvectors[(r, k)] / (orbit.len() as f64).sqrt();
        for &b in orbit {
            psi[b] = c(a);
        }
    }
    let s: Vec<DVector<C64>> = (0..3).map(|a| apply_spin(n, a, &psi)).collect();
    let mean: Vec<f64> = s.iter().map(|v| psi.dotc(v).re).collect();
    let f = Matrix3::from_fn(|a, b| 4.0 * (s[a].dotc(&s[b]).re - mean[a] * mean[b]));
    // U_μν = −i⟨[S_μ, S_ν]⟩ = 2 Im⟨S_μ S_ν⟩
    let u = Matrix3::from_fn(|a, b| 2.0 * s[a].dotc(&s[b]).im);
    XyEd { e0: e.eigenvalues[k], f, u }
}
