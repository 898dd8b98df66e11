//! XY chain as free Majorana fermions.
//!
//! Jordan–Wigner: a_{2k} = S_k σ^x_k, a_{2k+1} = S_k σ^y_k with the string
//! S_k = Π_{j<k} σ^z_j, so σ^z_k = −i a_{2k} a_{2k+1}. The wrap-around bond
//! is reduced inside the sector Π σ^z = +1, which is where the ground state is
//! taken. The Gaussian ground state is fixed by Γ, ⟨a_j a_k⟩ = δ_jk + iΓ_jk.

use nalgebra::{DMatrix, Matrix3, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrology::{restrict, Energies, MetroTensors, ParamKind};
use crate::pauli::SpinAxis;
use crate::C64;

pub const MAX_SITES: usize = 4096;

/// coeff · a_{m0} a_{m1} ⋯ with strictly increasing modes.
#[derive(Clone, Debug, PartialEq)]
pub struct MajoranaString {
    pub coeff: C64,
    pub modes: Vec<usize>,
}

impl MajoranaString {
    pub fn scalar(c: C64) -> Self {
        Self { coeff: c, modes: Vec::new() }
    }

    pub fn mode(m: usize) -> Self {
        Self { coeff: C64::new(1.0, 0.0), modes: vec![m] }
    }

    /// Product with normal ordering: each transposition of distinct
    /// Majoranas flips the sign and a_m² = 1.
    pub fn mul(&self, other: &Self) -> Self {
        let mut v: Vec<usize> = self.modes.iter().chain(&other.modes).copied().collect();
        let mut swaps = 0usize;
        for i in 1..v.len() {
            let mut j = i;
            while j > 0 && v[j - 1] > v[j] {
                v.swap(j - 1, j);
                swaps += 1;
                j -= 1;
            }
        }
        let mut modes = Vec::with_capacity(v.len());
        let mut i = 0;
        while i < v.len() {
            if i + 1 < v.len() && v[i] == v[i + 1] {
                i += 2;
            } else {
                modes.push(v[i]);
                i += 1;
            }
        }
        let sign = if swaps % 2 == 0 { 1.0 } else { -1.0 };
        Self { coeff: self.coeff * other.coeff * sign, modes }
    }

    /// σ^axis on `site`.
    pub fn pauli(site: usize, axis: SpinAxis) -> Self {
        let sz = |k: usize| Self { coeff: C64::new(0.0, -1.0), modes: vec![2 * k, 2 * k + 1] };
        match axis {
            SpinAxis::Z => sz(site),
            SpinAxis::X | SpinAxis::Y => {
                let mut s = Self::scalar(C64::new(1.0, 0.0));
                for j in 0..site {
                    s = s.mul(&sz(j));
                }
                let m = if axis == SpinAxis::X { 2 * site } else { 2 * site + 1 };
                s.mul(&Self::mode(m))
            }
        }
    }

    /// Π_k σ^z_k
    pub fn parity(n: usize) -> Self {
        (0..n).fold(Self::scalar(C64::new(1.0, 0.0)), |acc, k| acc.mul(&Self::pauli(k, SpinAxis::Z)))
    }

    pub fn product(ops: &[(usize, SpinAxis)]) -> Self {
        ops.iter().fold(Self::scalar(C64::new(1.0, 0.0)), |acc, &(k, a)| acc.mul(&Self::pauli(k, a)))
    }
}

/// Pfaffian of a real antisymmetric matrix by Parlett–Reid elimination with
/// pivoting (reduction to skew-tridiagonal form).
pub fn pfaffian(m: &DMatrix<f64>) -> Result<f64> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::Pfaffian("matrix is not square".into()));
    }
    if n % 2 == 1 {
        return Ok(0.0);
    }
    let mut a = m.clone();
    let mut pf = 1.0;
    for k in (0..n.saturating_sub(1)).step_by(2) {
        let mut kp = k + 1;
        for i in k + 2..n {
            if a[(i, k)].abs() > a[(kp, k)].abs() {
                kp = i;
            }
        }
        if kp != k + 1 {
            a.swap_rows(k + 1, kp);
            a.swap_columns(k + 1, kp);
            pf = -pf;
        }
        let piv = a[(k, k + 1)];
        if piv == 0.0 {
            return Ok(0.0);
        }
        pf *= piv;
        if k + 2 < n {
            let tau: Vec<f64> = (k + 2..n).map(|j| a[(k, j)] / piv).collect();
            let col: Vec<f64> = (k + 2..n).map(|i| a[(i, k + 1)]).collect();
            for (ii, i) in (k + 2..n).enumerate() {
                for (jj, j) in (k + 2..n).enumerate() {
                    a[(i, j)] += tau[ii] * col[jj] - col[ii] * tau[jj];
                }
            }
        }
    }
    if !pf.is_finite() {
        return Err(Error::Pfaffian(format!("non-finite result for a {n}×{n} block")));
    }
    Ok(pf)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FreeFermionSolution {
    pub n: usize,
    pub gamma: f64,
    pub lambda: f64,
    /// Single-particle energies ε_k ≥ 0, ascending.
    pub modes: Vec<f64>,
    pub majorana_corr: DMatrix<f64>,
    pub energy: f64,
    /// The lowest mode is occupied to reach even parity.
    pub parity_flipped: bool,
}

impl FreeFermionSolution {
    /// ⟨op⟩ by Wick's theorem: coeff · Pf(iΓ restricted to the modes).
    pub fn expect(&self, op: &MajoranaString) -> Result<C64> {
        let m = op.modes.len();
        if m % 2 == 1 {
            return Ok(C64::new(0.0, 0.0));
        }
        if m == 0 {
            return Ok(op.coeff);
        }
        let sub = DMatrix::from_fn(m, m, |i, j| self.majorana_corr[(op.modes[i], op.modes[j])]);
        let i_pow = [C64::new(1.0, 0.0), C64::new(0.0, 1.0), C64::new(-1.0, 0.0), C64::new(0.0, -1.0)][(m / 2) % 4];
        Ok(op.coeff * i_pow * pfaffian(&sub)?)
    }

    /// Lowest excitation energy within the even sector.
    pub fn first_excited_energy(&self) -> f64 {
        let e = &self.modes;
        if e.len() < 2 {
            return f64::NAN;
        }
        if self.parity_flipped {
            self.energy + (e[1] - e[0]).min(e[1] + e.get(2).copied().unwrap_or(f64::INFINITY))
        } else {
            self.energy + e[0] + e[1]
        }
    }
}

/// Quadratic Majorana form of the XY chain in the even sector:
/// H = c + (i/4) Σ A_jk a_j a_k.
fn xy_quadratic_form(n: usize, gamma: f64, lambda: f64) -> Result<(f64, DMatrix<f64>)> {
    let parity = MajoranaString::parity(n);
    let mut terms: Vec<MajoranaString> = Vec::new();
    for i in 0..n {
        let j = (i + 1) % n;
        let xx = MajoranaString::product(&[(i, SpinAxis::X), (j, SpinAxis::X)]);
        let yy = MajoranaString::product(&[(i, SpinAxis::Y), (j, SpinAxis::Y)]);
        let z = MajoranaString::pauli(i, SpinAxis::Z);
        for (mut t, w) in [(xx, -(1.0 + gamma) / 2.0), (yy, -(1.0 - gamma) / 2.0), (z, -lambda)] {
            t.coeff *= w;
            if t.modes.len() > 2 {
                // equal to t on the Π σ^z = +1 sector
                t = t.mul(&parity);
            }
            terms.push(t);
        }
    }
    let mut a = DMatrix::zeros(2 * n, 2 * n);
    let mut c = 0.0;
    for t in terms {
        match t.modes.as_slice() {
            [] => c += t.coeff.re,
            &[p, q] => {
                // κ a_p a_q ↔ A_pq = −2iκ, real for Hermitian terms
                let apq = (C64::new(0.0, -2.0) * t.coeff).re;
                a[(p, q)] += apq;
                a[(q, p)] -= apq;
            }
            other => return Err(Error::InvalidModel(format!("non-quadratic term on modes {other:?}"))),
        }
    }
    Ok((c, a))
}

pub fn solve_xy(n: usize, gamma: f64, lambda: f64) -> Result<FreeFermionSolution> {
    if !(3..=MAX_SITES).contains(&n) {
        return Err(Error::SizeCap { n, cap: MAX_SITES });
    }
    if !(gamma > 0.0 && gamma <= 1.0) || !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidModel(format!("gamma = {gamma}, lambda = {lambda}")));
    }
    let (c, a) = xy_quadratic_form(n, gamma, lambda)?;
    let m = 2 * n;
    let ata = a.transpose() * &a;
    let eig = SymmetricEigen::new(ata);
    let scale = eig.eigenvalues.iter().cloned().fold(0.0, f64::max).max(1e-300);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[x].total_cmp(&eig.eigenvalues[y]));

    // Γ = A (AᵀA)^{-1/2}, built pairwise from an A-invariant 2-plane per mode
    // so that zero modes and degenerate levels are handled uniformly.
    let mut gamma_m = DMatrix::zeros(m, m);
    let mut used: Vec<nalgebra::DVector<f64>> = Vec::new();
    let mut planes: Vec<(f64, nalgebra::DVector<f64>, nalgebra::DVector<f64>)> = Vec::new();
    for &k in &order {
        let mut w1 = eig.eigenvectors.column(k).into_owned();
        for u in &used {
            let d = u.dot(&w1);
            w1 -= u * d;
        }
        let nw = w1.norm();
        if nw < 1e-6 {
            continue;
        }
        w1 /= nw;
        let ev = eig.eigenvalues[k].max(0.0);
        let mut w2 = if ev > 1e-14 * scale { &a * &w1 / ev.sqrt() } else { nalgebra::DVector::zeros(m) };
        if w2.norm() < 0.5 {
            // zero mode: pair with the next unused null direction
            let mut found = None;
            for &k2 in &order {
                if k2 == k || eig.eigenvalues[k2] > 1e-14 * scale {
                    continue;
                }
                let mut v = eig.eigenvectors.column(k2).into_owned();
                for u in used.iter().chain(std::iter::once(&w1)) {
                    let d = u.dot(&v);
                    v -= u * d;
                }
                if v.norm() > 1e-6 {
                    found = Some(v.normalize());
                    break;
                }
            }
            w2 = found.ok_or_else(|| Error::InvalidModel("odd-dimensional zero-mode space".into()))?;
        }
        for u in &used {
            let d = u.dot(&w2);
            w2 -= u * d;
        }
        let d = w1.dot(&w2);
        w2 -= &w1 * d;
        w2 = w2.normalize();
        gamma_m += &w2 * w1.transpose() - &w1 * w2.transpose();
        planes.push((ev.sqrt(), w1.clone(), w2.clone()));
        used.push(w1);
        used.push(w2);
    }
    if planes.len() != n {
        return Err(Error::InvalidModel("failed to pair Majorana modes".into()));
    }
    let mut modes: Vec<f64> = planes.iter().map(|p| p.0).collect();
    let mut parity_flipped = false;
    let pf = pfaffian(&gamma_m)?;
    if pf < 0.0 {
        let (_, w1, w2) = &planes[0];
        gamma_m -= (w2 * w1.transpose() - w1 * w2.transpose()) * 2.0;
        parity_flipped = true;
    }
    let energy = c + 0.25 * (&a * &gamma_m).trace();
    modes.sort_by(f64::total_cmp);
    Ok(FreeFermionSolution { n, gamma, lambda, modes, majorana_corr: gamma_m, energy, parity_flipped })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpinMoments {
    pub mean: [f64; 3],
    pub cov: Matrix3<f64>,
}

pub fn spin_moments(sol: &FreeFermionSolution) -> Result<SpinMoments> {
    let n = sol.n;
    let g = &sol.majorana_corr;
    // ⟨σ^z_k⟩ = Γ_{2k,2k+1}; translation invariance is not assumed here
    let sz: Vec<f64> = (0..n).map(|k| g[(2 * k, 2 * k + 1)]).collect();
    let mean_z = sz.iter().sum::<f64>() / 2.0;

    let mut czz = 0.0;
    for i in 0..n {
        czz += 1.0 - sz[i] * sz[i];
        for j in i + 1..n {
            let zz = sol.expect(&MajoranaString::product(&[(i, SpinAxis::Z), (j, SpinAxis::Z)]))?.re;
            czz += 2.0 * (zz - sz[i] * sz[j]);
        }
    }
    // String correlators use translation invariance: C(r) = C(n − r).
    let string_sum = |axis: SpinAxis| -> Result<f64> {
        let mut c = vec![0.0; n];
        for r in 1..=n / 2 {
            c[r] = sol.expect(&MajoranaString::product(&[(0, axis), (r, axis)]))?.re;
            c[n - r] = c[r];
        }
        Ok(n as f64 * (1.0 + c.iter().sum::<f64>()) / 4.0)
    };
    let cov = Matrix3::new(string_sum(SpinAxis::X)?, 0.0, 0.0, 0.0, string_sum(SpinAxis::Y)?, 0.0, 0.0, 0.0, czz / 4.0);
    Ok(SpinMoments { mean: [0.0, 0.0, mean_z], cov })
}

/// Rotation-protocol tensors for all three angles: F = 4·cov, U_xy = ⟨S_z⟩.
pub fn xy_rotation_metrology(n: usize, gamma: f64, lambda: f64) -> Result<MetroTensors> {
    let sol = solve_xy(n, gamma, lambda)?;
    let mom = spin_moments(&sol)?;
    let f = mom.cov * 4.0;
    let [mx, my, mz] = mom.mean;
    let u = Matrix3::new(0.0, mz, -my, -mz, 0.0, mx, my, -mx, 0.0);
    let mut t = restrict(ParamKind::Rotation, &SpinAxis::ALL, &f, &u);
    let e1 = sol.first_excited_energy();
    t.energies = Some(Energies { e0: sol.energy, e1, gap: e1 - sol.energy, degenerate: false });
    Ok(t)
}
