//! QFIM from the curvature of the ground-state fidelity,
//! 1 − |⟨ψ(λ)|ψ(λ + δ·d)⟩| = (δ²/8)·dᵀF d + O(δ³).

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::family::{Point, Probe, StateFamily};
use crate::error::{Error, Result};
use crate::pauli::SpinAxis;
use crate::state::QuantumState;

pub fn fidelity(a: &QuantumState, b: &QuantumState) -> Result<f64> {
    Ok(a.overlap(b)?.norm().min(1.0))
}

/// 1 − |⟨a|b⟩| without the cancellation of the naive form:
/// 1 − f² = ‖b − ⟨a|b⟩a‖², so 1 − f = ‖b − ⟨a|b⟩a‖² / (1 + f).
pub fn infidelity(a: &QuantumState, b: &QuantumState) -> Result<f64> {
    let ov = a.overlap(b)?;
    let perp: f64 = a.amplitudes().iter().zip(b.amplitudes()).map(|(x, y)| (y - ov * x).norm_sqr()).sum();
    Ok(perp / (1.0 + ov.norm().min(1.0)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FidelityOptions {
    pub delta0: f64,
    pub ladder: usize,
    /// Ladders shrink by halves until the outermost infidelity is below this.
    pub max_infidelity: f64,
    pub max_shrinks: usize,
    /// Relative RMS fit residual above which a ladder is rejected.
    pub residual_tol: f64,
    /// Below this outermost infidelity the parameter counts as unresponsive.
    pub silent_infidelity: f64,
    /// Largest allowed |I(Kδ)/(K²·I(δ)) − 1| on each side of the ladder.
    pub max_curvature: f64,
}

impl Default for FidelityOptions {
    fn default() -> Self {
        Self { delta0: 1e-3, ladder: 6, max_infidelity: 1e-3, max_shrinks: 60, residual_tol: 1e-3, silent_infidelity: 1e-14, max_curvature: 0.05 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Both,
    Plus,
    Minus,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LadderDiagnostics {
    pub axes: (SpinAxis, Option<SpinAxis>),
    pub delta: f64,
    pub shrinks: usize,
    pub side: Side,
    pub rel_residual: f64,
    pub max_infidelity: f64,
    pub unresponsive: bool,
    pub degenerate: bool,
}

#[derive(Clone, Debug)]
pub(crate) struct LadderFit {
    /// Quadratic coefficient of 1 − f along the (unnormalized) direction.
    pub c: f64,
    pub diag: LadderDiagnostics,
}

/// Least squares y ≈ Σ_j coef_j x^{p_j}; x is rescaled to [−1, 1] internally.
pub(crate) fn fit_monomials(x: &[f64], y: &[f64], powers: &[f64]) -> Result<(Vec<f64>, f64)> {
    let xs = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if xs == 0.0 || x.len() < powers.len() {
        return Err(Error::Fit("degenerate ladder".into()));
    }
    let a = DMatrix::from_fn(x.len(), powers.len(), |i, j| (x[i].abs() / xs).powf(powers[j]) * if x[i] < 0.0 && powers[j] % 2.0 == 1.0 { -1.0 } else { 1.0 });
    let b = DVector::from_column_slice(y);
    let sol = a.clone().svd(true, true).solve(&b, 1e-14).map_err(|e| Error::Fit(e.to_string()))?;
    let r = &a * &sol - &b;
    let ymax = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let rel = if ymax > 0.0 { (r.norm_squared() / y.len() as f64).sqrt() / ymax } else { 0.0 };
    let coef = powers.iter().zip(sol.iter()).map(|(p, c)| c / xs.powf(*p)).collect();
    Ok((coef, rel))
}

fn offset(point: &Point, dir: &Point, t: f64) -> Point {
    [point[0] + t * dir[0], point[1] + t * dir[1], point[2] + t * dir[2]]
}

pub(crate) fn choose_side(family: &dyn StateFamily, point: &Point, dir: &Point, reach: f64) -> Side {
    match family.first_order_crossing(point, dir) {
        Some(t) if t.abs() < reach => {
            if t > 0.0 {
                Side::Minus
            } else {
                Side::Plus
            }
        }
        _ => Side::Both,
    }
}

/// Fidelity ladder along `dir` from `point`, shrinking δ until the outermost
/// step is inside the quadratic regime.
pub(crate) fn fidelity_ladder(
    family: &dyn StateFamily,
    point: &Point,
    base: &QuantumState,
    dir: &Point,
    delta0: f64,
    axes: (SpinAxis, Option<SpinAxis>),
    opts: &FidelityOptions,
) -> Result<LadderFit> {
    let k_max = opts.ladder;
    if k_max < 4 {
        return Err(Error::InvalidInput(format!("ladder K = {k_max} < 4")));
    }
    let mut delta = delta0;
    let mut shrinks = 0;
    let probe = |t: f64| -> Result<Probe> { family.probe(&offset(point, dir, t), Some(base)) };
    let steps = |side: Side| -> Vec<i64> {
        let k = k_max as i64;
        match side {
            Side::Both => (-k..=k).filter(|&j| j != 0).collect(),
            Side::Plus => (1..=k).collect(),
            Side::Minus => (-k..=-1).collect(),
        }
    };
    let shrink = |delta: &mut f64, shrinks: &mut usize, why: &str| -> Result<()> {
        *shrinks += 1;
        if *shrinks > opts.max_shrinks {
            return Err(Error::Fit(format!("ladder along {dir:?} never reached the quadratic regime ({why})")));
        }
        *delta *= 0.5;
        Ok(())
    };
    loop {
        let side = choose_side(family, point, dir, k_max as f64 * delta);
        let outer: Vec<i64> = steps(side).into_iter().filter(|j| j.unsigned_abs() as usize == k_max).collect();
        let mut ends = Vec::new();
        let mut worst: f64 = 0.0;
        for &j in &outer {
            let p = probe(j as f64 * delta)?;
            worst = worst.max(infidelity(base, &p.state)?);
            ends.push((j, p));
        }
        if worst >= opts.max_infidelity {
            shrink(&mut delta, &mut shrinks, "infidelity")?;
            continue;
        }

        let mut xs = Vec::new();
        let mut ys = Vec::new();
        let mut degenerate = false;
        for j in steps(side) {
            let p = match ends.iter().position(|e| e.0 == j) {
                Some(i) => ends[i].1.clone(),
                None => probe(j as f64 * delta)?,
            };
            degenerate |= p.degenerate;
            xs.push(j as f64 * delta);
            ys.push(infidelity(base, &p.state)?);
        }
        let max_inf = ys.iter().cloned().fold(0.0, f64::max);
        let mut diag = LadderDiagnostics { axes, delta, shrinks, side, rel_residual: 0.0, max_infidelity: max_inf, unresponsive: false, degenerate };
        if max_inf < opts.silent_infidelity {
            diag.unresponsive = true;
            return Ok(LadderFit { c: 0.0, diag });
        }
        // The quadratic term must dominate across the ladder; a residual test
        // alone misses smooth but strongly curved profiles.
        let k2 = (k_max * k_max) as f64;
        let curvature = [1i64, -1]
            .iter()
            .filter_map(|&sg| {
                let at = |j: i64| xs.iter().position(|x| (x / delta).round() as i64 == j).map(|i| ys[i]);
                Some((at(sg * k_max as i64)? / (k2 * at(sg)?) - 1.0).abs())
            })
            .fold(0.0, f64::max);
        if curvature > opts.max_curvature {
            shrink(&mut delta, &mut shrinks, "curvature")?;
            continue;
        }
        // Higher orders are nuisance terms; δ³ enters with sign(δ).
        let (coef, rel) = fit_monomials(&xs, &ys, &[2.0, 3.0, 4.0])?;
        diag.rel_residual = rel;
        if rel <= opts.residual_tol {
            return Ok(LadderFit { c: coef[0], diag });
        }
        // Too curved: the state varies on a scale finer than the ladder.
        if let Err(e) = shrink(&mut delta, &mut shrinks, "residual") {
            return Err(Error::Fit(format!("fidelity ladder residual {rel:.2e} along {dir:?} (crossed a transition?): {e}")));
        }
    }
}

/// F restricted to `axes`, plus per-ladder diagnostics.
pub fn qfim_fidelity(family: &dyn StateFamily, point: &Point, axes: &[SpinAxis], opts: &FidelityOptions) -> Result<(DMatrix<f64>, Vec<LadderDiagnostics>)> {
    let base = family.probe(point, None)?.state;
    qfim_fidelity_from(family, point, &base, axes, opts)
}

pub(crate) fn qfim_fidelity_from(
    family: &dyn StateFamily,
    point: &Point,
    base: &QuantumState,
    axes: &[SpinAxis],
    opts: &FidelityOptions,
) -> Result<(DMatrix<f64>, Vec<LadderDiagnostics>)> {
    let p = axes.len();
    let mut f = DMatrix::zeros(p, p);
    let mut diags = Vec::new();
    for (i, &a) in axes.iter().enumerate() {
        let fit = fidelity_ladder(family, point, base, &a.unit(), opts.delta0, (a, None), opts)?;
        f[(i, i)] = (8.0 * fit.c).max(0.0);
        diags.push(fit.diag);
    }
    for i in 0..p {
        for j in i + 1..p {
            let (fi, fj) = (f[(i, i)], f[(j, j)]);
            if fi == 0.0 || fj == 0.0 {
                continue;
            }
            // Metric-scaled diagonal: along d = e_i/√F_ii + e_j/√F_jj the
            // quadratic coefficient is (2 + 2ρ)/8 with ρ the correlation,
            // which avoids cancellation when F_ii and F_jj differ by decades.
            let mut dir = [0.0; 3];
            dir[axes[i].index()] = 1.0 / fi.sqrt();
            dir[axes[j].index()] = 1.0 / fj.sqrt();
            let fit = fidelity_ladder(family, point, base, &dir, 0.1 / opts.ladder as f64, (axes[i], Some(axes[j])), opts)?;
            let rho = (4.0 * fit.c - 1.0).clamp(-1.0, 1.0);
            f[(i, j)] = rho * (fi * fj).sqrt();
            f[(j, i)] = f[(i, j)];
            diags.push(fit.diag);
        }
    }
    Ok((f, diags))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::C64;

    fn s(v: &[(f64, f64)]) -> QuantumState {
        QuantumState::new(v.iter().map(|&(a, b)| C64::new(a, b)).collect()).unwrap()
    }

    #[test]
    fn fidelity_examples() {
        let zero = s(&[(1.0, 0.0), (0.0, 0.0)]);
        let one = s(&[(0.0, 0.0), (1.0, 0.0)]);
        let plus = s(&[(1.0, 0.0), (1.0, 0.0)]);
        assert_eq!(fidelity(&zero, &zero).unwrap(), 1.0);
        assert_eq!(fidelity(&zero, &one).unwrap(), 0.0);
        assert!((fidelity(&zero, &plus).unwrap() - 0.5f64.sqrt()).abs() < 1e-15);
        assert!((fidelity(&zero.with_phase(0.3), &plus.with_phase(-1.1)).unwrap() - 0.5f64.sqrt()).abs() < 1e-15);
        assert!((infidelity(&zero, &plus).unwrap() - (1.0 - 0.5f64.sqrt())).abs() < 1e-15);
    }

    #[test]
    fn infidelity_resolves_tiny_angles() {
        let t: f64 = 1e-9;
        let a = s(&[(1.0, 0.0), (0.0, 0.0)]);
        let b = s(&[(t.cos(), 0.0), (0.0, t.sin())]);
        let exact = t * t / 2.0;
        assert!((infidelity(&a, &b).unwrap() / exact - 1.0).abs() < 1e-6);
    }

    #[test]
    fn monomial_fit_exact() {
        let x: Vec<f64> = (-6..=6).filter(|&k| k != 0).map(|k| k as f64 * 1e-7).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v * v + 5e10 * v.powi(4)).collect();
        let (c, rel) = fit_monomials(&x, &y, &[2.0, 4.0]).unwrap();
        assert!((c[0] / 3.0 - 1.0).abs() < 1e-10 && rel < 1e-12);
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v * v + 2e4 * v.powi(3)).collect();
        let xp: Vec<f64> = x.iter().cloned().filter(|v| *v > 0.0).collect();
        let yp: Vec<f64> = y.iter().zip(&x).filter(|(_, v)| **v > 0.0).map(|(y, _)| *y).collect();
        let (c, _) = fit_monomials(&xp, &yp, &[2.0, 3.0, 4.0]).unwrap();
        assert!((c[0] / 3.0 - 1.0).abs() < 1e-8);
    }
}
