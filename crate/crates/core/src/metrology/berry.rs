//! Berry curvature from Bargmann phases of small rectangular loops.

use serde::{Deserialize, Serialize};

use super::fidelity::fit_monomials;
use super::family::{Point, StateFamily};
use crate::error::{Error, Result};
use crate::pauli::SpinAxis;
use crate::state::QuantumState;
use crate::C64;

/// arg Π_i ⟨ψ_i|ψ_{i+1}⟩ around the closed polygon `states`.
pub fn bargmann_phase(states: &[QuantumState]) -> Result<f64> {
    if states.len() < 3 {
        return Err(Error::InvalidInput("a loop needs at least three vertices".into()));
    }
    let mut prod = C64::new(1.0, 0.0);
    for (i, a) in states.iter().enumerate() {
        let ov = a.overlap(&states[(i + 1) % states.len()])?;
        if ov.norm() < 1e-12 {
            return Err(Error::PhaseUndefined(ov.norm()));
        }
        // keep the running product O(1)
        prod *= ov / ov.norm();
    }
    let phi = prod.arg();
    Ok(if phi == -std::f64::consts::PI { std::f64::consts::PI } else { phi })
}

/// Rectangle in the (μ, ν) plane, traversed counterclockwise:
/// (−,−) → (+,−) → (+,+) → (−,+) relative to `center`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoopSpec {
    pub center: Point,
    pub plane: (SpinAxis, SpinAxis),
    pub side_mu: f64,
    pub side_nu: f64,
}

impl LoopSpec {
    pub fn area(&self) -> f64 {
        self.side_mu * self.side_nu
    }

    pub fn vertices(&self) -> [Point; 4] {
        let (mu, nu) = (self.plane.0.index(), self.plane.1.index());
        let (hm, hn) = (self.side_mu / 2.0, self.side_nu / 2.0);
        [(-hm, -hn), (hm, -hn), (hm, hn), (-hm, hn)].map(|(dm, dn)| {
            let mut p = self.center;
            p[mu] += dm;
            p[nu] += dn;
            p
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LoopOptions {
    /// Loop areas relative to the metric-matched base area.
    pub area_scales: Vec<f64>,
    /// Infidelity across one side of the base loop.
    pub target_infidelity: f64,
    /// Relative RMS residual above which Φ(δA) counts as nonlinear.
    pub residual_tol: f64,
    /// Largest relative spread of Φ/A over the area set; beyond it the
    /// extrapolation to A → 0 is biased and the loops shrink.
    pub max_curvature: f64,
    /// Times the loop set may shrink (areas ÷ 4) before a nonlinear fit is an error.
    pub max_shrinks: usize,
    /// Phases below this fraction of the largest phase allowed by
    /// |U_μν| ≤ √(F_μμ F_νν)/2 are treated as numerical noise around U = 0.
    pub noise_floor: f64,
}

impl Default for LoopOptions {
    fn default() -> Self {
        Self { area_scales: vec![0.25, 0.5625, 1.0, 2.25, 4.0], target_infidelity: 1e-3, residual_tol: 1e-3, max_curvature: 0.02, max_shrinks: 8, noise_floor: 1e-3 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoopDiagnostics {
    pub plane: (SpinAxis, SpinAxis),
    pub areas: Vec<f64>,
    pub phases: Vec<f64>,
    pub shifted: bool,
    pub rel_residual: f64,
    pub shrinks: usize,
    /// The fit failed but every phase sat below the noise floor.
    pub noise_limited: bool,
}

/// U_μν as the slope of the Bargmann phase against loop area. `aspect` is
/// side_μ / side_ν. Loops that would straddle a first-order line are moved to
/// one side of it, with their near edge through `point`.
pub fn muc_bargmann(
    family: &dyn StateFamily,
    point: &Point,
    plane: (SpinAxis, SpinAxis),
    areas: &[f64],
    aspect: f64,
    opts: &LoopOptions,
) -> Result<(f64, LoopDiagnostics)> {
    let base = family.probe(point, None)?.state;
    muc_bargmann_from(family, point, &base, plane, areas, aspect, None, opts)
}

pub(crate) fn muc_bargmann_from(
    family: &dyn StateFamily,
    point: &Point,
    base: &QuantumState,
    plane: (SpinAxis, SpinAxis),
    areas: &[f64],
    aspect: f64,
    u_bound: Option<f64>,
    opts: &LoopOptions,
) -> Result<(f64, LoopDiagnostics)> {
    if plane.0 == plane.1 {
        return Err(Error::InvalidInput("loop plane needs two distinct axes".into()));
    }
    if areas.len() < 3 || areas.iter().any(|a| !(*a > 0.0)) {
        return Err(Error::InvalidInput("need at least three positive loop areas".into()));
    }
    let (amin, amax) = areas.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), a| (lo.min(*a), hi.max(*a)));
    if amax < 4.0 * amin {
        return Err(Error::InvalidInput("loop areas must span at least a factor of 4".into()));
    }
    let mut areas = areas.to_vec();
    let mut shrinks = 0;
    loop {
        let (phases, shifted) = loop_phases(family, point, base, plane, &areas, aspect)?;
        // Φ = U·A + O(A²) for centered loops; a one-sided loop samples the
        // curvature half a side away, adding half-integer powers.
        let powers: &[f64] = if shifted { &[1.0, 1.5, 2.0, 2.5] } else { &[1.0, 2.0, 3.0] };
        let (coef, rel) = fit_monomials(&areas, &phases, powers)?;
        let biggest = phases.iter().fold(0.0f64, |m, p| m.max(p.abs()));
        let silent = biggest < 1e-13;
        let amax = areas.iter().cloned().fold(0.0, f64::max);
        let noise_limited = u_bound.is_some_and(|b| biggest < opts.noise_floor * b * amax);
        let (lo, hi) = (argmin(&areas), argmax(&areas));
        let flat = (phases[hi] / areas[hi] * areas[lo] / phases[lo] - 1.0).abs() <= opts.max_curvature;
        if (rel <= opts.residual_tol && flat) || silent || noise_limited {
            let u = if silent { 0.0 } else { coef[0] };
            let noise_limited = noise_limited && !(rel <= opts.residual_tol && flat);
            return Ok((u, LoopDiagnostics { plane, areas, phases, shifted, rel_residual: rel, shrinks, noise_limited }));
        }
        if shrinks >= opts.max_shrinks {
            return Err(Error::Fit(format!(
                "Bargmann phase nonlinear in area in the {}{} plane (residual {rel:.2e}, flat {flat}) after {shrinks} shrinks",
                plane.0, plane.1
            )));
        }
        shrinks += 1;
        areas.iter_mut().for_each(|a| *a /= 4.0);
    }
}

fn argmin(x: &[f64]) -> usize {
    (0..x.len()).min_by(|&a, &b| x[a].total_cmp(&x[b])).unwrap_or(0)
}

fn argmax(x: &[f64]) -> usize {
    (0..x.len()).max_by(|&a, &b| x[a].total_cmp(&x[b])).unwrap_or(0)
}

fn loop_phases(family: &dyn StateFamily, point: &Point, base: &QuantumState, plane: (SpinAxis, SpinAxis), areas: &[f64], aspect: f64) -> Result<(Vec<f64>, bool)> {
    // One geometry for the whole set: if the largest loop would straddle a
    // first-order line along an axis, every loop is moved off it along that
    // axis, so that Φ(A) follows a single series.
    let amax = areas.iter().cloned().fold(0.0, f64::max);
    let sides = |a: f64| [(a * aspect).sqrt(), (a / aspect).sqrt()];
    let mut shift = [0.0f64; 2];
    for (k, axis) in [plane.0, plane.1].into_iter().enumerate() {
        if let Some(t) = family.first_order_crossing(point, &axis.unit()) {
            if t.abs() < sides(amax)[k] / 2.0 {
                // t ≤ 0 puts the line at or below the point: move up
                shift[k] = if t > 0.0 { -1.0 } else { 1.0 };
            }
        }
    }
    let shifted = shift != [0.0; 2];
    let mut phases = Vec::with_capacity(areas.len());
    for &area in areas {
        let [sm, sn] = sides(area);
        let mut lp = LoopSpec { center: *point, plane, side_mu: sm, side_nu: sn };
        lp.center[plane.0.index()] += shift[0] * sm / 2.0;
        lp.center[plane.1.index()] += shift[1] * sn / 2.0;
        let mut states = Vec::with_capacity(4);
        for v in lp.vertices() {
            let p = family.probe(&v, Some(base))?;
            if p.degenerate {
                return Err(Error::DegenerateLoop(v));
            }
            states.push(p.state);
        }
        phases.push(bargmann_phase(&states)?);
    }
    Ok((phases, shifted))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_states_have_zero_phase() {
        let s = QuantumState::new(vec![C64::new(0.6, 0.1), C64::new(0.3, -0.7)]).unwrap();
        assert_eq!(bargmann_phase(&[s.clone(), s.clone(), s.clone(), s]).unwrap(), 0.0);
    }

    #[test]
    fn orthogonal_neighbours_rejected() {
        let a = QuantumState::basis(2, 0);
        let b = QuantumState::basis(2, 1);
        assert!(matches!(bargmann_phase(&[a.clone(), b, a]), Err(Error::PhaseUndefined(_))));
    }

    #[test]
    fn vertices_counterclockwise() {
        let lp = LoopSpec { center: [1.0, 2.0, 3.0], plane: (SpinAxis::X, SpinAxis::Z), side_mu: 0.2, side_nu: 0.4 };
        let v = lp.vertices();
        assert_eq!(v[0], [0.9, 2.0, 2.8]);
        assert_eq!(v[2], [1.1, 2.0, 3.2]);
        let signed: f64 = (0..4).map(|i| v[i][0] * v[(i + 1) % 4][2] - v[(i + 1) % 4][0] * v[i][2]).sum::<f64>() / 2.0;
        assert!((signed - lp.area()).abs() < 1e-12);
    }
}
