//! Quantum Fisher information matrix F, mean Uhlmann curvature U and the
//! quantumness R = ‖2iF⁻¹U‖ at a parameter point.
//!
//! U follows the Bargmann-phase convention: U_μν is the phase per unit area
//! of a small counterclockwise loop in the (μ, ν) plane, which for the
//! rotation protocol gives U_xy = ⟨S_z⟩.

pub mod berry;
pub mod family;
pub mod fidelity;
pub mod quantumness;
pub mod rotation;

use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use berry::{bargmann_phase, muc_bargmann, LoopDiagnostics, LoopOptions, LoopSpec};
pub use family::{GroundStateFamily, Point, Probe, RotationFamily, StateFamily};
pub use fidelity::{fidelity, infidelity, qfim_fidelity, FidelityOptions, LadderDiagnostics, Side};
pub use quantumness::{quantumness, Quantumness};
pub use rotation::spin_covariance_qfim;

use crate::eigen::{ground_state, EigenResult, SolverOptions};
use crate::error::{Error, Result};
use crate::pauli::{ModelSpec, SpinAxis};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    FidelityBargmann,
    ExactRotation,
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().replace('-', "_").as_str() {
            "fidelity_bargmann" => Ok(Method::FidelityBargmann),
            "exact_rotation" => Ok(Method::ExactRotation),
            other => Err(Error::InvalidInput(format!("unknown method '{other}'"))),
        }
    }
}

/// What the estimated parameters are: field amplitudes h_μ or rotation angles φ_μ.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamKind {
    Field,
    Rotation,
}

impl ParamKind {
    pub fn label(self, axis: SpinAxis) -> String {
        match self {
            ParamKind::Field => format!("h_{axis}"),
            ParamKind::Rotation => format!("phi_{axis}"),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetroOptions {
    pub solver: SolverOptions,
    pub fidelity: FidelityOptions,
    pub loops: LoopOptions,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairQuantumness {
    pub pair: (SpinAxis, SpinAxis),
    /// None when F is singular on the pair or R fell outside [0, 1 + tol].
    pub r: Option<Quantumness>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub ladders: Vec<LadderDiagnostics>,
    pub loops: Vec<LoopDiagnostics>,
    pub flags: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Energies {
    pub e0: f64,
    pub e1: f64,
    pub gap: f64,
    pub degenerate: bool,
}

impl From<&EigenResult> for Energies {
    fn from(r: &EigenResult) -> Self {
        Self { e0: r.e0, e1: r.e1, gap: r.gap, degenerate: r.degenerate }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetroTensors {
    pub kind: ParamKind,
    pub params: Vec<SpinAxis>,
    pub f: DMatrix<f64>,
    pub u: DMatrix<f64>,
    pub r_pairs: Vec<PairQuantumness>,
    pub r_full: Option<Quantumness>,
    pub energies: Option<Energies>,
    pub diagnostics: Diagnostics,
}

/// Smallest correlation-matrix eigenvalue for which R_full is reported from
/// finite-difference tensors. Ladders and loops carry ~1e-3 relative error, so
/// a nearly dependent parameter direction below this level is unresolved and
/// R_full, which divides by it, is noise.
pub const ESTIMATED_CONDITION_FLOOR: f64 = 1e-2;

impl MetroTensors {
    /// Assemble pairwise and full quantumness from exact F and U.
    pub fn assemble(kind: ParamKind, params: Vec<SpinAxis>, f: DMatrix<f64>, u: DMatrix<f64>, diagnostics: Diagnostics) -> Self {
        Self::assemble_with_floor(kind, params, f, u, diagnostics, 0.0)
    }

    /// As `assemble`, for F and U estimated by finite differences: R_full is
    /// left undefined when F is too ill-conditioned to resolve it.
    pub fn assemble_estimated(kind: ParamKind, params: Vec<SpinAxis>, f: DMatrix<f64>, u: DMatrix<f64>, diagnostics: Diagnostics) -> Self {
        Self::assemble_with_floor(kind, params, f, u, diagnostics, ESTIMATED_CONDITION_FLOOR)
    }

    fn assemble_with_floor(kind: ParamKind, params: Vec<SpinAxis>, f: DMatrix<f64>, u: DMatrix<f64>, mut diagnostics: Diagnostics, floor: f64) -> Self {
        let p = params.len();
        let mut r_pairs = Vec::new();
        for i in 0..p {
            for j in i + 1..p {
                let idx = [i, j];
                let fs = DMatrix::from_fn(2, 2, |a, b| f[(idx[a], idx[b])]);
                let us = DMatrix::from_fn(2, 2, |a, b| u[(idx[a], idx[b])]);
                let r = note(quantumness(&fs, &us), &format!("R_{}{}", params[i], params[j]), &mut diagnostics.flags);
                r_pairs.push(PairQuantumness { pair: (params[i], params[j]), r });
            }
        }
        let r_full = if p <= 2 {
            r_pairs.first().and_then(|q| q.r)
        } else if min_correlation_eigenvalue(&f) < floor {
            diagnostics.flags.push("R_full:ill_conditioned".into());
            None
        } else {
            note(quantumness(&f, &u), "R_full", &mut diagnostics.flags)
        };
        Self { kind, params, f, u, r_pairs, r_full, energies: None, diagnostics }
    }

    pub fn index(&self, a: SpinAxis) -> Option<usize> {
        self.params.iter().position(|&p| p == a)
    }

    pub fn f_entry(&self, a: SpinAxis, b: SpinAxis) -> Option<f64> {
        Some(self.f[(self.index(a)?, self.index(b)?)])
    }

    pub fn u_entry(&self, a: SpinAxis, b: SpinAxis) -> Option<f64> {
        Some(self.u[(self.index(a)?, self.index(b)?)])
    }

    pub fn r_pair(&self, a: SpinAxis, b: SpinAxis) -> Option<Quantumness> {
        self.r_pairs.iter().find(|q| q.pair == (a, b) || q.pair == (b, a)).and_then(|q| q.r)
    }
}

fn min_correlation_eigenvalue(f: &DMatrix<f64>) -> f64 {
    let d: Vec<f64> = (0..f.nrows()).map(|i| f[(i, i)]).collect();
    if d.iter().any(|x| !(*x > 0.0)) {
        return 0.0;
    }
    let c = DMatrix::from_fn(f.nrows(), f.ncols(), |i, j| f[(i, j)] / (d[i] * d[j]).sqrt());
    c.symmetric_eigenvalues().min()
}

fn note(r: Result<Quantumness>, label: &str, flags: &mut Vec<String>) -> Option<Quantumness> {
    match r {
        Ok(q) => {
            if q.regularized {
                flags.push(format!("{label}:regularized"));
            }
            if q.clamped {
                flags.push(format!("{label}:clamped"));
            }
            Some(q)
        }
        Err(Error::SingularFisher) => {
            flags.push(format!("{label}:singular"));
            None
        }
        Err(e) => {
            flags.push(format!("{label}:{e}"));
            None
        }
    }
}

fn normalized_axes(axes: &[SpinAxis]) -> Result<Vec<SpinAxis>> {
    let mut a = axes.to_vec();
    a.sort();
    a.dedup();
    if a.is_empty() || a.len() != axes.len() {
        return Err(Error::InvalidInput(format!("axes {axes:?} must be distinct and non-empty")));
    }
    Ok(a)
}

/// F and U by fidelity ladders and Bargmann loops on an arbitrary family.
pub fn family_tensors(family: &dyn StateFamily, point: &Point, axes: &[SpinAxis], opts: &MetroOptions) -> Result<(DMatrix<f64>, DMatrix<f64>, Diagnostics)> {
    let axes = normalized_axes(axes)?;
    let base = family.probe(point, None)?.state;
    let (f, ladders) = fidelity::qfim_fidelity_from(family, point, &base, &axes, &opts.fidelity)?;
    let p = axes.len();
    let mut u = DMatrix::zeros(p, p);
    let mut diag = Diagnostics { ladders, ..Default::default() };
    for i in 0..p {
        for j in i + 1..p {
            let (fi, fj) = (f[(i, i)], f[(j, j)]);
            if fi == 0.0 || fj == 0.0 {
                // |U_ij| ≤ √(F_ii F_jj)/2
                continue;
            }
            // sides with (F/8)·side² equal to the target infidelity
            let t = 8.0 * opts.loops.target_infidelity;
            let (si, sj) = ((t / fi).sqrt(), (t / fj).sqrt());
            let areas: Vec<f64> = opts.loops.area_scales.iter().map(|k| k * si * sj).collect();
            let (uij, ld) = berry::muc_bargmann_from(family, point, &base, (axes[i], axes[j]), &areas, si / sj, Some((fi * fj).sqrt() / 2.0), &opts.loops)?;
            u[(i, j)] = uij;
            u[(j, i)] = -uij;
            diag.loops.push(ld);
        }
    }
    for l in &diag.loops {
        if l.noise_limited {
            diag.flags.push(format!("U_{}{}:noise_limited", l.plane.0, l.plane.1));
        }
    }
    for l in &diag.ladders {
        if l.unresponsive {
            diag.flags.push(format!("F_{}:unresponsive", l.axes.0));
        }
        if l.degenerate {
            diag.flags.push("ladder:degenerate".into());
        }
        if l.side != Side::Both {
            diag.flags.push(format!("ladder_{}{}:one_sided", l.axes.0, l.axes.1.map(|a| a.to_string()).unwrap_or_default()));
        }
    }
    Ok((f, u, diag))
}

/// Full metrological bundle at one point. For Ising chains `point` is the
/// field (h_x, h_y, h_z) and overrides `spec.h`; for the XY chain it is the
/// rotation angle φ applied to the ground state of `spec`.
pub fn metro_point(spec: &ModelSpec, point: &Point, axes: &[SpinAxis], method: Method, opts: &MetroOptions) -> Result<MetroTensors> {
    let axes = normalized_axes(axes)?;
    match (spec.is_ising(), method) {
        (true, Method::FidelityBargmann) => {
            let family = GroundStateFamily::new(spec.with_field(*point), opts.solver.clone())?;
            let energies = Energies::from(&family.solve(point, None)?);
            let (f, u, diag) = family_tensors(&family, point, &axes, opts)?;
            let mut t = MetroTensors::assemble_estimated(ParamKind::Field, axes, f, u, diag);
            if energies.degenerate {
                t.diagnostics.flags.push("degenerate".into());
            }
            t.energies = Some(energies);
            Ok(t)
        }
        (true, Method::ExactRotation) => Err(Error::InvalidInput("exact_rotation applies to the XY rotation protocol only".into())),
        (false, Method::FidelityBargmann) => {
            let g = ground_state(spec, &opts.solver)?;
            let family = RotationFamily { ground: g.ground.clone() };
            let (f, u, diag) = family_tensors(&family, point, &axes, opts)?;
            let mut t = MetroTensors::assemble_estimated(ParamKind::Rotation, axes, f, u, diag);
            t.energies = Some(Energies::from(&g));
            Ok(t)
        }
        (false, Method::ExactRotation) => {
            if point.iter().any(|x| *x != 0.0) {
                return Err(Error::InvalidInput("exact rotation tensors are evaluated at φ = 0".into()));
            }
            let g = ground_state(spec, &opts.solver)?;
            let (f3, u3) = spin_covariance_qfim(&g.ground, spec.n)?;
            let mut t = restrict(ParamKind::Rotation, &axes, &f3, &u3);
            t.energies = Some(Energies::from(&g));
            Ok(t)
        }
    }
}

/// Restrict 3×3 tensors to `axes` and assemble the quantumness values.
pub fn restrict(kind: ParamKind, axes: &[SpinAxis], f3: &nalgebra::Matrix3<f64>, u3: &nalgebra::Matrix3<f64>) -> MetroTensors {
    let p = axes.len();
    let f = DMatrix::from_fn(p, p, |i, j| f3[(axes[i].index(), axes[j].index())]);
    let u = DMatrix::from_fn(p, p, |i, j| u3[(axes[i].index(), axes[j].index())]);
    MetroTensors::assemble(kind, axes.to_vec(), f, u, Diagnostics::default())
}
