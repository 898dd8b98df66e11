//! Finite-size scaling: power-law and exponential fits with model selection,
//! critical-point location, drop rates and gap scaling.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::eigen::{ground_state, SolverOptions};
use crate::error::{Error, Result};
use crate::metrology::{family_tensors, metro_point, GroundStateFamily, Method, MetroOptions, Point};
use crate::pauli::{Coupling, ModelSpec, SpinAxis};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitModel {
    /// y = 10^a · x^m, fitted on (log10 x, log10 y)
    PowerLaw,
    /// y = A · e^{λ_e x}, fitted on (x, ln y)
    Exponential,
    Linear,
    Parabola,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: FitModel,
    pub coefficients: BTreeMap<String, f64>,
    /// Residual sum of squares in the model's own linearized coordinates.
    pub rss: f64,
    pub r2: f64,
    pub npoints: usize,
}

impl FitResult {
    pub fn coef(&self, name: &str) -> f64 {
        self.coefficients.get(name).copied().unwrap_or(f64::NAN)
    }

    /// rss expressed on a natural-log ordinate, so power-law and
    /// exponential fits can be compared.
    pub fn rss_ln(&self) -> f64 {
        match self.model {
            FitModel::PowerLaw => self.rss * std::f64::consts::LN_10.powi(2),
            _ => self.rss,
        }
    }
}

fn coefs(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn check_points(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), got: y.len() });
    }
    if x.len() < 3 {
        return Err(Error::Fit(format!("{} points; at least 3 required", x.len())));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Fit("non-finite data".into()));
    }
    Ok(())
}

/// Ordinary least squares v = slope·u + intercept → (slope, intercept, rss, r2).
fn line(u: &[f64], v: &[f64]) -> Result<(f64, f64, f64, f64)> {
    let n = u.len() as f64;
    let (mu, mv) = (u.iter().sum::<f64>() / n, v.iter().sum::<f64>() / n);
    let sxx: f64 = u.iter().map(|a| (a - mu).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Fit("abscissae are all equal".into()));
    }
    let sxy: f64 = u.iter().zip(v).map(|(a, b)| (a - mu) * (b - mv)).sum();
    let slope = sxy / sxx;
    let intercept = mv - slope * mu;
    let rss: f64 = u.iter().zip(v).map(|(a, b)| (b - slope * a - intercept).powi(2)).sum();
    let tss: f64 = v.iter().map(|b| (b - mv).powi(2)).sum();
    let r2 = if tss > 0.0 { 1.0 - rss / tss } else { 1.0 };
    Ok((slope, intercept, rss, r2))
}

pub fn fit_linear(x: &[f64], y: &[f64]) -> Result<FitResult> {
    check_points(x, y)?;
    let (m, a, rss, r2) = line(x, y)?;
    Ok(FitResult { model: FitModel::Linear, coefficients: coefs(&[("c0", a), ("c1", m)]), rss, r2, npoints: x.len() })
}

pub fn fit_power_law(x: &[f64], y: &[f64]) -> Result<FitResult> {
    check_points(x, y)?;
    if x.iter().chain(y).any(|v| *v <= 0.0) {
        return Err(Error::Fit("power-law fit needs positive data".into()));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.log10()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.log10()).collect();
    let (m, a, rss, r2) = line(&lx, &ly)?;
    Ok(FitResult { model: FitModel::PowerLaw, coefficients: coefs(&[("m", m), ("a", a)]), rss, r2, npoints: x.len() })
}

pub fn fit_exponential(x: &[f64], y: &[f64]) -> Result<FitResult> {
    check_points(x, y)?;
    if y.iter().any(|v| *v <= 0.0) {
        return Err(Error::Fit("exponential fit needs positive ordinates".into()));
    }
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let (rate, ln_a, rss, r2) = line(x, &ly)?;
    Ok(FitResult { model: FitModel::Exponential, coefficients: coefs(&[("A", ln_a.exp()), ("lambda_e", rate)]), rss, r2, npoints: x.len() })
}

pub fn fit_parabola(x: &[f64], y: &[f64]) -> Result<FitResult> {
    check_points(x, y)?;
    let a = DMatrix::from_fn(x.len(), 3, |i, j| x[i].powi(j as i32));
    let b = DVector::from_column_slice(y);
    let sol = a.clone().svd(true, true).solve(&b, 1e-14).map_err(|e| Error::Fit(e.to_string()))?;
    let rss = (&a * &sol - &b).norm_squared();
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let tss: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let r2 = if tss > 0.0 { 1.0 - rss / tss } else { 1.0 };
    Ok(FitResult { model: FitModel::Parabola, coefficients: coefs(&[("c0", sol[0]), ("c1", sol[1]), ("c2", sol[2])]), rss, r2, npoints: x.len() })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preferred {
    Power,
    Exponential,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub quantity: String,
    pub sizes: Vec<usize>,
    pub values: Vec<f64>,
    pub best: FitResult,
    pub alt: FitResult,
    pub preferred: Preferred,
    /// rss_ln(rejected) / rss_ln(preferred); ≥ 1.
    pub score: f64,
    /// Side-by-side series (predictions, ratios, flags) keyed by name.
    #[serde(default)]
    pub companions: BTreeMap<String, Vec<f64>>,
    #[serde(default)]
    pub flags: Vec<String>,
}

impl ScalingReport {
    pub fn power(&self) -> &FitResult {
        if self.best.model == FitModel::PowerLaw {
            &self.best
        } else {
            &self.alt
        }
    }

    pub fn exponential(&self) -> &FitResult {
        if self.best.model == FitModel::Exponential {
            &self.best
        } else {
            &self.alt
        }
    }
}

/// Fit both candidate models to values(n) and choose by rss on a common
/// natural-log ordinate.
pub fn scaling_report(quantity: &str, sizes: &[usize], values: &[f64]) -> Result<ScalingReport> {
    if sizes.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput("sizes must be strictly increasing".into()));
    }
    let x: Vec<f64> = sizes.iter().map(|&n| n as f64).collect();
    let p = fit_power_law(&x, values)?;
    let e = fit_exponential(&x, values)?;
    let (best, alt, preferred) = if e.rss_ln() < p.rss_ln() { (e, p, Preferred::Exponential) } else { (p, e, Preferred::Power) };
    let score = if best.rss_ln() > 0.0 { alt.rss_ln() / best.rss_ln() } else { f64::INFINITY };
    Ok(ScalingReport { quantity: quantity.into(), sizes: sizes.to_vec(), values: values.to_vec(), best, alt, preferred, score, companions: BTreeMap::new(), flags: Vec::new() })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint {
    pub location: f64,
    pub value: f64,
    pub profile: Vec<(f64, f64)>,
    pub refined: bool,
    pub on_boundary: bool,
}

/// Argmax of `f` on `grid`, refined by golden-section search to `tol`.
/// A maximum on the grid boundary is reported unrefined.
pub fn locate_maximum(mut f: impl FnMut(f64) -> Result<f64>, grid: &[f64], tol: f64) -> Result<CriticalPoint> {
    if grid.len() < 5 || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput("grid needs at least 5 increasing points".into()));
    }
    let mut profile = Vec::with_capacity(grid.len());
    for &g in grid {
        profile.push((g, f(g)?));
    }
    let (imax, &(loc, val)) = profile.iter().enumerate().max_by(|a, b| a.1 .1.total_cmp(&b.1 .1)).expect("non-empty grid");
    if imax == 0 || imax == grid.len() - 1 {
        return Ok(CriticalPoint { location: loc, value: val, profile, refined: false, on_boundary: true });
    }
    let invphi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (grid[imax - 1], grid[imax + 1]);
    let mut c = b - invphi * (b - a);
    let mut d = a + invphi * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    while b - a > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - invphi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + invphi * (b - a);
            fd = f(d)?;
        }
    }
    let (location, value) = if fc > fd { (c, fc) } else { (d, fd) };
    let (location, value) = if value >= val { (location, value) } else { (loc, val) };
    Ok(CriticalPoint { location, value, profile, refined: true, on_boundary: false })
}

/// Maximum of F_xx along coupling `free` of `spec`.
pub fn locate_critical_point(spec: &ModelSpec, free: Coupling, grid: &[f64], opts: &MetroOptions) -> Result<CriticalPoint> {
    if !spec.accepts(free) {
        return Err(Error::InvalidInput(format!("{} is not a coupling of {:?}", free.name(), spec.kind)));
    }
    let fxx = |v: f64| -> Result<f64> {
        let mut s = spec.clone();
        s.set(free, v);
        if s.is_ising() {
            let family = GroundStateFamily::new(s.clone(), opts.solver.clone())?;
            let (f, _, _) = family_tensors(&family, &s.h, &[SpinAxis::X], opts)?;
            Ok(f[(0, 0)])
        } else {
            let t = metro_point(&s, &[0.0; 3], &[SpinAxis::X], Method::ExactRotation, opts)?;
            Ok(t.f[(0, 0)])
        }
    };
    locate_maximum(fxx, grid, 1e-3)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DropRate {
    pub rate: f64,
    pub width: f64,
    pub r_max: f64,
    /// The half-maximum crossing lies between the center and its nearest
    /// sample; `rate` is then the grid-resolution bound 1/d_min.
    pub resolution_limited: bool,
}

/// Inverse half-maximum width of the dip of `r` around `center`. Each side is
/// scanned from the outside in; the crossing is interpolated linearly in
/// log-distance, and the two sides are averaged.
pub fn drop_rate(h: &[f64], r: &[f64], center: f64) -> Result<DropRate> {
    check_points(h, r)?;
    let r_max = r.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let half = r_max / 2.0;
    let at_center = h.iter().position(|&x| x == center).map(|i| r[i]);
    let mut widths = Vec::new();
    let mut limited = false;
    for sign in [1.0, -1.0] {
        let mut side: Vec<(f64, f64)> = h.iter().zip(r).filter(|(x, _)| (*x - center) * sign > 0.0).map(|(x, v)| ((x - center).abs(), *v)).collect();
        side.sort_by(|a, b| a.0.total_cmp(&b.0));
        if let Some(v) = at_center {
            side.insert(0, (0.0, v));
        }
        let Some(k) = (0..side.len()).rev().find(|&k| side[k].1 < half) else {
            continue;
        };
        if k + 1 == side.len() {
            return Err(Error::Fit("sweep ends below half maximum; widen it".into()));
        }
        let ((d1, r1), (d2, r2)) = (side[k], side[k + 1]);
        if d1 == 0.0 {
            limited = true;
            widths.push(d2);
            continue;
        }
        let t = (half - r1) / (r2 - r1);
        widths.push((d1.ln() + t * (d2.ln() - d1.ln())).exp());
    }
    if widths.is_empty() {
        return Err(Error::Fit("no sample below half maximum: sweep resolution coarser than the width".into()));
    }
    let width = widths.iter().sum::<f64>() / widths.len() as f64;
    Ok(DropRate { rate: 1.0 / width, width, r_max, resolution_limited: limited })
}

/// Δ0(L) at `spec` for each size, with both scaling fits.
pub fn gap_scaling(spec: &ModelSpec, sizes: &[usize], solver: &SolverOptions) -> Result<ScalingReport> {
    if sizes.len() < 3 {
        return Err(Error::InvalidInput("gap scaling needs at least 3 sizes".into()));
    }
    let mut gaps = Vec::new();
    let mut floor = Vec::new();
    for &n in sizes {
        let g = ground_state(&spec.with_n(n), solver)?.gap;
        floor.push(if g < solver.tol { 1.0 } else { 0.0 });
        gaps.push(g.max(solver.tol));
    }
    let mut rep = scaling_report("gap", sizes, &gaps)?;
    if floor.iter().any(|f| *f > 0.0) {
        rep.flags.push("gap:at_solver_floor".into());
    }
    rep.companions.insert("at_floor".into(), floor);
    Ok(rep)
}

/// Derivative of the gap along `axis`, taken where the avoided crossing has
/// opened to ten times its minimum, so that it measures the diabatic slope
/// ∂E of the crossing levels rather than the curvature at the minimum.
pub fn gap_slope(spec: &ModelSpec, axis: SpinAxis, solver: &SolverOptions) -> Result<f64> {
    let gap_at = |t: f64| -> Result<f64> {
        let mut h = spec.h;
        h[axis.index()] += t;
        Ok(ground_state(&spec.with_field(h), solver)?.gap)
    };
    let d0 = gap_at(0.0)?;
    let mut t = d0.max(1e-12);
    let mut offset = 0.0;
    while t < 0.1 {
        if gap_at(t)? >= 10.0 * d0 {
            offset = t;
            break;
        }
        t *= 2.0;
    }
    let step = if offset > 0.0 { offset / 20.0 } else { 1e-4 };
    Ok(((gap_at(offset + step)? - gap_at(offset - step)?) / (2.0 * step)).abs())
}

/// Measured F_μμ(L) against (∂_μE)²/Δ0², plus R_μν(L) against the
/// scale Δ0²/(∂_μE ∂_νE) (the bound form without its undetermined prefactor).
pub fn qfim_first_order_scaling(spec: &ModelSpec, point: &Point, sizes: &[usize], pair: (SpinAxis, SpinAxis), opts: &MetroOptions) -> Result<ScalingReport> {
    if sizes.len() < 3 {
        return Err(Error::InvalidInput("need at least 3 sizes".into()));
    }
    let (mu, nu) = pair;
    let mut cols: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut f_mu = Vec::new();
    for &n in sizes {
        let s = spec.with_n(n).with_field(*point);
        let t = metro_point(&s, point, &[mu, nu], Method::FidelityBargmann, opts)?;
        let gap = t.energies.as_ref().map(|e| e.gap).unwrap_or(f64::NAN);
        let de_mu = gap_slope(&s, mu, &opts.solver)?;
        let de_nu = gap_slope(&s, nu, &opts.solver)?;
        let fm = t.f_entry(mu, mu).unwrap_or(f64::NAN);
        let fn_ = t.f_entry(nu, nu).unwrap_or(f64::NAN);
        let pred_mu = de_mu * de_mu / (gap * gap);
        let pred_nu = de_nu * de_nu / (gap * gap);
        let r = t.r_pair(mu, nu).map(|q| q.value).unwrap_or(f64::NAN);
        for (k, v) in [
            ("gap", gap),
            (&*format!("dE_{mu}"), de_mu),
            (&*format!("dE_{nu}"), de_nu),
            (&*format!("F_{nu}{nu}"), fn_),
            (&*format!("predicted_F_{mu}{mu}"), pred_mu),
            (&*format!("predicted_F_{nu}{nu}"), pred_nu),
            (&*format!("ratio_F_{mu}{mu}"), fm / pred_mu),
            (&*format!("ratio_F_{nu}{nu}"), fn_ / pred_nu),
            (&*format!("R_{mu}{nu}"), r),
            ("R_scale", gap * gap / (de_mu * de_nu)),
        ] {
            cols.entry(k.to_string()).or_default().push(v);
        }
        f_mu.push(fm);
    }
    let mut rep = scaling_report(&format!("F_{mu}{mu}"), sizes, &f_mu)?;
    rep.companions = cols;
    Ok(rep)
}
