use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Correlation-matrix eigenvalues below this are projected out.
pub const PINV_TOL: f64 = 1e-10;
/// Values in (1, 1 + OVERSHOOT_TOL] are clamped to 1; beyond that is an error.
pub const OVERSHOOT_TOL: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quantumness {
    /// Clamped to [0, 1].
    pub value: f64,
    pub raw: f64,
    /// √(det 2U / det F), for two parameters.
    pub det_form: Option<f64>,
    /// Some direction of F was projected out.
    pub regularized: bool,
    pub clamped: bool,
}

/// R = ‖2i F⁻¹U‖: the largest |eigenvalue|, evaluated as twice the spectral
/// norm of C^{-1/2} W C^{-1/2}, where C and W are F and U rescaled by
/// diag(F)^{-1/2}. R does not depend on parameter units, so neither does the
/// singularity test.
pub fn quantumness(f: &DMatrix<f64>, u: &DMatrix<f64>) -> Result<Quantumness> {
    let p = f.nrows();
    if f.ncols() != p || u.nrows() != p || u.ncols() != p {
        return Err(Error::DimensionMismatch { expected: p, got: u.nrows() });
    }
    if p == 0 {
        return Err(Error::InvalidInput("empty parameter set".into()));
    }
    let d: Vec<f64> = (0..p).map(|i| f[(i, i)]).collect();
    if d.iter().any(|x| !(*x > 0.0 && x.is_finite())) || u.iter().any(|x| !x.is_finite()) {
        return Err(Error::SingularFisher);
    }
    let s: Vec<f64> = d.iter().map(|x| 1.0 / x.sqrt()).collect();
    let c = DMatrix::from_fn(p, p, |i, j| 0.5 * (f[(i, j)] + f[(j, i)]) * s[i] * s[j]);
    let w = DMatrix::from_fn(p, p, |i, j| 0.5 * (u[(i, j)] - u[(j, i)]) * s[i] * s[j]);
    let eig = SymmetricEigen::new(c);
    let mut regularized = false;
    let mut inv_sqrt = DMatrix::zeros(p, p);
    for k in 0..p {
        let lam = eig.eigenvalues[k];
        if lam < PINV_TOL {
            regularized = true;
            continue;
        }
        let v = eig.eigenvectors.column(k);
        inv_sqrt += v * v.transpose() / lam.sqrt();
    }
    if regularized && inv_sqrt.iter().all(|x| *x == 0.0) {
        return Err(Error::SingularFisher);
    }
    let m = &inv_sqrt * w * &inv_sqrt;
    let raw = 2.0 * m.singular_values().max();
    let det_form = (p == 2).then(|| {
        let det_f = f[(0, 0)] * f[(1, 1)] - f[(0, 1)] * f[(1, 0)];
        let det_2u = 4.0 * (u[(0, 0)] * u[(1, 1)] - u[(0, 1)] * u[(1, 0)]);
        (det_2u / det_f).sqrt()
    });
    if !(raw <= 1.0 + OVERSHOOT_TOL) {
        return Err(Error::QuantumnessOutOfRange(raw));
    }
    Ok(Quantumness { value: raw.min(1.0), raw, det_form: det_form.filter(|x| x.is_finite()), regularized, clamped: raw > 1.0 })
}
