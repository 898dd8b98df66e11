//! Exact tensors of the rotation protocol ψ(φ) = exp(−iφ·S)ψ₀ at φ = 0.

use nalgebra::Matrix3;

use crate::error::{Error, Result};
use crate::pauli::{build_global_spin_capped, SpinAxis};
use crate::state::{dot, QuantumState};

/// F_μν = 4·Cov_sym(S_μ, S_ν) and U_μν = −i⟨[S_μ, S_ν]⟩ (so U_xy = ⟨S_z⟩).
pub fn spin_covariance_qfim(ground: &QuantumState, n: usize) -> Result<(Matrix3<f64>, Matrix3<f64>)> {
    if !ground.dim().is_power_of_two() {
        return Err(Error::InvalidInput(format!("dimension {} is not a power of two", ground.dim())));
    }
    if ground.dim() != 1 << n {
        return Err(Error::DimensionMismatch { expected: 1 << n, got: ground.dim() });
    }
    let psi = ground.amplitudes();
    let mut sv = Vec::with_capacity(3);
    for a in SpinAxis::ALL {
        sv.push(build_global_spin_capped(n, a, 31)?.apply_vec(psi)?);
    }
    let mean: Vec<f64> = sv.iter().map(|v| dot(psi, v).re).collect();
    let mut f = Matrix3::zeros();
    let mut u = Matrix3::zeros();
    for i in 0..3 {
        for j in 0..3 {
            // ⟨S_i S_j⟩ = ⟨S_i ψ | S_j ψ⟩
            let m = dot(&sv[i], &sv[j]);
            f[(i, j)] = 4.0 * (m.re - mean[i] * mean[j]);
            u[(i, j)] = 2.0 * m.im;
        }
    }
    let f = (f + f.transpose()) * 0.5;
    let u = (u - u.transpose()) * 0.5;
    Ok((f, u))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::C64;

    #[test]
    fn coherent_state() {
        let n = 5;
        let (f, u) = spin_covariance_qfim(&QuantumState::basis(1 << n, 0), n).unwrap();
        assert!((f[(0, 0)] - n as f64).abs() < 1e-12 && (f[(1, 1)] - n as f64).abs() < 1e-12);
        assert!(f[(2, 2)].abs() < 1e-12);
        assert!((u[(0, 1)] - n as f64 / 2.0).abs() < 1e-12);
        assert!(u[(1, 2)].abs() < 1e-12 && u[(2, 0)].abs() < 1e-12);
    }

    #[test]
    fn ghz_state() {
        let n = 6;
        let mut amps = vec![C64::new(0.0, 0.0); 1 << n];
        amps[0] = C64::new(1.0, 0.0);
        amps[(1 << n) - 1] = C64::new(1.0, 0.0);
        let (f, u) = spin_covariance_qfim(&QuantumState::new(amps).unwrap(), n).unwrap();
        assert!((f[(2, 2)] - (n * n) as f64).abs() < 1e-12);
        assert!(u[(0, 1)].abs() < 1e-12);
    }
}
