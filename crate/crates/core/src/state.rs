use crate::error::{Error, Result};
use crate::pauli::SparseOperator;
use crate::C64;

/// Normalized amplitude vector over the computational basis.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantumState {
    amps: Vec<C64>,
}

pub(crate) fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub(crate) fn norm(a: &[C64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

impl QuantumState {
    /// Normalizes `amps`; fails on a zero or non-finite vector.
    pub fn new(mut amps: Vec<C64>) -> Result<Self> {
        let nrm = norm(&amps);
        if !(nrm > 0.0 && nrm.is_finite()) {
            return Err(Error::InvalidInput("state vector has zero or non-finite norm".into()));
        }
        amps.iter_mut().for_each(|z| *z /= nrm);
        Ok(Self { amps })
    }

    pub fn basis(dim: usize, index: usize) -> Self {
        let mut amps = vec![C64::new(0.0, 0.0); dim];
        amps[index] = C64::new(1.0, 0.0);
        Self { amps }
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amps
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    /// Number of spins, when the dimension is a power of two.
    pub fn n_spins(&self) -> Option<usize> {
        self.dim().is_power_of_two().then(|| self.dim().trailing_zeros() as usize)
    }

    /// ⟨self|other⟩
    pub fn overlap(&self, other: &QuantumState) -> Result<C64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: other.dim() });
        }
        Ok(dot(&self.amps, &other.amps))
    }

    pub fn expectation(&self, op: &SparseOperator) -> Result<C64> {
        Ok(dot(&self.amps, &op.apply_vec(&self.amps)?))
    }

    pub fn with_phase(&self, theta: f64) -> Self {
        let p = C64::from_polar(1.0, theta);
        Self { amps: self.amps.iter().map(|z| z * p).collect() }
    }

    /// Applies ⊗_i u to every spin, `u` a 2×2 matrix [[u00, u01], [u10, u11]].
    pub fn apply_uniform_single_site(&mut self, u: [[C64; 2]; 2]) {
        let n = self.n_spins().expect("power-of-two dimension");
        for i in 0..n {
            let bit = 1usize << i;
            for b in 0..self.amps.len() {
                if b & bit == 0 {
                    let (a0, a1) = (self.amps[b], self.amps[b | bit]);
                    self.amps[b] = u[0][0] * a0 + u[0][1] * a1;
                    self.amps[b | bit] = u[1][0] * a0 + u[1][1] * a1;
                }
            }
        }
    }
}
