//! Multiparameter quantum metrology for spin chains: quantum Fisher information
//! matrix, mean Uhlmann curvature and the quantumness index, evaluated on exact
//! ground states of Ising/XY chains and on Jordan–Wigner free fermions.

pub mod cli;
pub mod eigen;
pub mod error;
pub mod freefermion;
pub mod metrology;
pub mod pauli;
pub mod scaling;
pub mod state;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
pub use pauli::{ModelKind, ModelSpec, SparseOperator, SpinAxis};
pub use state::QuantumState;
