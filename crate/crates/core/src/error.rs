use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("n = {n} spins exceeds the memory cap of {cap}")]
    SizeCap { n: usize, cap: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("operator is not Hermitian")]
    NotHermitian,
    #[error("dimension {0} is too large for dense diagonalization")]
    DenseTooLarge(usize),
    #[error("Lanczos did not converge in {iterations} iterations (best residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("fit rejected: {0}")]
    Fit(String),
    #[error("Bargmann phase undefined: consecutive overlap {0:.3e}")]
    PhaseUndefined(f64),
    #[error("degenerate ground state inside the loop at {0:?}")]
    DegenerateLoop([f64; 3]),
    #[error("Fisher matrix singular on the requested parameters")]
    SingularFisher,
    #[error("quantumness {0} exceeds 1 beyond tolerance")]
    QuantumnessOutOfRange(f64),
    #[error("Pfaffian breakdown: {0}")]
    Pfaffian(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
