use crate::eigen::{ground_state_tracked, EigenResult, SolverOptions};
use crate::error::{Error, Result};
use crate::pauli::{ModelKind, ModelSpec};
use crate::state::QuantumState;
use crate::C64;

/// A point in a three-dimensional parameter space, indexed by `SpinAxis`.
pub type Point = [f64; 3];

#[derive(Clone, Debug)]
pub struct Probe {
    pub state: QuantumState,
    pub degenerate: bool,
}

/// A smooth-almost-everywhere family of pure states ψ(λ).
pub trait StateFamily: Sync {
    fn probe(&self, point: &Point, previous: Option<&QuantumState>) -> Result<Probe>;

    /// Signed `t` at which `point + t·dir` meets a first-order transition
    /// line, if the segment direction crosses one.
    fn first_order_crossing(&self, _point: &Point, _dir: &Point) -> Option<f64> {
        None
    }
}

/// Ground states of an Ising chain as a function of its field (h_x, h_y, h_z).
pub struct GroundStateFamily {
    pub spec: ModelSpec,
    pub solver: SolverOptions,
}

impl GroundStateFamily {
    pub fn new(spec: ModelSpec, solver: SolverOptions) -> Result<Self> {
        if !spec.is_ising() {
            return Err(Error::InvalidInput("field family needs an Ising model".into()));
        }
        spec.validate()?;
        Ok(Self { spec, solver })
    }

    pub fn solve(&self, point: &Point, previous: Option<&QuantumState>) -> Result<EigenResult> {
        ground_state_tracked(&self.spec.with_field(*point), previous, &self.solver)
    }
}

impl StateFamily for GroundStateFamily {
    fn probe(&self, point: &Point, previous: Option<&QuantumState>) -> Result<Probe> {
        let r = self.solve(point, previous)?;
        Ok(Probe { state: r.ground, degenerate: r.degenerate })
    }

    /// The ferromagnet's ordered phase (transverse field below 1) is cut by
    /// the first-order line h_z = 0.
    fn first_order_crossing(&self, point: &Point, dir: &Point) -> Option<f64> {
        let transverse = point[0].hypot(point[1]);
        (self.spec.kind == ModelKind::FerroIsing && transverse < 1.0 && dir[2] != 0.0).then(|| -point[2] / dir[2])
    }
}

/// ψ(φ) = exp(−i φ·S) ψ₀ with S the global spin.
pub struct RotationFamily {
    pub ground: QuantumState,
}

/// exp(−i φ·σ/2) as a 2×2 matrix in the (↑, ↓) basis.
pub fn spin_half_rotation(phi: &Point) -> [[C64; 2]; 2] {
    let theta = (phi[0] * phi[0] + phi[1] * phi[1] + phi[2] * phi[2]).sqrt();
    let c = (theta / 2.0).cos();
    let s = if theta > 0.0 { (theta / 2.0).sin() / theta } else { 0.5 };
    let [x, y, z] = phi.map(|p| p * s);
    [[C64::new(c, -z), C64::new(-y, -x)], [C64::new(y, -x), C64::new(c, z)]]
}

impl StateFamily for RotationFamily {
    fn probe(&self, point: &Point, _previous: Option<&QuantumState>) -> Result<Probe> {
        let mut state = self.ground.clone();
        state.apply_uniform_single_site(spin_half_rotation(point));
        Ok(Probe { state, degenerate: false })
    }
}
