//! Spin-chain Hamiltonians on the 2^n computational basis.
//!
//! Bit `i` of a basis index is spin `i`; a cleared bit is σ^z = +1. Chains are
//! periodic (site n ≡ site 0).

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::state::QuantumState;
use crate::C64;

pub const DEFAULT_MAX_SPINS: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpinAxis {
    X,
    Y,
    Z,
}

impl SpinAxis {
    pub const ALL: [SpinAxis; 3] = [SpinAxis::X, SpinAxis::Y, SpinAxis::Z];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn label(self) -> char {
        ['x', 'y', 'z'][self.index()]
    }

    pub fn unit(self) -> [f64; 3] {
        let mut e = [0.0; 3];
        e[self.index()] = 1.0;
        e
    }
}

impl fmt::Display for SpinAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.label())
    }
}

impl FromStr for SpinAxis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().trim_start_matches("h_").trim_start_matches("phi_") {
            "x" | "X" => Ok(SpinAxis::X),
            "y" | "Y" => Ok(SpinAxis::Y),
            "z" | "Z" => Ok(SpinAxis::Z),
            other => Err(Error::InvalidInput(format!("unknown axis '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// H = −Σ σ^z_i σ^z_{i+1} + h·Σ σ_i
    FerroIsing,
    /// H = +Σ σ^z_i σ^z_{i+1} − h·Σ σ_i
    AntiferroIsing,
    /// H = −Σ [(1+γ)/2 σ^x σ^x + (1−γ)/2 σ^y σ^y + λ σ^z]
    XyChain,
}

impl FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "ferro" | "ferro_ising" | "ferroising" => Ok(ModelKind::FerroIsing),
            "antiferro" | "antiferro_ising" | "antiferroising" => Ok(ModelKind::AntiferroIsing),
            "xy" | "xy_chain" | "xychain" => Ok(ModelKind::XyChain),
            other => Err(Error::InvalidInput(format!("unknown model '{other}'"))),
        }
    }
}

/// Scalar couplings addressable by sweeps.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Coupling {
    Hx,
    Hy,
    Hz,
    Gamma,
    Lambda,
}

impl Coupling {
    pub fn name(self) -> &'static str {
        match self {
            Coupling::Hx => "hx",
            Coupling::Hy => "hy",
            Coupling::Hz => "hz",
            Coupling::Gamma => "gamma",
            Coupling::Lambda => "lambda",
        }
    }

    pub fn field(axis: SpinAxis) -> Self {
        [Coupling::Hx, Coupling::Hy, Coupling::Hz][axis.index()]
    }
}

impl FromStr for Coupling {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('_', "").as_str() {
            "hx" => Ok(Coupling::Hx),
            "hy" => Ok(Coupling::Hy),
            "hz" => Ok(Coupling::Hz),
            "gamma" => Ok(Coupling::Gamma),
            "lambda" => Ok(Coupling::Lambda),
            other => Err(Error::InvalidInput(format!("unknown coupling '{other}'"))),
        }
    }
}

fn default_gamma() -> f64 {
    1.0
}

fn default_cap() -> usize {
    DEFAULT_MAX_SPINS
}

/// A periodic chain. Ising kinds read `h`; the XY chain reads `gamma`, `lambda`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub n: usize,
    #[serde(default)]
    pub h: [f64; 3],
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default)]
    pub lambda: f64,
    #[serde(default = "default_cap")]
    pub max_spins: usize,
}

impl ModelSpec {
    pub fn ferro(n: usize, h: [f64; 3]) -> Self {
        Self { kind: ModelKind::FerroIsing, n, h, gamma: 1.0, lambda: 0.0, max_spins: DEFAULT_MAX_SPINS }
    }

    pub fn antiferro(n: usize, h: [f64; 3]) -> Self {
        Self { kind: ModelKind::AntiferroIsing, ..Self::ferro(n, h) }
    }

    pub fn xy(n: usize, gamma: f64, lambda: f64) -> Self {
        Self { kind: ModelKind::XyChain, gamma, lambda, ..Self::ferro(n, [0.0; 3]) }
    }

    pub fn with_n(&self, n: usize) -> Self {
        Self { n, ..self.clone() }
    }

    pub fn with_field(&self, h: [f64; 3]) -> Self {
        Self { h, ..self.clone() }
    }

    pub fn is_ising(&self) -> bool {
        self.kind != ModelKind::XyChain
    }

    pub fn dim(&self) -> usize {
        1usize << self.n
    }

    pub fn get(&self, c: Coupling) -> f64 {
        match c {
            Coupling::Hx => self.h[0],
            Coupling::Hy => self.h[1],
            Coupling::Hz => self.h[2],
            Coupling::Gamma => self.gamma,
            Coupling::Lambda => self.lambda,
        }
    }

    pub fn set(&mut self, c: Coupling, v: f64) {
        match c {
            Coupling::Hx => self.h[0] = v,
            Coupling::Hy => self.h[1] = v,
            Coupling::Hz => self.h[2] = v,
            Coupling::Gamma => self.gamma = v,
            Coupling::Lambda => self.lambda = v,
        }
    }

    /// Whether `c` is a coupling of this model kind.
    pub fn accepts(&self, c: Coupling) -> bool {
        matches!(
            (self.kind, c),
            (ModelKind::XyChain, Coupling::Gamma | Coupling::Lambda)
                | (ModelKind::FerroIsing | ModelKind::AntiferroIsing, Coupling::Hx | Coupling::Hy | Coupling::Hz)
        )
    }

    pub fn validate(&self) -> Result<()> {
        check_size(self.n, self.max_spins)?;
        match self.kind {
            ModelKind::XyChain => {
                if !(self.gamma > 0.0 && self.gamma <= 1.0) {
                    return Err(Error::InvalidModel(format!("gamma = {} outside (0, 1]", self.gamma)));
                }
                if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
                    return Err(Error::InvalidModel(format!("lambda = {} must be finite and >= 0", self.lambda)));
                }
            }
            _ => {
                if self.h.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidModel(format!("non-finite field {:?}", self.h)));
                }
            }
        }
        Ok(())
    }
}

fn check_size(n: usize, cap: usize) -> Result<()> {
    if n < 3 {
        return Err(Error::InvalidModel(format!("n = {n} < 3 double-counts periodic bonds")));
    }
    if n > cap || n >= usize::BITS as usize - 1 || n > 31 {
        return Err(Error::SizeCap { n, cap });
    }
    Ok(())
}

/// ±1 eigenvalue of σ^z on spin `i` of basis state `b`.
#[inline]
pub fn zsign(b: usize, i: usize) -> f64 {
    1.0 - 2.0 * ((b >> i) & 1) as f64
}

/// ⟨b ⊕ 2^i| σ^y_i |b⟩.
#[inline]
fn y_element(b: usize, i: usize) -> C64 {
    // σ^y|0⟩ = i|1⟩, σ^y|1⟩ = −i|0⟩
    if (b >> i) & 1 == 0 {
        C64::new(0.0, 1.0)
    } else {
        C64::new(0.0, -1.0)
    }
}

/// Compressed-row sparse operator. Rows are sorted, columns within a row are
/// sorted and unique, so the triplet view is canonical.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseOperator {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<C64>,
    hermitian: bool,
}

impl SparseOperator {
    /// Assemble from triplets; duplicates are summed and explicit zeros dropped.
    pub fn from_triplets(dim: usize, mut triplets: Vec<(usize, usize, C64)>) -> Result<Self> {
        if !dim.is_power_of_two() {
            return Err(Error::InvalidInput(format!("dimension {dim} is not a power of two")));
        }
        if let Some(&(r, c, _)) = triplets.iter().find(|t| t.0 >= dim || t.1 >= dim) {
            return Err(Error::InvalidInput(format!("index ({r}, {c}) out of range for dim {dim}")));
        }
        triplets.sort_by_key(|t| (t.0, t.1));
        let mut rows: Vec<Vec<(usize, C64)>> = vec![Vec::new(); dim];
        for (r, c, v) in triplets {
            let row = &mut rows[r];
            match row.last_mut() {
                Some(last) if last.0 == c => last.1 += v,
                _ => row.push((c, v)),
            }
        }
        let mut op = Self::from_rows(dim, rows.into_iter(), false);
        op.hermitian = op.check_hermitian();
        Ok(op)
    }

    fn from_rows(dim: usize, rows: impl Iterator<Item = Vec<(usize, C64)>>, hermitian: bool) -> Self {
        let mut row_ptr = Vec::with_capacity(dim + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|e| e.0);
            let mut k = 0;
            while k < row.len() {
                let c = row[k].0;
                let mut v = row[k].1;
                k += 1;
                while k < row.len() && row[k].0 == c {
                    v += row[k].1;
                    k += 1;
                }
                if v != C64::new(0.0, 0.0) {
                    cols.push(c as u32);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        Self { dim, row_ptr, cols, vals, hermitian }
    }

    pub fn identity(dim: usize) -> Result<Self> {
        let t = (0..dim).map(|i| (i, i, C64::new(1.0, 0.0))).collect();
        Self::from_triplets(dim, t)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    /// All matrix elements real in the computational basis.
    pub fn is_real(&self) -> bool {
        self.vals.iter().all(|v| v.im == 0.0)
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[span.clone()].iter().map(|&c| c as usize).zip(self.vals[span].iter().copied())
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.dim).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.cols[span.clone()].binary_search(&(c as u32)) {
            Ok(k) => self.vals[span.start + k],
            Err(_) => C64::new(0.0, 0.0),
        }
    }

    fn check_hermitian(&self) -> bool {
        self.entries().all(|(r, c, v)| self.get(c, r) == v.conj())
    }

    /// out = A·v
    pub fn apply_into(&self, v: &[C64], out: &mut [C64]) -> Result<()> {
        if v.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: v.len() });
        }
        if out.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: out.len() });
        }
        for (r, o) in out.iter_mut().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * v[self.cols[k] as usize];
            }
            *o = acc;
        }
        Ok(())
    }

    pub fn apply_vec(&self, v: &[C64]) -> Result<Vec<C64>> {
        let mut out = vec![C64::new(0.0, 0.0); self.dim];
        self.apply_into(v, &mut out)?;
        Ok(out)
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for (r, c, v) in self.entries() {
            m[(r, c)] = v;
        }
        m
    }
}

pub fn apply(op: &SparseOperator, v: &QuantumState) -> Result<Vec<C64>> {
    op.apply_vec(v.amplitudes())
}

pub fn build_hamiltonian(spec: &ModelSpec) -> Result<SparseOperator> {
    spec.validate()?;
    let n = spec.n;
    let dim = spec.dim();
    let bond = |i: usize| (i + 1) % n;
    let rows = (0..dim).map(|b| {
        let mut row = Vec::with_capacity(n + 1);
        match spec.kind {
            ModelKind::FerroIsing | ModelKind::AntiferroIsing => {
                // ferro: −zz + h·σ; antiferro: +zz − h·σ
                let s = if spec.kind == ModelKind::FerroIsing { 1.0 } else { -1.0 };
                let [hx, hy, hz] = spec.h;
                let mut diag = 0.0;
                for i in 0..n {
                    diag += -s * zsign(b, i) * zsign(b, bond(i)) + s * hz * zsign(b, i);
                }
                row.push((b, C64::new(diag, 0.0)));
                for i in 0..n {
                    let v = s * (C64::new(hx, 0.0) + hy * y_element(b ^ (1 << i), i));
                    if v != C64::new(0.0, 0.0) {
                        row.push((b ^ (1 << i), v));
                    }
                }
            }
            ModelKind::XyChain => {
                let mut diag = 0.0;
                for i in 0..n {
                    diag -= spec.lambda * zsign(b, i);
                }
                row.push((b, C64::new(diag, 0.0)));
                for i in 0..n {
                    let j = bond(i);
                    let parallel = ((b >> i) ^ (b >> j)) & 1 == 0;
                    // −[(1+γ)/2 xx + (1−γ)/2 yy]: −γ on parallel pairs, −1 on antiparallel
                    let v = if parallel { -spec.gamma } else { -1.0 };
                    if v != 0.0 {
                        row.push((b ^ (1 << i) ^ (1 << j), C64::new(v, 0.0)));
                    }
                }
            }
        }
        row
    });
    Ok(SparseOperator::from_rows(dim, rows, true))
}

/// S_axis = Σ_i σ^axis_i / 2.
pub fn build_global_spin(n: usize, axis: SpinAxis) -> Result<SparseOperator> {
    build_global_spin_capped(n, axis, DEFAULT_MAX_SPINS)
}

pub fn build_global_spin_capped(n: usize, axis: SpinAxis, cap: usize) -> Result<SparseOperator> {
    check_size(n, cap)?;
    let dim = 1usize << n;
    let rows = (0..dim).map(|b| match axis {
        SpinAxis::Z => vec![(b, C64::new((0..n).map(|i| zsign(b, i)).sum::<f64>() / 2.0, 0.0))],
        SpinAxis::X => (0..n).map(|i| (b ^ (1 << i), C64::new(0.5, 0.0))).collect(),
        SpinAxis::Y => (0..n).map(|i| (b ^ (1 << i), 0.5 * y_element(b ^ (1 << i), i))).collect(),
    });
    Ok(SparseOperator::from_rows(dim, rows, true))
}

/// Σ_i (−1)^i σ^z_i / 2.
pub fn staggered_magnetization(n: usize) -> Result<SparseOperator> {
    check_size(n, usize::MAX)?;
    let dim = 1usize << n;
    let rows = (0..dim).map(|b| {
        let m: f64 = (0..n).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 } * zsign(b, i)).sum();
        vec![(b, C64::new(m / 2.0, 0.0))]
    });
    Ok(SparseOperator::from_rows(dim, rows, true))
}

/// Eigenvalue of Π_i σ^z_i on basis state `b`.
#[inline]
pub fn parity(b: usize) -> i32 {
    if b.count_ones() % 2 == 0 {
        1
    } else {
        -1
    }
}
