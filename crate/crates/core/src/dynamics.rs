//! The Hénon-Heiles Hamiltonian, its vector field, equilibria and linearization.
//!
//! ```text
//! H = px²/(2 mx) + py²/(2 my) + ½ωx² x² + ½ωy² y² + x² y − (δ/3) y³
//! ```

use std::f64::consts::PI;

use nalgebra::{Complex, Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SystemParams {
    pub m_x: f64,
    pub m_y: f64,
    pub omega_x: f64,
    pub omega_y: f64,
    pub delta: f64,
}

impl Default for SystemParams {
    fn default() -> Self {
        Self {
            m_x: 1.0,
            m_y: 1.0,
            omega_x: 1.0,
            omega_y: 1.0,
            delta: 1.0,
        }
    }
}

impl SystemParams {
    pub fn new(m_x: f64, m_y: f64, omega_x: f64, omega_y: f64, delta: f64) -> Result<Self> {
        let p = Self {
            m_x,
            m_y,
            omega_x,
            omega_y,
            delta,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("m_x", self.m_x), ("m_y", self.m_y), ("omega_x", self.omega_x), ("omega_y", self.omega_y)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.delta.is_finite() && self.delta != 0.0) {
            return Err(Error::InvalidParameter("delta must be nonzero".into()));
        }
        Ok(())
    }
}

/// A point `(x, y, px, py)` of phase space.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PhaseState {
    pub x: f64,
    pub y: f64,
    pub p_x: f64,
    pub p_y: f64,
}

impl PhaseState {
    pub const fn new(x: f64, y: f64, p_x: f64, p_y: f64) -> Self {
        Self { x, y, p_x, p_y }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.x, self.y, self.p_x, self.p_y]
    }

    pub fn from_slice(s: &[f64]) -> Self {
        Self::new(s[0], s[1], s[2], s[3])
    }

    pub fn to_vector(self) -> Vector4<f64> {
        Vector4::new(self.x, self.y, self.p_x, self.p_y)
    }

    pub fn from_vector(v: &Vector4<f64>) -> Self {
        Self::new(v[0], v[1], v[2], v[3])
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|c| c.is_finite())
    }

    pub fn distance(&self, other: &PhaseState) -> f64 {
        (self.to_vector() - other.to_vector()).norm()
    }

    /// Image under the reflection `(x, y, px, py) → (−x, y, −px, py)`.
    pub fn mirrored(&self) -> Self {
        Self::new(-self.x, self.y, -self.p_x, self.p_y)
    }
}

pub fn potential_energy(params: &SystemParams, x: f64, y: f64) -> f64 {
    0.5 * params.omega_x.powi(2) * x * x + 0.5 * params.omega_y.powi(2) * y * y + x * x * y - params.delta / 3.0 * y.powi(3)
}

pub fn kinetic_energy(params: &SystemParams, p_x: f64, p_y: f64) -> f64 {
    p_x * p_x / (2.0 * params.m_x) + p_y * p_y / (2.0 * params.m_y)
}

pub fn hamiltonian_energy(params: &SystemParams, s: &PhaseState) -> f64 {
    kinetic_energy(params, s.p_x, s.p_y) + potential_energy(params, s.x, s.y)
}

/// Hamilton's equations as a raw array, shared by the integrator kernels.
#[inline]
pub(crate) fn rates(params: &SystemParams, s: &[f64]) -> [f64; 4] {
    let (x, y, px, py) = (s[0], s[1], s[2], s[3]);
    [
        px / params.m_x,
        py / params.m_y,
        -params.omega_x * params.omega_x * x - 2.0 * x * y,
        -params.omega_y * params.omega_y * y - x * x + params.delta * y * y,
    ]
}

pub fn vector_field(params: &SystemParams, s: &PhaseState) -> [f64; 4] {
    rates(params, &s.to_array())
}

/// Jacobian of [`vector_field`] at `s`.
pub fn linearize(params: &SystemParams, s: &PhaseState) -> Matrix4<f64> {
    jacobian_at(params, s.x, s.y)
}

#[inline]
pub(crate) fn jacobian_at(params: &SystemParams, x: f64, y: f64) -> Matrix4<f64> {
    Matrix4::new(
        0.0,
        0.0,
        1.0 / params.m_x,
        0.0,
        0.0,
        0.0,
        0.0,
        1.0 / params.m_y,
        -params.omega_x.powi(2) - 2.0 * y,
        -2.0 * x,
        0.0,
        0.0,
        -2.0 * x,
        -params.omega_y.powi(2) + 2.0 * params.delta * y,
        0.0,
        0.0,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SaddleId {
    Top,
    Left,
    Right,
}

impl SaddleId {
    pub const ALL: [SaddleId; 3] = [SaddleId::Left, SaddleId::Right, SaddleId::Top];

    /// Escape channel guarded by this saddle's bottleneck.
    pub fn channel(self) -> u8 {
        match self {
            SaddleId::Left => 1,
            SaddleId::Right => 2,
            SaddleId::Top => 3,
        }
    }

    pub fn from_channel(channel: u8) -> Option<Self> {
        match channel {
            1 => Some(SaddleId::Left),
            2 => Some(SaddleId::Right),
            3 => Some(SaddleId::Top),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SaddleId::Top => "top",
            SaddleId::Left => "left",
            SaddleId::Right => "right",
        }
    }
}

impl std::str::FromStr for SaddleId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "top" => Ok(SaddleId::Top),
            "left" => Ok(SaddleId::Left),
            "right" => Ok(SaddleId::Right),
            other => Err(Error::InvalidParameter(format!("unknown saddle `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EquilibriumKind {
    CenterCenter,
    SaddleCenter,
    /// Any other linear type; does not occur for the default parameters.
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquilibriumPoint {
    pub state: PhaseState,
    pub kind: EquilibriumKind,
    pub eigenvalues: [Complex<f64>; 4],
    /// Which bottleneck the point belongs to; `None` for the well bottom.
    pub saddle: Option<SaddleId>,
}

fn classify(eigenvalues: &[Complex<f64>; 4]) -> EquilibriumKind {
    let scale = eigenvalues.iter().map(|e| e.norm()).fold(1.0, f64::max);
    let real = eigenvalues.iter().filter(|e| e.re.abs() > 1e-9 * scale && e.im.abs() <= 1e-9 * scale).count();
    let imaginary = eigenvalues.iter().filter(|e| e.re.abs() <= 1e-9 * scale && e.im.abs() > 1e-9 * scale).count();
    match (real, imaginary) {
        (0, 4) => EquilibriumKind::CenterCenter,
        (2, 2) => EquilibriumKind::SaddleCenter,
        _ => EquilibriumKind::Other,
    }
}

fn equilibrium(params: &SystemParams, x: f64, y: f64, saddle: Option<SaddleId>) -> EquilibriumPoint {
    let state = PhaseState::new(x, y, 0.0, 0.0);
    let eigenvalues = linalg::eigenvalues4(&linearize(params, &state));
    EquilibriumPoint {
        state,
        kind: classify(&eigenvalues),
        eigenvalues,
        saddle,
    }
}

/// The four equilibria, ordered origin, top, left, right.
///
/// The lower saddles solve ∇V = 0 with `x ≠ 0`:
/// `y = −ωx²/2`, `x² = δ y² − ωy² y`.
pub fn equilibria(params: &SystemParams) -> Vec<EquilibriumPoint> {
    let mut out = vec![
        equilibrium(params, 0.0, 0.0, None),
        equilibrium(params, 0.0, params.omega_y.powi(2) / params.delta, Some(SaddleId::Top)),
    ];
    let y_low = -params.omega_x.powi(2) / 2.0;
    let x_sq = params.delta * y_low * y_low - params.omega_y.powi(2) * y_low;
    if x_sq > 0.0 {
        let x_low = x_sq.sqrt();
        out.push(equilibrium(params, -x_low, y_low, Some(SaddleId::Left)));
        out.push(equilibrium(params, x_low, y_low, Some(SaddleId::Right)));
    }
    out
}

pub fn saddle_equilibrium(params: &SystemParams, saddle: SaddleId) -> Result<EquilibriumPoint> {
    equilibria(params)
        .into_iter()
        .find(|e| e.saddle == Some(saddle))
        .filter(|e| e.kind == EquilibriumKind::SaddleCenter)
        .ok_or(Error::NotASaddle)
}

pub fn saddle_energy(params: &SystemParams, saddle: SaddleId) -> Result<f64> {
    let eq = saddle_equilibrium(params, saddle)?;
    Ok(hamiltonian_energy(params, &eq.state))
}

/// Eigen-structure of the linearization at a saddle-center equilibrium.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaddleEigenbasis {
    pub lambda: f64,
    pub omega: f64,
    pub v_plus: Vector4<f64>,
    pub v_minus: Vector4<f64>,
    pub v_center_re: Vector4<f64>,
    pub v_center_im: Vector4<f64>,
}

impl SaddleEigenbasis {
    pub fn center(&self) -> [Complex<f64>; 4] {
        [0, 1, 2, 3].map(|i| Complex::new(self.v_center_re[i], self.v_center_im[i]))
    }
}

pub fn saddle_eigenbasis(params: &SystemParams, eq: &EquilibriumPoint) -> Result<SaddleEigenbasis> {
    if eq.kind != EquilibriumKind::SaddleCenter {
        return Err(Error::NotASaddle);
    }
    let a = linearize(params, &eq.state);
    let lambda = eq.eigenvalues.iter().map(|e| e.re).fold(f64::NEG_INFINITY, f64::max);
    let omega = eq
        .eigenvalues
        .iter()
        .filter(|e| e.re.abs() < 1e-9 * (1.0 + lambda))
        .map(|e| e.im.abs())
        .fold(0.0, f64::max);
    let v_plus = linalg::orient_real(linalg::real_eigenvector(&a, lambda));
    let v_minus = linalg::orient_real(linalg::real_eigenvector(&a, -lambda));
    let center = linalg::orient_complex(linalg::complex_eigenvector(&a, Complex::new(0.0, omega)));
    Ok(SaddleEigenbasis {
        lambda,
        omega,
        v_plus,
        v_minus,
        v_center_re: Vector4::from_fn(|i, _| center[i].re),
        v_center_im: Vector4::from_fn(|i, _| center[i].im),
    })
}

/// Seed for a small Lyapunov orbit from the linear center solution with
/// `A1 = A2 = 0` and `B = −A_x/2`, together with the period guess `2π/ω`.
pub fn linear_po_guess(params: &SystemParams, eq: &EquilibriumPoint, amplitude: f64) -> Result<(PhaseState, f64)> {
    if !(amplitude >= 0.0 && amplitude.is_finite()) {
        return Err(Error::InvalidParameter(format!("amplitude must be >= 0, got {amplitude}")));
    }
    let basis = saddle_eigenbasis(params, eq)?;
    let offset = basis.v_center_re * amplitude;
    let seed = PhaseState::new(eq.state.x - offset[0], eq.state.y - offset[1], 0.0, 0.0);
    Ok((seed, 2.0 * PI / basis.omega))
}
