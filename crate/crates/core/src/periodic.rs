//! Lyapunov orbits at the index-one saddles: differential correction,
//! natural-parameter continuation, energy bisection and monodromy.

use nalgebra::{Complex, Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use crate::dynamics::{hamiltonian_energy, linear_po_guess, saddle_energy, saddle_equilibrium, vector_field, PhaseState, SaddleId, SystemParams};
use crate::error::{Error, Result};
use crate::integrator::{integrate_variational, Direction, EventSpec, IntegrationSettings, Output};
use crate::linalg;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeriodicOrbit {
    /// Turning point `(x0, y0, 0, 0)`.
    pub initial_state: PhaseState,
    pub period: f64,
    pub energy: f64,
    pub saddle_id: SaddleId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrectionSettings {
    /// Convergence threshold on `|p_y|` at the half-period crossing.
    pub tol: f64,
    pub max_iter: usize,
    /// Search window for the half-period crossing.
    pub t_search: f64,
    pub integration: IntegrationSettings,
}

impl Default for CorrectionSettings {
    fn default() -> Self {
        Self {
            tol: 1e-11,
            max_iter: 25,
            t_search: 20.0,
            integration: IntegrationSettings::default(),
        }
    }
}

/// Newton iteration on `y0` with `x0` held fixed until the orbit returns
/// perpendicularly to `p_x = 0` after half a period.
pub fn differential_correction(params: &SystemParams, guess: PhaseState, saddle_id: SaddleId, settings: &CorrectionSettings) -> Result<PeriodicOrbit> {
    let mut state = PhaseState::new(guess.x, guess.y, 0.0, 0.0);
    let integration = IntegrationSettings {
        t_max: settings.t_search,
        direction: Direction::Forward,
        output: Output::Ends,
        ..settings.integration.clone()
    };
    let events = [EventSpec::momentum_x_zero(true)];
    let mut residual = f64::INFINITY;
    for _ in 0..settings.max_iter {
        let run = integrate_variational(params, &state, &integration, &events)?;
        let hit = run.base.events.first().ok_or_else(|| Error::EventNotFound(events[0].id.clone()))?;
        let phi = run.event_stm[0];
        let end = hit.state;
        residual = end.p_y.abs();
        if residual < settings.tol {
            return Ok(PeriodicOrbit {
                initial_state: state,
                period: 2.0 * hit.time,
                energy: hamiltonian_energy(params, &state),
                saddle_id,
            });
        }
        let f = vector_field(params, &end);
        let denominator = phi[(3, 1)] - phi[(2, 1)] * f[3] / f[2];
        if !(denominator.abs() >= 1e-14) {
            return Err(Error::SingularCorrection { denominator });
        }
        state.y -= end.p_y / denominator;
    }
    Err(Error::NoConvergence {
        what: "differential correction",
        iterations: settings.max_iter,
        residual,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuationFamily {
    pub orbits: Vec<PeriodicOrbit>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuationSettings {
    pub correction: CorrectionSettings,
    /// Cap on the extrapolation step in state space.
    pub max_delta: f64,
    pub max_orbits: usize,
    pub max_halvings: usize,
}

impl Default for ContinuationSettings {
    fn default() -> Self {
        Self {
            correction: CorrectionSettings::default(),
            max_delta: 0.05,
            max_orbits: 2000,
            max_halvings: 8,
        }
    }
}

/// Extrapolates `X(k+1) = X(k) + Δ`, `Δ = X(k) − X(k−1)`, correcting each
/// guess, until the last two members bracket `target_energy`.
pub fn continue_family(
    params: &SystemParams,
    orbit1: PeriodicOrbit,
    orbit2: PeriodicOrbit,
    target_energy: f64,
    settings: &ContinuationSettings,
) -> Result<ContinuationFamily> {
    if orbit1.saddle_id != orbit2.saddle_id {
        return Err(Error::InvalidParameter("continuation pair belongs to different saddles".into()));
    }
    let (lo, hi) = if orbit1.energy <= orbit2.energy { (orbit1, orbit2) } else { (orbit2, orbit1) };
    if !(hi.energy > lo.energy) {
        return Err(Error::InvalidParameter("continuation pair has equal energies".into()));
    }
    let mut orbits = vec![lo, hi];
    while orbits.last().unwrap().energy < target_energy {
        if orbits.len() >= settings.max_orbits {
            return Err(Error::EnergyNotBracketed {
                energy: target_energy,
                reached: orbits.last().unwrap().energy,
            });
        }
        let n = orbits.len();
        let (prev, last) = (orbits[n - 2].initial_state.to_vector(), orbits[n - 1].initial_state.to_vector());
        let mut delta = last - prev;
        if delta.norm() > settings.max_delta {
            delta *= settings.max_delta / delta.norm();
        }
        let mut next = None;
        for _ in 0..=settings.max_halvings {
            let guess = PhaseState::from_vector(&(last + delta));
            match differential_correction(params, guess, orbits[0].saddle_id, &settings.correction) {
                Ok(o) if o.energy > orbits[n - 1].energy => {
                    next = Some(o);
                    break;
                }
                Ok(_) | Err(_) => delta *= 0.5,
            }
        }
        match next {
            Some(o) => orbits.push(o),
            None => {
                return Err(Error::EnergyNotBracketed {
                    energy: target_energy,
                    reached: orbits.last().unwrap().energy,
                })
            }
        }
    }
    Ok(ContinuationFamily { orbits })
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrbitSettings {
    pub continuation: ContinuationSettings,
    /// Seed amplitudes of the first two family members.
    pub amplitudes: (f64, f64),
    pub energy_tol: f64,
    pub max_bisections: usize,
}

impl Default for OrbitSettings {
    fn default() -> Self {
        Self {
            continuation: ContinuationSettings::default(),
            amplitudes: (1e-4, 2e-3),
            energy_tol: 1e-10,
            max_bisections: 60,
        }
    }
}

/// The two smallest family members, corrected from the linear seed.
pub fn seed_pair(params: &SystemParams, saddle: SaddleId, settings: &OrbitSettings) -> Result<(PeriodicOrbit, PeriodicOrbit)> {
    let eq = saddle_equilibrium(params, saddle)?;
    let corr = &settings.continuation.correction;
    let (g1, _) = linear_po_guess(params, &eq, settings.amplitudes.0)?;
    let (g2, _) = linear_po_guess(params, &eq, settings.amplitudes.1)?;
    Ok((
        differential_correction(params, g1, saddle, corr)?,
        differential_correction(params, g2, saddle, corr)?,
    ))
}

/// Seed, correct, continue and bisect to the orbit with energy `energy`.
pub fn orbit_at_energy(params: &SystemParams, saddle: SaddleId, energy: f64, settings: &OrbitSettings) -> Result<PeriodicOrbit> {
    let saddle_e = saddle_energy(params, saddle)?;
    if !(energy > saddle_e) {
        return Err(Error::EnergyBelowSaddle {
            energy,
            saddle_energy: saddle_e,
        });
    }
    let (o1, o2) = seed_pair(params, saddle, settings)?;
    let (lo, hi) = if energy <= o1.energy {
        let eq = saddle_equilibrium(params, saddle)?;
        let rest = PeriodicOrbit {
            initial_state: eq.state,
            period: o1.period,
            energy: saddle_e,
            saddle_id: saddle,
        };
        (rest, o1)
    } else {
        let family = continue_family(params, o1, o2, energy, &settings.continuation)?;
        let n = family.orbits.len();
        (family.orbits[n - 2], family.orbits[n - 1])
    };
    if (hi.energy - energy).abs() < settings.energy_tol {
        return Ok(hi);
    }
    bisect(params, lo, hi, energy, settings)
}

fn bisect(params: &SystemParams, lo: PeriodicOrbit, hi: PeriodicOrbit, energy: f64, settings: &OrbitSettings) -> Result<PeriodicOrbit> {
    let corr = &settings.continuation.correction;
    let (a, b) = (lo.initial_state.to_vector(), hi.initial_state.to_vector());
    let (mut s_lo, mut s_hi) = (0.0, 1.0);
    let mut best: Option<PeriodicOrbit> = None;
    for _ in 0..settings.max_bisections {
        let s = 0.5 * (s_lo + s_hi);
        let guess = PhaseState::from_vector(&(a + (b - a) * s));
        let orbit = differential_correction(params, guess, lo.saddle_id, corr)?;
        let gap = orbit.energy - energy;
        if best.is_none_or(|o| gap.abs() < (o.energy - energy).abs()) {
            best = Some(orbit);
        }
        if gap.abs() < settings.energy_tol {
            return Ok(orbit);
        }
        if gap < 0.0 {
            s_lo = s;
        } else {
            s_hi = s;
        }
    }
    Err(Error::NoConvergence {
        what: "energy bisection",
        iterations: settings.max_bisections,
        residual: best.map_or(f64::INFINITY, |o| (o.energy - energy).abs()),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonodromyAnalysis {
    pub matrix: Matrix4<f64>,
    /// Ordered `λ1 > 1`, `1/λ1`, then the pair near 1.
    pub eigenvalues: [Complex<f64>; 4],
    pub unstable_eigvec: Vector4<f64>,
    pub stable_eigvec: Vector4<f64>,
}

impl MonodromyAnalysis {
    pub fn lambda(&self) -> f64 {
        self.eigenvalues[0].re
    }
}

/// Unit norm with a positive x component (or first nonzero component).
fn orient_unit(v: Vector4<f64>) -> Vector4<f64> {
    let u = v.normalize();
    let lead = if u[0].abs() > 1e-8 {
        u[0]
    } else {
        *u.iter().find(|c| c.abs() > 1e-12).unwrap_or(&1.0)
    };
    if lead < 0.0 {
        -u
    } else {
        u
    }
}

pub fn monodromy(params: &SystemParams, orbit: &PeriodicOrbit, integration: &IntegrationSettings) -> Result<MonodromyAnalysis> {
    let settings = IntegrationSettings {
        t_max: orbit.period,
        direction: Direction::Forward,
        output: Output::Ends,
        ..integration.clone()
    };
    let run = integrate_variational(params, &orbit.initial_state, &settings, &[])?;
    let m = *run.stm.last().unwrap();
    let mut ev = linalg::eigenvalues4(&m);
    ev.sort_by(|a, b| b.norm().total_cmp(&a.norm()));
    let eigenvalues = [ev[0], ev[3], ev[1], ev[2]];
    let lambda = eigenvalues[0].re;
    // M⁻¹ = −J Mᵀ J, so the stable direction is the dominant one of M⁻¹
    let j = crate::integrator::symplectic_form();
    let m_inv = -j * m.transpose() * j;
    Ok(MonodromyAnalysis {
        matrix: m,
        eigenvalues,
        unstable_eigvec: orient_unit(linalg::real_eigenvector(&m, lambda)),
        stable_eigvec: orient_unit(linalg::real_eigenvector(&m_inv, lambda)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrator::flow_map;
    use std::f64::consts::PI;

    fn unit() -> SystemParams {
        SystemParams::default()
    }

    fn small_top() -> PeriodicOrbit {
        let eq = saddle_equilibrium(&unit(), SaddleId::Top).unwrap();
        let (g, _) = linear_po_guess(&unit(), &eq, 1e-4).unwrap();
        differential_correction(&unit(), g, SaddleId::Top, &CorrectionSettings::default()).unwrap()
    }

    #[test]
    fn small_top_orbit_has_linear_period() {
        let o = small_top();
        assert!((o.period - 2.0 * PI / 3f64.sqrt()).abs() < 1e-3);
        assert_eq!(o.initial_state.x, -1e-4);
    }

    #[test]
    fn corrected_orbit_closes() {
        let o = small_top();
        let end = flow_map(&unit(), &o.initial_state, o.period, &IntegrationSettings::default()).unwrap();
        assert!(end.distance(&o.initial_state) < 1e-6);
    }

    #[test]
    fn half_period_crossing_is_perpendicular() {
        let o = small_top();
        let half = flow_map(&unit(), &o.initial_state, 0.5 * o.period, &IntegrationSettings::default()).unwrap();
        assert!(half.p_y.abs() < 1e-6);
        assert!(half.p_x.abs() < 1e-9);
    }

    #[test]
    fn recorrection_is_a_fixed_point() {
        let o = small_top();
        let again = differential_correction(&unit(), o.initial_state, SaddleId::Top, &CorrectionSettings::default()).unwrap();
        assert!((again.initial_state.y - o.initial_state.y).abs() < 1e-10);
    }

    #[test]
    fn below_saddle_energy_is_rejected() {
        let err = orbit_at_energy(&unit(), SaddleId::Top, 1.0 / 6.0 - 0.01, &OrbitSettings::default()).unwrap_err();
        assert!(matches!(err, Error::EnergyBelowSaddle { .. }));
    }

    #[test]
    fn family_is_monotone() {
        // the period shrinks along these families (hardening bottleneck)
        let settings = OrbitSettings::default();
        let (a, b) = seed_pair(&unit(), SaddleId::Left, &settings).unwrap();
        let fam = continue_family(&unit(), a, b, 0.2, &settings.continuation).unwrap();
        assert!(fam.orbits.last().unwrap().energy >= 0.2);
        for w in fam.orbits.windows(2) {
            assert!(w[1].energy > w[0].energy);
            assert!(w[1].period < w[0].period);
        }
    }

    #[test]
    fn orbit_at_energy_hits_target_and_mirrors() {
        let settings = OrbitSettings::default();
        let left = orbit_at_energy(&unit(), SaddleId::Left, 0.17, &settings).unwrap();
        let right = orbit_at_energy(&unit(), SaddleId::Right, 0.17, &settings).unwrap();
        assert!((left.energy - 0.17).abs() < 1e-10);
        assert!((hamiltonian_energy(&unit(), &left.initial_state) - 0.17).abs() < 1e-10);
        assert!((left.period - right.period).abs() < 1e-8);
        // both start at their left turning point, so the mirror image of one
        // start is the other orbit's half-period state
        let half = flow_map(&unit(), &right.initial_state, 0.5 * right.period, &IntegrationSettings::default()).unwrap();
        assert!(half.distance(&left.initial_state.mirrored()) < 1e-8);
    }

    #[test]
    fn near_threshold_period_tends_to_linear() {
        let o = orbit_at_energy(&unit(), SaddleId::Top, 1.0 / 6.0 + 1e-4, &OrbitSettings::default()).unwrap();
        assert!((o.period - 2.0 * PI / 3f64.sqrt()).abs() < 1e-3);
    }

    #[test]
    fn monodromy_structure() {
        let o = orbit_at_energy(&unit(), SaddleId::Top, 0.19, &OrbitSettings::default()).unwrap();
        let m = monodromy(&unit(), &o, &IntegrationSettings::default()).unwrap();
        let ev = m.eigenvalues;
        assert!(ev[0].re > 1.0);
        assert!((ev[0] * ev[1] - 1.0).norm() < 1e-6);
        assert!((ev[2] - 1.0).norm() < 1e-5 && (ev[3] - 1.0).norm() < 1e-5, "{ev:?}");
        assert!((m.matrix.determinant() - 1.0).abs() < 1e-8);
        let lam = m.lambda();
        assert!((m.matrix * m.unstable_eigvec - m.unstable_eigvec * lam).norm() < 1e-8 * lam);
        assert!((m.matrix * m.stable_eigvec - m.stable_eigvec / lam).norm() < 1e-8);
        assert!((m.stable_eigvec.norm() - 1.0).abs() < 1e-14);
    }
}
