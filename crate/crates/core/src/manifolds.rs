//! Tube manifolds of the Lyapunov orbits and their first-order reactive islands.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{potential_energy, saddle_equilibrium, PhaseState, SystemParams};
use crate::error::{Error, Result};
use crate::integrator::{integrate, integrate_variational, Direction, EventSpec, IntegrationSettings, Output, Trajectory};
use crate::periodic::{MonodromyAnalysis, PeriodicOrbit};

/// The Poincaré section `y = y_c`, `p_y > 0` at fixed energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectionConfig {
    pub y_c: f64,
    pub energy: f64,
}

impl SectionConfig {
    pub fn new(y_c: f64, energy: f64) -> Self {
        Self { y_c, energy }
    }

    /// `V(x, y_c) = a·x² + c`.
    fn quadratic(&self, params: &SystemParams) -> (f64, f64) {
        let a = 0.5 * params.omega_x.powi(2) + self.y_c;
        (a, potential_energy(params, 0.0, self.y_c))
    }

    /// Half-width in `x` of the admissible region.
    pub fn x_extent(&self, params: &SystemParams) -> Result<f64> {
        let (a, c) = self.quadratic(params);
        if a <= 0.0 {
            return Err(Error::InvalidParameter(format!("section y = {} is unbounded in x", self.y_c)));
        }
        if self.energy <= c {
            return Err(Error::EmptySection {
                y_c: self.y_c,
                energy: self.energy,
            });
        }
        Ok(((self.energy - c) / a).sqrt())
    }

    /// Largest `|p_x|` on the section (at `x = 0`).
    pub fn px_extent(&self, params: &SystemParams) -> Result<f64> {
        self.x_extent(params)?;
        let (_, c) = self.quadratic(params);
        Ok((2.0 * params.m_x * (self.energy - c)).sqrt())
    }

    /// `p_y ≥ 0` reconstructed from the energy condition.
    pub fn momentum_y(&self, params: &SystemParams, x: f64, p_x: f64) -> Result<f64> {
        let radicand = 2.0 * params.m_y * (self.energy - potential_energy(params, x, self.y_c) - p_x * p_x / (2.0 * params.m_x));
        if radicand < 0.0 {
            return Err(Error::OutsideEnergyBoundary { radicand });
        }
        Ok(radicand.sqrt())
    }

    pub fn lift(&self, params: &SystemParams, x: f64, p_x: f64) -> Result<PhaseState> {
        Ok(PhaseState::new(x, self.y_c, p_x, self.momentum_y(params, x, p_x)?))
    }

    pub fn inside(&self, params: &SystemParams, x: f64, p_x: f64) -> bool {
        self.momentum_y(params, x, p_x).is_ok()
    }
}

/// The closed curve `p_x²/(2m_x) + V(x, y_c) = E`, counter-clockwise, first point repeated at the end.
pub fn energy_boundary_on_section(params: &SystemParams, section: &SectionConfig, n: usize) -> Result<Vec<[f64; 2]>> {
    let xm = section.x_extent(params)?;
    let pm = section.px_extent(params)?;
    let n = n.max(3);
    let mut curve: Vec<[f64; 2]> = (0..n)
        .map(|k| {
            let th = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
            [xm * th.cos(), pm * th.sin()]
        })
        .collect();
    curve.push(curve[0]);
    Ok(curve)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stability {
    Stable,
    Unstable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Plus,
    Minus,
}

impl Side {
    pub fn sign(self) -> f64 {
        match self {
            Side::Plus => 1.0,
            Side::Minus => -1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifoldBranch {
    pub orbit: PeriodicOrbit,
    pub stability: Stability,
    pub side: Side,
    /// Displaced seed points, in orbit-time order.
    pub seeds: Vec<PhaseState>,
    pub fibers: Vec<Trajectory>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifoldSettings {
    pub n_seeds: usize,
    pub t_span: f64,
    /// Position displacement of each seed off the orbit.
    pub displacement: f64,
    pub integration: IntegrationSettings,
}

impl Default for ManifoldSettings {
    fn default() -> Self {
        Self {
            n_seeds: 400,
            t_span: 20.0,
            displacement: 1e-6,
            integration: IntegrationSettings::default(),
        }
    }
}

/// Orbit points at `k·T/n` and the transported, normalized eigenvector there.
fn transported_directions(
    params: &SystemParams,
    analysis: &MonodromyAnalysis,
    orbit: &PeriodicOrbit,
    stability: Stability,
    n: usize,
    integration: &IntegrationSettings,
) -> Result<Vec<(PhaseState, nalgebra::Vector4<f64>)>> {
    let times: Vec<f64> = (0..n).map(|k| orbit.period * k as f64 / n as f64).collect();
    let settings = IntegrationSettings {
        t_max: orbit.period,
        direction: Direction::Forward,
        output: Output::At(times),
        ..integration.clone()
    };
    let run = integrate_variational(params, &orbit.initial_state, &settings, &[])?;
    let e = match stability {
        Stability::Stable => analysis.stable_eigvec,
        Stability::Unstable => analysis.unstable_eigvec,
    };
    Ok(run.base.states.iter().zip(&run.stm).map(|(s, phi)| (*s, (phi * e).normalize())).collect())
}

/// The side whose seeds are displaced towards the bottom of the well.
pub fn well_side(params: &SystemParams, analysis: &MonodromyAnalysis, orbit: &PeriodicOrbit, stability: Stability) -> Result<Side> {
    let eq = saddle_equilibrium(params, orbit.saddle_id)?;
    let e = match stability {
        Stability::Stable => analysis.stable_eigvec,
        Stability::Unstable => analysis.unstable_eigvec,
    };
    let dot = -eq.state.x * e[0] - eq.state.y * e[1];
    Ok(if dot >= 0.0 { Side::Plus } else { Side::Minus })
}

pub fn globalize_manifold(
    params: &SystemParams,
    analysis: &MonodromyAnalysis,
    orbit: &PeriodicOrbit,
    stability: Stability,
    side: Side,
    settings: &ManifoldSettings,
) -> Result<ManifoldBranch> {
    if settings.n_seeds == 0 {
        return Err(Error::InvalidParameter("n_seeds must be positive".into()));
    }
    let seeds: Vec<PhaseState> = transported_directions(params, analysis, orbit, stability, settings.n_seeds, &settings.integration)?
        .into_iter()
        .map(|(s, e)| {
            let eps = settings.displacement / e[0].hypot(e[1]);
            PhaseState::from_vector(&(s.to_vector() + e * (side.sign() * eps)))
        })
        .collect();
    let fiber_settings = IntegrationSettings {
        t_max: settings.t_span,
        direction: match stability {
            Stability::Stable => Direction::Backward,
            Stability::Unstable => Direction::Forward,
        },
        output: Output::Steps,
        ..settings.integration.clone()
    };
    let events = EventSpec::escape_lines();
    let fibers = seeds
        .par_iter()
        .map(|s| integrate(params, s, &fiber_settings, &events))
        .collect::<Result<Vec<_>>>()?;
    Ok(ManifoldBranch {
        orbit: *orbit,
        stability,
        side,
        seeds,
        fibers,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectionCrossing {
    /// 1 for the first crossing met when leaving the orbit along the fiber.
    pub index: usize,
    pub time: f64,
    pub state: PhaseState,
}

impl SectionCrossing {
    pub fn point(&self) -> [f64; 2] {
        [self.state.x, self.state.p_x]
    }
}

/// Crossings of `y = y_c` with `p_y > 0` along one fiber.
pub fn fiber_crossings(params: &SystemParams, fiber: &Trajectory, section: &SectionConfig, integration: &IntegrationSettings) -> Result<Vec<SectionCrossing>> {
    let y_c = section.y_c;
    let event = [EventSpec::new("section", crate::integrator::Crossing::Any, true, move |_, s| s.y - y_c)];
    let mut out = Vec::new();
    for i in 1..fiber.states.len() {
        let (a, b) = (&fiber.states[i - 1], &fiber.states[i]);
        let (ga, gb) = (a.y - y_c, b.y - y_c);
        if ga == 0.0 || (ga > 0.0) == (gb > 0.0) {
            continue;
        }
        let dt = fiber.times[i] - fiber.times[i - 1];
        let settings = IntegrationSettings {
            t_max: dt * 1.5,
            direction: fiber.direction,
            output: Output::Ends,
            ..integration.clone()
        };
        let run = integrate(params, a, &settings, &event)?;
        if let Some(hit) = run.events.first() {
            if hit.state.p_y > 0.0 {
                out.push(SectionCrossing {
                    index: out.len() + 1,
                    time: fiber.times[i - 1] + hit.time,
                    state: hit.state,
                });
            }
        }
    }
    Ok(out)
}

/// Per-fiber crossing lists; `NoCrossing` names the first fiber that never meets the section.
pub fn section_crossings(
    params: &SystemParams,
    branch: &ManifoldBranch,
    section: &SectionConfig,
    integration: &IntegrationSettings,
) -> Result<Vec<Vec<SectionCrossing>>> {
    let all = branch
        .fibers
        .par_iter()
        .map(|f| fiber_crossings(params, f, section, integration))
        .collect::<Result<Vec<_>>>()?;
    if let Some(fiber) = all.iter().position(|c| c.is_empty()) {
        return Err(Error::NoCrossing { fiber });
    }
    Ok(all)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReactiveIsland {
    /// Escape channel: 1 left, 2 right, 3 top.
    pub channel: u8,
    pub section: SectionConfig,
    /// Closed curve in `(x, p_x)`; the last point repeats the first.
    pub curve: Vec<[f64; 2]>,
    pub order: u8,
}

impl ReactiveIsland {
    pub fn area(&self) -> f64 {
        polygon_area(&self.curve).abs()
    }

    pub fn centroid(&self) -> [f64; 2] {
        polygon_centroid(&self.curve)
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        island_contains(self, p)
    }

    /// Image under `(x, p_x) → (−x, −p_x)` with channels 1 and 2 swapped.
    pub fn mirrored(&self) -> Self {
        Self {
            channel: match self.channel {
                1 => 2,
                2 => 1,
                c => c,
            },
            section: self.section,
            curve: self.curve.iter().map(|p| [-p[0], -p[1]]).collect(),
            order: self.order,
        }
    }
}

/// First-order island: first crossing of each backward stable fiber, in seed order.
pub fn extract_reactive_island(
    params: &SystemParams,
    branch: &ManifoldBranch,
    section: &SectionConfig,
    integration: &IntegrationSettings,
) -> Result<ReactiveIsland> {
    if branch.stability != Stability::Stable {
        return Err(Error::InvalidParameter("reactive islands come from stable branches".into()));
    }
    let per_fiber = branch
        .fibers
        .par_iter()
        .map(|f| fiber_crossings(params, f, section, integration))
        .collect::<Result<Vec<_>>>()?;
    let total = per_fiber.len();
    let missing = per_fiber.iter().filter(|c| c.is_empty()).count();
    if missing * 100 > total {
        return Err(Error::IncompleteIsland { missing, total });
    }
    let mut curve: Vec<[f64; 2]> = Vec::with_capacity(total + 1);
    for c in per_fiber.iter().filter_map(|c| c.first()) {
        let p = c.point();
        if curve.last().is_none_or(|q| (p[0] - q[0]).hypot(p[1] - q[1]) > 1e-9) {
            curve.push(p);
        }
    }
    while curve.len() > 1 {
        let (p, q) = (curve[0], curve[curve.len() - 1]);
        if (p[0] - q[0]).hypot(p[1] - q[1]) > 1e-9 {
            break;
        }
        curve.pop();
    }
    if curve.len() < 3 {
        return Err(Error::IncompleteIsland {
            missing: total - curve.len(),
            total,
        });
    }
    curve.push(curve[0]);
    Ok(ReactiveIsland {
        channel: branch.orbit.saddle_id.channel(),
        section: *section,
        curve,
        order: 1,
    })
}

fn on_segment(p: [f64; 2], a: [f64; 2], b: [f64; 2], tol: f64) -> bool {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (cx, cy) = (a[0] + t * dx - p[0], a[1] + t * dy - p[1]);
    cx.hypot(cy) <= tol
}

/// Winding number of a closed polyline around `p`.
pub fn winding_number(curve: &[[f64; 2]], p: [f64; 2]) -> i32 {
    let mut wn = 0;
    for w in curve.windows(2) {
        let (a, b) = (w[0], w[1]);
        let cross = (b[0] - a[0]) * (p[1] - a[1]) - (p[0] - a[0]) * (b[1] - a[1]);
        if a[1] <= p[1] {
            if b[1] > p[1] && cross > 0.0 {
                wn += 1;
            }
        } else if b[1] <= p[1] && cross < 0.0 {
            wn -= 1;
        }
    }
    wn
}

/// Point-in-island test; points within 1e-9 of the curve count as inside.
pub fn island_contains(island: &ReactiveIsland, p: [f64; 2]) -> bool {
    if island.curve.windows(2).any(|w| on_segment(p, w[0], w[1], 1e-9)) {
        return true;
    }
    winding_number(&island.curve, p) != 0
}

/// Signed shoelace area of a closed polyline.
pub fn polygon_area(curve: &[[f64; 2]]) -> f64 {
    0.5 * curve.windows(2).map(|w| w[0][0] * w[1][1] - w[1][0] * w[0][1]).sum::<f64>()
}

pub fn polygon_centroid(curve: &[[f64; 2]]) -> [f64; 2] {
    let a = polygon_area(curve);
    if a.abs() < 1e-300 {
        let n = curve.len().max(1) as f64;
        return [curve.iter().map(|p| p[0]).sum::<f64>() / n, curve.iter().map(|p| p[1]).sum::<f64>() / n];
    }
    let (mut cx, mut cy) = (0.0, 0.0);
    for w in curve.windows(2) {
        let c = w[0][0] * w[1][1] - w[1][0] * w[0][1];
        cx += (w[0][0] + w[1][0]) * c;
        cy += (w[0][1] + w[1][1]) * c;
    }
    [cx / (6.0 * a), cy / (6.0 * a)]
}

/// True if two non-adjacent segments of the closed curve intersect.
pub fn self_intersects(curve: &[[f64; 2]]) -> bool {
    let n = curve.len().saturating_sub(1);
    let orient = |a: [f64; 2], b: [f64; 2], c: [f64; 2]| (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
    for i in 0..n {
        for j in i + 2..n {
            if i == 0 && j == n - 1 {
                continue;
            }
            let (a, b, c, d) = (curve[i], curve[i + 1], curve[j], curve[j + 1]);
            let (o1, o2) = (orient(a, b, c), orient(a, b, d));
            let (o3, o4) = (orient(c, d, a), orient(c, d, b));
            if o1 * o2 < 0.0 && o3 * o4 < 0.0 {
                return true;
            }
        }
    }
    false
}

/// Orbit, monodromy, well-side stable branch and island for one saddle.
#[derive(Debug, Clone)]
pub struct IslandComputation {
    pub orbit: PeriodicOrbit,
    pub analysis: MonodromyAnalysis,
    pub branch: ManifoldBranch,
    pub island: ReactiveIsland,
}

pub fn compute_island(
    params: &SystemParams,
    saddle: crate::dynamics::SaddleId,
    section: &SectionConfig,
    orbit_settings: &crate::periodic::OrbitSettings,
    settings: &ManifoldSettings,
) -> Result<IslandComputation> {
    section.x_extent(params)?;
    let orbit = crate::periodic::orbit_at_energy(params, saddle, section.energy, orbit_settings)?;
    let analysis = crate::periodic::monodromy(params, &orbit, &settings.integration)?;
    let side = well_side(params, &analysis, &orbit, Stability::Stable)?;
    let branch = globalize_manifold(params, &analysis, &orbit, Stability::Stable, side, settings)?;
    let island = extract_reactive_island(params, &branch, section, &settings.integration)?;
    Ok(IslandComputation {
        orbit,
        analysis,
        branch,
        island,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{hamiltonian_energy, SaddleId};
    use crate::periodic::{monodromy, orbit_at_energy, OrbitSettings};

    fn unit() -> SystemParams {
        SystemParams::default()
    }

    fn square() -> ReactiveIsland {
        ReactiveIsland {
            channel: 1,
            section: SectionConfig::new(0.0, 0.17),
            curve: vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [0.0, 0.0]],
            order: 1,
        }
    }

    #[test]
    fn energy_boundary_examples() {
        let s = SectionConfig::new(0.0, 0.17);
        assert!((s.px_extent(&unit()).unwrap() - 0.34f64.sqrt()).abs() < 1e-15);
        let curve = energy_boundary_on_section(&unit(), &s, 64).unwrap();
        for p in &curve {
            assert!(s.momentum_y(&unit(), p[0], p[1]).unwrap_or(0.0) < 1e-7);
            assert!(curve.iter().any(|q| (q[0] - p[0]).abs() < 1e-12 && (q[1] + p[1]).abs() < 1e-12));
        }
        assert_eq!(curve.first(), curve.last());
    }

    #[test]
    fn empty_section_is_reported() {
        let s = SectionConfig::new(0.0, -0.1);
        assert!(matches!(s.x_extent(&unit()), Err(Error::EmptySection { .. })));
        let s = SectionConfig::new(0.0, 0.17);
        assert!(matches!(s.momentum_y(&unit(), 0.0, 0.6), Err(Error::OutsideEnergyBoundary { .. })));
    }

    #[test]
    fn containment_on_square() {
        let sq = square();
        assert!(island_contains(&sq, [0.5, 0.5]));
        assert!(island_contains(&sq, [1.0, 0.5]));
        assert!(island_contains(&sq, [1.0 + 5e-10, 0.5]));
        assert!(!island_contains(&sq, [1.1, 0.5]));
        assert!((polygon_area(&sq.curve) - 1.0).abs() < 1e-15);
        assert_eq!(polygon_centroid(&sq.curve), [0.5, 0.5]);
        assert!(!self_intersects(&sq.curve));
        let bow = [[0.0, 0.0], [1.0, 1.0], [1.0, 0.0], [0.0, 1.0], [0.0, 0.0]];
        assert!(self_intersects(&bow));
    }

    #[test]
    fn stable_seeds_approach_the_orbit() {
        let o = orbit_at_energy(&unit(), SaddleId::Top, 0.17, &OrbitSettings::default()).unwrap();
        let m = monodromy(&unit(), &o, &IntegrationSettings::default()).unwrap();
        let dirs = transported_directions(&unit(), &m, &o, Stability::Stable, 8, &IntegrationSettings::default()).unwrap();
        for (x, e) in dirs {
            let seed = PhaseState::from_vector(&(x.to_vector() + e * 1e-6));
            let later = crate::integrator::flow_map(&unit(), &seed, o.period, &IntegrationSettings::default()).unwrap();
            assert!(later.distance(&x) < 0.5 * seed.distance(&x));
        }
    }

    #[test]
    fn top_island_at_e017() {
        let section = SectionConfig::new(0.0, 0.17);
        let settings = ManifoldSettings {
            n_seeds: 100,
            ..ManifoldSettings::default()
        };
        let comp = compute_island(&unit(), SaddleId::Top, &section, &OrbitSettings::default(), &settings).unwrap();
        for f in &comp.branch.fibers {
            for s in &f.states {
                assert!((hamiltonian_energy(&unit(), s) - 0.17).abs() < 1e-8);
            }
        }
        let isl = &comp.island;
        assert_eq!(isl.channel, 3);
        assert!(isl.area() > 0.0);
        assert!(!self_intersects(&isl.curve));
        assert!(isl.contains(isl.centroid()));
        for p in &isl.curve {
            assert!(section.momentum_y(&unit(), p[0], p[1]).unwrap() > 0.0);
        }
    }
}
