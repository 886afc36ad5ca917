//! Adaptive integration of the Hénon-Heiles flow.
//!
//! A DOP853 pair (8th order, embedded 5th/3rd order error estimates) with a
//! PI step controller. Dense output is only built for steps in which an event
//! brackets or a sample time falls. Events are located by Illinois-type
//! regula falsi on the dense interpolant.
//!
//! Backward integration negates the vector field; reported times always
//! increase from zero and [`Trajectory::direction`] records the sense.

mod dop853;
mod tableau;

use std::sync::Arc;

use nalgebra::Matrix4;
use serde::{Deserialize, Serialize};

use crate::dynamics::{jacobian_at, rates, PhaseState, SystemParams};
use crate::error::{Error, Result};

pub(crate) use dop853::{Dop853, Rhs};

/// Escape lines bounding the well.
pub const ESCAPE_X: f64 = 1.25;
pub const ESCAPE_Y: f64 = 1.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Forward,
    Backward,
}

impl Direction {
    pub fn sign(self) -> f64 {
        match self {
            Direction::Forward => 1.0,
            Direction::Backward => -1.0,
        }
    }
}

/// Which states a run keeps.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum Output {
    /// Every accepted step.
    #[default]
    Steps,
    /// Initial and final state only.
    Ends,
    /// Interpolated states at the given (increasing) times.
    At(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegrationSettings {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub t_max: f64,
    pub direction: Direction,
    /// Target `|guard|` at located events.
    pub event_tol: f64,
    pub output: Output,
    pub max_steps: usize,
}

impl Default for IntegrationSettings {
    fn default() -> Self {
        Self {
            rel_tol: 1e-12,
            abs_tol: 1e-12,
            max_step: 0.5,
            t_max: 30.0,
            direction: Direction::Forward,
            event_tol: 1e-14,
            output: Output::Steps,
            max_steps: 2_000_000,
        }
    }
}

impl IntegrationSettings {
    pub fn with_t_max(mut self, t_max: f64) -> Self {
        self.t_max = t_max;
        self
    }

    pub fn with_direction(mut self, direction: Direction) -> Self {
        self.direction = direction;
        self
    }

    pub fn with_output(mut self, output: Output) -> Self {
        self.output = output;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let tol_ok = |t: f64| t > 0.0 && t < 1.0;
        if !tol_ok(self.rel_tol) || !tol_ok(self.abs_tol) {
            return Err(Error::InvalidParameter("tolerances must lie in (0, 1)".into()));
        }
        if !(self.t_max >= 0.0 && self.t_max.is_finite()) {
            return Err(Error::InvalidParameter(format!("t_max must be >= 0, got {}", self.t_max)));
        }
        if !(self.max_step > 0.0) {
            return Err(Error::InvalidParameter("max_step must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Crossing {
    Rising,
    Falling,
    Any,
}

pub type Guard = Arc<dyn Fn(f64, &PhaseState) -> f64 + Send + Sync>;

/// A scalar guard whose zero crossings are reported (and optionally stop the run).
#[derive(Clone)]
pub struct EventSpec {
    pub id: String,
    pub guard: Guard,
    pub direction: Crossing,
    pub terminal: bool,
}

impl std::fmt::Debug for EventSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EventSpec")
            .field("id", &self.id)
            .field("direction", &self.direction)
            .field("terminal", &self.terminal)
            .finish()
    }
}

impl EventSpec {
    pub fn new(id: impl Into<String>, direction: Crossing, terminal: bool, guard: impl Fn(f64, &PhaseState) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            id: id.into(),
            guard: Arc::new(guard),
            direction,
            terminal,
        }
    }

    /// Terminal events on the three escape lines, in channel order 1, 2, 3.
    pub fn escape_lines() -> Vec<EventSpec> {
        vec![
            EventSpec::new("x = -1.25", Crossing::Any, true, |_, s| s.x + ESCAPE_X),
            EventSpec::new("x = +1.25", Crossing::Any, true, |_, s| s.x - ESCAPE_X),
            EventSpec::new("y = +1.25", Crossing::Any, true, |_, s| s.y - ESCAPE_Y),
        ]
    }

    /// `px = 0`, the half-period event of the symmetric Lyapunov orbits.
    pub fn momentum_x_zero(terminal: bool) -> EventSpec {
        EventSpec::new("p_x = 0", Crossing::Any, terminal, |_, s| s.p_x)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventHit {
    pub id: String,
    pub time: f64,
    pub state: PhaseState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<PhaseState>,
    pub events: Vec<EventHit>,
    pub terminated_by: Option<String>,
    pub direction: Direction,
}

impl Trajectory {
    pub fn final_state(&self) -> PhaseState {
        *self.states.last().expect("trajectory holds its initial state")
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("trajectory holds its initial time")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StmTrajectory {
    pub base: Trajectory,
    /// Φ(t, 0) at every stored time.
    pub stm: Vec<Matrix4<f64>>,
    /// Φ at every event in `base.events`.
    pub event_stm: Vec<Matrix4<f64>>,
}

/// Hamilton's equations, optionally time-reversed.
pub(crate) struct Flow {
    pub params: SystemParams,
    pub sign: f64,
}

impl Rhs<4> for Flow {
    #[inline]
    fn eval(&self, y: &[f64; 4], dy: &mut [f64; 4]) {
        let f = rates(&self.params, y);
        for i in 0..4 {
            dy[i] = self.sign * f[i];
        }
    }
}

/// Flow plus the variational equations dΦ/dt = A(x(t)) Φ (Φ row-major).
pub(crate) struct Variational {
    pub params: SystemParams,
    pub sign: f64,
}

impl Rhs<20> for Variational {
    #[inline]
    fn eval(&self, y: &[f64; 20], dy: &mut [f64; 20]) {
        let f = rates(&self.params, y);
        for i in 0..4 {
            dy[i] = self.sign * f[i];
        }
        let a = jacobian_at(&self.params, y[0], y[1]);
        for r in 0..4 {
            for c in 0..4 {
                let mut acc = 0.0;
                for k in 0..4 {
                    acc += a[(r, k)] * y[4 + 4 * k + c];
                }
                dy[4 + 4 * r + c] = self.sign * acc;
            }
        }
    }
}

/// Raw result of a run over an `N`-dimensional augmented state.
pub(crate) struct RawRun<const N: usize> {
    pub times: Vec<f64>,
    pub states: Vec<[f64; N]>,
    pub events: Vec<(usize, f64, [f64; N])>,
    pub terminated_by: Option<usize>,
}

struct Bracket {
    t: f64,
    g: f64,
}

fn crossed(dir: Crossing, g0: f64, g1: f64) -> bool {
    let rising = g0 < 0.0 && g1 >= 0.0;
    let falling = g0 > 0.0 && g1 <= 0.0;
    match dir {
        Crossing::Rising => rising,
        Crossing::Falling => falling,
        Crossing::Any => rising || falling,
    }
}

fn guard_value<const N: usize>(ev: &EventSpec, t: f64, y: &[f64; N]) -> f64 {
    (ev.guard)(t, &PhaseState::from_slice(&y[..4]))
}

/// Root of an event guard inside the last accepted step.
fn locate<R: Rhs<N>, const N: usize>(stepper: &mut Dop853<'_, R, N>, ev: &EventSpec, lo: Bracket, hi: Bracket, tol: f64) -> (f64, [f64; N]) {
    let t0 = stepper.t_old;
    let h = stepper.h_old;
    let (mut a, mut ga) = ((lo.t - t0) / h, lo.g);
    let (mut b, mut gb) = ((hi.t - t0) / h, hi.g);
    if gb == 0.0 {
        return (hi.t, stepper.interpolate(b));
    }
    let mut side = 0i8;
    let mut best = (b, gb.abs());
    for _ in 0..200 {
        let mut c = (a * gb - b * ga) / (gb - ga);
        if !(c > a && c < b) {
            c = 0.5 * (a + b);
        }
        let y = stepper.interpolate(c);
        let gc = guard_value(ev, t0 + c * h, &y);
        if gc.abs() < best.1 {
            best = (c, gc.abs());
        }
        if gc.abs() <= tol || (b - a) * h.abs() <= 1e-15 * (1.0 + t0.abs()) {
            return (t0 + c * h, y);
        }
        if (gc > 0.0) == (gb > 0.0) {
            b = c;
            gb = gc;
            if side == 1 {
                ga *= 0.5;
            }
            side = 1;
        } else {
            a = c;
            ga = gc;
            if side == -1 {
                gb *= 0.5;
            }
            side = -1;
        }
    }
    (t0 + best.0 * h, stepper.interpolate(best.0))
}

pub(crate) fn run<R: Rhs<N>, const N: usize>(rhs: &R, y0: [f64; N], settings: &IntegrationSettings, events: &[EventSpec]) -> Result<RawRun<N>> {
    settings.validate()?;
    let t_end = settings.t_max;
    let mut out = RawRun {
        times: vec![0.0],
        states: vec![y0],
        events: Vec::new(),
        terminated_by: None,
    };
    let samples: &[f64] = match &settings.output {
        Output::At(ts) => ts,
        _ => &[],
    };
    let mut next_sample = 0usize;
    if let Output::At(_) = settings.output {
        out.times.clear();
        out.states.clear();
        while next_sample < samples.len() && samples[next_sample] <= 0.0 {
            out.times.push(samples[next_sample].max(0.0));
            out.states.push(y0);
            next_sample += 1;
        }
    }
    if t_end == 0.0 {
        if !y0.iter().all(|c| c.is_finite()) {
            return Err(Error::NonFiniteState { t: 0.0 });
        }
        return Ok(out);
    }

    let mut stepper = Dop853::new(rhs, y0, settings.rel_tol, settings.abs_tol, settings.max_step, t_end)?;
    let mut g_prev: Vec<f64> = events.iter().map(|e| guard_value(e, 0.0, &y0)).collect();
    let mut n_steps = 0usize;

    while stepper.t < t_end {
        n_steps += 1;
        if n_steps > settings.max_steps {
            return Err(Error::NoConvergence {
                what: "integration step budget",
                iterations: settings.max_steps,
                residual: stepper.t,
            });
        }
        stepper.step(t_end)?;
        let (t0, t1) = (stepper.t_old, stepper.t);
        let y1 = stepper.y;

        // events bracketed in this step, earliest first
        let mut hits: Vec<(usize, f64, [f64; N])> = Vec::new();
        let mut g_new = Vec::with_capacity(events.len());
        for (k, ev) in events.iter().enumerate() {
            let g1 = guard_value(ev, t1, &y1);
            g_new.push(g1);
            if crossed(ev.direction, g_prev[k], g1) {
                let (te, ye) = locate(&mut stepper, ev, Bracket { t: t0, g: g_prev[k] }, Bracket { t: t1, g: g1 }, settings.event_tol);
                hits.push((k, te, ye));
            }
        }
        hits.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        let terminal = hits.iter().position(|(k, _, _)| events[*k].terminal);
        let t_stop = terminal.map(|i| hits[i].1).unwrap_or(t1);

        while next_sample < samples.len() && samples[next_sample] <= t_stop {
            let ts = samples[next_sample];
            let y = if ts == t1 { y1 } else { stepper.interpolate((ts - t0) / stepper.h_old) };
            out.times.push(ts);
            out.states.push(y);
            next_sample += 1;
        }

        if let Some(i) = terminal {
            hits.truncate(i + 1);
            let (k, te, ye) = hits[i];
            out.events.extend(hits.iter().copied());
            out.terminated_by = Some(k);
            if !matches!(settings.output, Output::At(_)) && te > *out.times.last().unwrap() {
                out.times.push(te);
                out.states.push(ye);
            }
            return Ok(out);
        }
        out.events.extend(hits);
        if matches!(settings.output, Output::Steps) {
            out.times.push(t1);
            out.states.push(y1);
        }
        g_prev = g_new;
    }
    if matches!(settings.output, Output::Ends) {
        out.times.push(stepper.t);
        out.states.push(stepper.y);
    }
    Ok(out)
}

fn to_trajectory<const N: usize>(raw: &RawRun<N>, events: &[EventSpec], direction: Direction) -> Trajectory {
    Trajectory {
        times: raw.times.clone(),
        states: raw.states.iter().map(|y| PhaseState::from_slice(&y[..4])).collect(),
        events: raw
            .events
            .iter()
            .map(|(k, t, y)| EventHit {
                id: events[*k].id.clone(),
                time: *t,
                state: PhaseState::from_slice(&y[..4]),
            })
            .collect(),
        terminated_by: raw.terminated_by.map(|k| events[k].id.clone()),
        direction,
    }
}

pub fn integrate(params: &SystemParams, s0: &PhaseState, settings: &IntegrationSettings, events: &[EventSpec]) -> Result<Trajectory> {
    if !s0.is_finite() {
        return Err(Error::NonFiniteState { t: 0.0 });
    }
    let flow = Flow {
        params: *params,
        sign: settings.direction.sign(),
    };
    let raw = run(&flow, s0.to_array(), settings, events)?;
    Ok(to_trajectory(&raw, events, settings.direction))
}

fn stm_of(y: &[f64; 20]) -> Matrix4<f64> {
    Matrix4::from_row_slice(&y[4..])
}

pub fn integrate_variational(params: &SystemParams, s0: &PhaseState, settings: &IntegrationSettings, events: &[EventSpec]) -> Result<StmTrajectory> {
    if !s0.is_finite() {
        return Err(Error::NonFiniteState { t: 0.0 });
    }
    let sys = Variational {
        params: *params,
        sign: settings.direction.sign(),
    };
    let mut y0 = [0.0; 20];
    y0[..4].copy_from_slice(&s0.to_array());
    for i in 0..4 {
        y0[4 + 5 * i] = 1.0;
    }
    let raw = run(&sys, y0, settings, events)?;
    Ok(StmTrajectory {
        base: to_trajectory(&raw, events, settings.direction),
        stm: raw.states.iter().map(stm_of).collect(),
        event_stm: raw.events.iter().map(|(_, _, y)| stm_of(y)).collect(),
    })
}

/// Flow map φ(t; s0) without events.
pub fn flow_map(params: &SystemParams, s0: &PhaseState, t: f64, settings: &IntegrationSettings) -> Result<PhaseState> {
    let s = IntegrationSettings {
        t_max: t.abs(),
        direction: if t >= 0.0 { Direction::Forward } else { Direction::Backward },
        output: Output::Ends,
        ..settings.clone()
    };
    Ok(integrate(params, s0, &s, &[])?.final_state())
}

/// The standard symplectic form J = [[0, I], [−I, 0]].
pub fn symplectic_form() -> Matrix4<f64> {
    let mut j = Matrix4::zeros();
    j[(0, 2)] = 1.0;
    j[(1, 3)] = 1.0;
    j[(2, 0)] = -1.0;
    j[(3, 1)] = -1.0;
    j
}
