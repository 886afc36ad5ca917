//! Section sampling, escape labels and forward Lagrangian descriptors.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{rates, PhaseState, SystemParams};
use crate::error::{Error, Result};
use crate::integrator::{self, Direction, EventSpec, IntegrationSettings, Output, Rhs};
use crate::manifolds::SectionConfig;

pub const DEFAULT_HORIZON: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectionSample {
    pub x: f64,
    pub p_x: f64,
    pub p_y: f64,
    pub section: SectionConfig,
}

impl SectionSample {
    pub fn new(params: &SystemParams, section: &SectionConfig, x: f64, p_x: f64) -> Result<Self> {
        Ok(Self {
            x,
            p_x,
            p_y: momentum_from_energy(params, x, p_x, section)?,
            section: *section,
        })
    }

    pub fn state(&self) -> PhaseState {
        PhaseState::new(self.x, self.section.y_c, self.p_x, self.p_y)
    }

    pub fn point(&self) -> [f64; 2] {
        [self.x, self.p_x]
    }
}

pub fn momentum_from_energy(params: &SystemParams, x: f64, p_x: f64, section: &SectionConfig) -> Result<f64> {
    section.momentum_y(params, x, p_x)
}

/// Regular `nx × npx` grid over the energy boundary's bounding box padded by
/// one cell; points outside the boundary are dropped. Row-major in `x`.
pub fn sample_grid(params: &SystemParams, section: &SectionConfig, nx: usize, npx: usize) -> Result<Vec<SectionSample>> {
    if nx < 2 || npx < 2 {
        return Err(Error::InvalidParameter(format!("grid must be at least 2×2, got {nx}×{npx}")));
    }
    let xm = section.x_extent(params)?;
    let pm = section.px_extent(params)?;
    let (xs, _) = grid_axis(xm, nx);
    let (ps, _) = grid_axis(pm, npx);
    let mut out = Vec::with_capacity(nx * npx);
    for &x in &xs {
        for &p in &ps {
            if let Ok(s) = SectionSample::new(params, section, x, p) {
                out.push(s);
            }
        }
    }
    Ok(out)
}

/// Nodes of `[−half, half]` widened by one cell on each side, and their spacing.
pub(crate) fn grid_axis(half: f64, n: usize) -> (Vec<f64>, f64) {
    let cell = 2.0 * half / (n - 1) as f64;
    let (lo, hi) = (-half - cell, half + cell);
    let nodes = (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect();
    (nodes, (hi - lo) / (n - 1) as f64)
}

/// Escape fate of a section point within the horizon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Channel {
    NonReactive = 0,
    /// `x = −1.25`
    Channel1 = 1,
    /// `x = +1.25`
    Channel2 = 2,
    /// `y = +1.25`
    Channel3 = 3,
}

impl Channel {
    pub const ALL: [Channel; 4] = [Channel::NonReactive, Channel::Channel1, Channel::Channel2, Channel::Channel3];

    pub fn index(self) -> u8 {
        self as u8
    }

    pub fn from_index(k: u8) -> Option<Self> {
        Channel::ALL.get(k as usize).copied()
    }

    /// Swaps the left and right channels.
    pub fn mirrored(self) -> Self {
        match self {
            Channel::Channel1 => Channel::Channel2,
            Channel::Channel2 => Channel::Channel1,
            c => c,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EscapeLabel {
    pub value: Channel,
    pub escape_time: Option<f64>,
}

fn channel_of(event_index: Option<usize>) -> Channel {
    match event_index {
        Some(0) => Channel::Channel1,
        Some(1) => Channel::Channel2,
        Some(2) => Channel::Channel3,
        _ => Channel::NonReactive,
    }
}

fn forward(settings: &IntegrationSettings, horizon: f64) -> IntegrationSettings {
    IntegrationSettings {
        t_max: horizon,
        direction: Direction::Forward,
        output: Output::Ends,
        ..settings.clone()
    }
}

/// Integrates forward until the first escape line or the horizon.
pub fn label_by_escape(params: &SystemParams, state: &PhaseState, horizon: f64, settings: &IntegrationSettings) -> Result<EscapeLabel> {
    if !state.is_finite() {
        return Err(Error::NonFiniteState { t: 0.0 });
    }
    let flow = integrator::Flow { params: *params, sign: 1.0 };
    let run = integrator::run(&flow, state.to_array(), &forward(settings, horizon), &EventSpec::escape_lines())?;
    let value = channel_of(run.terminated_by);
    Ok(EscapeLabel {
        value,
        escape_time: (value != Channel::NonReactive).then(|| *run.times.last().unwrap()),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LdValue {
    pub value: f64,
    pub tau_used: f64,
}

/// Flow with the descriptor integrand `Σ |f_k|^p` as fifth component.
struct LdFlow {
    params: SystemParams,
    p: f64,
}

impl Rhs<5> for LdFlow {
    #[inline]
    fn eval(&self, y: &[f64; 5], dy: &mut [f64; 5]) {
        let f = rates(&self.params, y);
        dy[..4].copy_from_slice(&f);
        dy[4] = if self.p == 0.5 {
            f.iter().map(|v| v.abs().sqrt()).sum()
        } else {
            f.iter().map(|v| v.abs().powf(self.p)).sum()
        };
    }
}

/// Forward descriptor `∫₀^τ Σ_k |f_k|^p dt`, truncated at the first escape.
pub fn compute_forward_ld(params: &SystemParams, state: &PhaseState, tau: f64, p_exponent: f64, settings: &IntegrationSettings) -> Result<LdValue> {
    if !(p_exponent > 0.0 && p_exponent <= 1.0) {
        return Err(Error::InvalidParameter(format!("LD exponent must lie in (0, 1], got {p_exponent}")));
    }
    if !state.is_finite() {
        return Err(Error::NonFiniteState { t: 0.0 });
    }
    if tau == 0.0 {
        return Ok(LdValue { value: 0.0, tau_used: 0.0 });
    }
    let flow = LdFlow {
        params: *params,
        p: p_exponent,
    };
    let s = state.to_array();
    let y0 = [s[0], s[1], s[2], s[3], 0.0];
    // |f_k|^p has cusps where a component changes sign and the embedded error estimate undershoots there
    let tight = IntegrationSettings {
        rel_tol: 0.1 * settings.rel_tol,
        abs_tol: 0.1 * settings.abs_tol,
        ..forward(settings, tau)
    };
    let run = integrator::run(&flow, y0, &tight, &EventSpec::escape_lines())?;
    Ok(LdValue {
        value: run.states.last().unwrap()[4],
        tau_used: *run.times.last().unwrap(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    pub samples: Vec<SectionSample>,
    pub labels: Vec<EscapeLabel>,
    pub features: Vec<Vec<f64>>,
    pub feature_names: Vec<String>,
    pub horizon: f64,
    pub seed: u64,
}

impl LabeledDataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn label_indices(&self) -> Vec<u8> {
        self.labels.iter().map(|l| l.value.index()).collect()
    }

    pub fn has_ld(&self) -> bool {
        self.feature_names.len() == 3
    }

    pub fn class_counts(&self) -> [usize; 4] {
        let mut c = [0; 4];
        for l in &self.labels {
            c[l.value.index() as usize] += 1;
        }
        c
    }

    /// Appends samples (labels and features computed by the caller).
    pub fn extend(&mut self, samples: Vec<SectionSample>, labels: Vec<EscapeLabel>, features: Vec<Vec<f64>>) {
        self.samples.extend(samples);
        self.labels.extend(labels);
        self.features.extend(features);
    }
}

/// How points are labeled and featurized; shared by all pipelines.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelingSettings {
    pub horizon: f64,
    pub ld_tau: f64,
    pub ld_exponent: f64,
    pub integration: IntegrationSettings,
}

impl Default for LabelingSettings {
    fn default() -> Self {
        Self {
            horizon: DEFAULT_HORIZON,
            ld_tau: DEFAULT_HORIZON,
            ld_exponent: 0.5,
            integration: IntegrationSettings::default(),
        }
    }
}

pub fn feature_names(with_ld: bool) -> Vec<String> {
    let mut names = vec!["x".to_string(), "p_x".to_string()];
    if with_ld {
        names.push("ld".to_string());
    }
    names
}

/// Feature row of a sample: `(x, p_x[, LD])`.
pub fn featurize(params: &SystemParams, sample: &SectionSample, with_ld: bool, settings: &LabelingSettings) -> Result<Vec<f64>> {
    let mut row = vec![sample.x, sample.p_x];
    if with_ld {
        row.push(compute_forward_ld(params, &sample.state(), settings.ld_tau, settings.ld_exponent, &settings.integration)?.value);
    }
    Ok(row)
}

/// Labels and features for a batch, in input order.
pub fn label_samples(
    params: &SystemParams,
    samples: &[SectionSample],
    with_ld: bool,
    settings: &LabelingSettings,
) -> Result<(Vec<EscapeLabel>, Vec<Vec<f64>>)> {
    let rows = samples
        .par_iter()
        .map(|s| {
            let label = label_by_escape(params, &s.state(), settings.horizon, &settings.integration)?;
            Ok((label, featurize(params, s, with_ld, settings)?))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(rows.into_iter().unzip())
}

pub fn build_dataset(
    params: &SystemParams,
    section: &SectionConfig,
    nx: usize,
    npx: usize,
    with_ld: bool,
    seed: u64,
    settings: &LabelingSettings,
) -> Result<LabeledDataset> {
    let samples = sample_grid(params, section, nx, npx)?;
    let (labels, features) = label_samples(params, &samples, with_ld, settings)?;
    Ok(LabeledDataset {
        samples,
        labels,
        features,
        feature_names: feature_names(with_ld),
        horizon: settings.horizon,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::hamiltonian_energy;
    use crate::integrator::flow_map;

    fn unit() -> SystemParams {
        SystemParams::default()
    }

    fn sec() -> SectionConfig {
        SectionConfig::new(0.0, 0.17)
    }

    fn label(px: f64) -> EscapeLabel {
        let s = SectionSample::new(&unit(), &sec(), 0.0, px).unwrap();
        label_by_escape(&unit(), &s.state(), DEFAULT_HORIZON, &IntegrationSettings::default()).unwrap()
    }

    #[test]
    fn momentum_examples() {
        let p = momentum_from_energy(&unit(), 0.0, 0.0, &sec()).unwrap();
        assert!((p - 0.34f64.sqrt()).abs() < 1e-15);
        let p = momentum_from_energy(&unit(), 0.0, 0.516, &sec()).unwrap();
        assert!((p - 0.2715585).abs() < 1e-7);
        assert!(matches!(
            momentum_from_energy(&unit(), 0.0, 0.6, &sec()),
            Err(Error::OutsideEnergyBoundary { .. })
        ));
    }

    #[test]
    fn grid_keeps_only_admissible_points() {
        let g = sample_grid(&unit(), &sec(), 100, 100).unwrap();
        assert!(g.len() < 10_000 && g.len() > 7000);
        for s in &g {
            assert!(s.p_y >= 0.0);
            assert!((hamiltonian_energy(&unit(), &s.state()) - 0.17).abs() < 1e-12);
        }
        assert!(sample_grid(&unit(), &sec(), 2, 2).is_ok());
        assert!(sample_grid(&unit(), &sec(), 1, 5).is_err());
    }

    #[test]
    fn robust_escape_examples() {
        let l = label(0.516);
        assert_eq!(l.value, Channel::Channel1);
        assert!((9.0..10.0).contains(&l.escape_time.unwrap()));
        assert_eq!(label(0.07).value, Channel::Channel3);
    }

    #[test]
    fn chaotic_examples_stay_within_horizon() {
        for px in [0.526, 0.08] {
            let l = label(px);
            assert_eq!(l.value, Channel::NonReactive, "{px}");
            assert_eq!(l.escape_time, None);
        }
    }

    #[test]
    fn labels_mirror_exactly() {
        let g = sample_grid(&unit(), &sec(), 12, 12).unwrap();
        for s in &g {
            let m = SectionSample::new(&unit(), &sec(), -s.x, -s.p_x).unwrap();
            let a = label_by_escape(&unit(), &s.state(), 30.0, &IntegrationSettings::default()).unwrap();
            let b = label_by_escape(&unit(), &m.state(), 30.0, &IntegrationSettings::default()).unwrap();
            assert_eq!(a.value.mirrored(), b.value);
        }
    }

    #[test]
    fn ld_at_equilibrium_is_zero() {
        let top = PhaseState::new(0.0, 1.0, 0.0, 0.0);
        let v = compute_forward_ld(&unit(), &top, 30.0, 0.5, &IntegrationSettings::default()).unwrap();
        assert_eq!(v.value, 0.0);
        let s = SectionSample::new(&unit(), &sec(), 0.1, 0.2).unwrap();
        assert_eq!(
            compute_forward_ld(&unit(), &s.state(), 0.0, 0.5, &IntegrationSettings::default())
                .unwrap()
                .value,
            0.0
        );
        assert!(compute_forward_ld(&unit(), &s.state(), 1.0, 1.5, &IntegrationSettings::default()).is_err());
    }

    #[test]
    fn ld_is_additive() {
        let settings = IntegrationSettings::default();
        let s0 = SectionSample::new(&unit(), &sec(), 0.05, 0.1).unwrap().state();
        let whole = compute_forward_ld(&unit(), &s0, 5.0, 0.5, &settings).unwrap();
        assert_eq!(whole.tau_used, 5.0);
        let a = compute_forward_ld(&unit(), &s0, 2.0, 0.5, &settings).unwrap();
        let mid = flow_map(&unit(), &s0, 2.0, &settings).unwrap();
        let b = compute_forward_ld(&unit(), &mid, 3.0, 0.5, &settings).unwrap();
        assert!((whole.value - a.value - b.value).abs() < 1e-8);
    }

    #[test]
    fn dataset_columns() {
        let settings = LabelingSettings::default();
        let plain = build_dataset(&unit(), &sec(), 6, 6, false, 7, &settings).unwrap();
        assert!(plain.features.iter().all(|r| r.len() == 2));
        let ld = build_dataset(&unit(), &sec(), 6, 6, true, 7, &settings).unwrap();
        assert!(ld.features.iter().all(|r| r.len() == 3));
        assert_eq!(ld.feature_names.len(), 3);
        assert_eq!(plain.labels, ld.labels);
    }
}
