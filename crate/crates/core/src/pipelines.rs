//! End-to-end learning experiments on a section: fixed-grid training, active
//! learning, LD-feature training, and evaluation against reactive islands.

use std::collections::{BTreeMap, HashMap};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datasets::{build_dataset, grid_axis, label_samples, sample_grid, Channel, LabeledDataset, LabelingSettings, SectionSample};
use crate::dynamics::{SaddleId, SystemParams};
use crate::error::{Error, Result};
use crate::manifolds::{compute_island, ManifoldSettings, ReactiveIsland, SectionConfig};
use crate::periodic::OrbitSettings;
use crate::svc::{grid_search, train_multiclass, CvReport, RbfKernelParams, SmoSettings, SvcModel};

pub const FIXED_C_GRID: [f64; 4] = [1e2, 1e3, 1e4, 1e5];
pub const FIXED_GAMMA_GRID: [f64; 4] = [10.0, 1e2, 1e3, 1e4];
pub const ACTIVE_C_GRID: [f64; 3] = [10.0, 1e2, 1e3];
pub const ACTIVE_GAMMA_GRID: [f64; 3] = [1.0, 10.0, 1e2];

/// Retries per proposal before giving up on a support vector's neighbourhood.
pub const PROPOSAL_RETRIES: usize = 100;

/// Island membership label of a section point: channel `k` inside island `k`, else 0.
pub fn island_label(islands: &[ReactiveIsland], p: [f64; 2]) -> u8 {
    islands.iter().find(|i| i.contains(p)).map_or(0, |i| i.channel)
}

/// First-order islands of all three saddles on one section.
pub fn compute_islands(params: &SystemParams, section: &SectionConfig, orbit: &OrbitSettings, manifold: &ManifoldSettings) -> Result<Vec<ReactiveIsland>> {
    SaddleId::ALL
        .par_iter()
        .map(|&s| compute_island(params, s, section, orbit, manifold).map(|c| c.island))
        .collect()
}

/// How a trained classifier turns a section point into features.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum FeatureMap {
    Position,
    /// `(x, p_x, LD)` with the forward descriptor over `tau` and exponent `p`.
    PositionLd {
        tau: f64,
        exponent: f64,
    },
}

impl FeatureMap {
    pub fn with_ld(&self) -> bool {
        matches!(self, FeatureMap::PositionLd { .. })
    }
}

/// A classifier bound to the section and feature map it was trained on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectionModel {
    pub svc: SvcModel,
    pub section: SectionConfig,
    pub features: FeatureMap,
}

impl SectionModel {
    /// Predicted channel indices; every point must lie inside the energy boundary.
    pub fn predict_points(&self, params: &SystemParams, points: &[[f64; 2]], labeling: &LabelingSettings) -> Result<Vec<u8>> {
        let settings = match self.features {
            FeatureMap::Position => labeling.clone(),
            FeatureMap::PositionLd { tau, exponent } => LabelingSettings {
                ld_tau: tau,
                ld_exponent: exponent,
                ..labeling.clone()
            },
        };
        points
            .par_iter()
            .map(|p| {
                let s = SectionSample::new(params, &self.section, p[0], p[1])?;
                let row = crate::datasets::featurize(params, &s, self.features.with_ld(), &settings)?;
                Ok(self.svc.predict(&row))
            })
            .collect()
    }
}

/// Points drawn uniformly inside the energy boundary and labeled by integration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestSet {
    pub points: Vec<[f64; 2]>,
    pub labels: Vec<u8>,
}

pub fn random_section_points(params: &SystemParams, section: &SectionConfig, n: usize, rng: &mut impl Rng) -> Result<Vec<[f64; 2]>> {
    let (xm, pm) = (section.x_extent(params)?, section.px_extent(params)?);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let p = [rng.gen_range(-xm..=xm), rng.gen_range(-pm..=pm)];
        if section.inside(params, p[0], p[1]) {
            out.push(p);
        }
    }
    Ok(out)
}

pub fn labeled_test_set(params: &SystemParams, section: &SectionConfig, n: usize, seed: u64, labeling: &LabelingSettings) -> Result<TestSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = random_section_points(params, section, n, &mut rng)?;
    let samples = points
        .iter()
        .map(|p| SectionSample::new(params, section, p[0], p[1]))
        .collect::<Result<Vec<_>>>()?;
    let (labels, _) = label_samples(params, &samples, false, labeling)?;
    Ok(TestSet {
        points,
        labels: labels.iter().map(|l| l.value.index()).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvaluationSettings {
    /// Dense grid is `resolution × resolution` over the padded bounding box.
    pub resolution: usize,
    pub n_test: usize,
    pub test_seed: u64,
}

impl Default for EvaluationSettings {
    fn default() -> Self {
        Self {
            resolution: 200,
            n_test: 2000,
            test_seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    /// Accuracy against trajectory labels of the held-out random set.
    pub test_accuracy: f64,
    pub per_class_accuracy: BTreeMap<u8, f64>,
    /// Fraction of dense-grid points whose prediction matches island membership.
    pub boundary_agreement: f64,
    /// Rows are true trajectory labels of the held-out set, columns predictions.
    pub confusion: [[usize; 4]; 4],
    pub n_labeled_trajectories: usize,
    pub n_test: usize,
    pub n_grid: usize,
}

fn score(predicted: &[u8], truth: &[u8]) -> (f64, BTreeMap<u8, f64>, [[usize; 4]; 4]) {
    let mut confusion = [[0usize; 4]; 4];
    for (p, t) in predicted.iter().zip(truth) {
        confusion[*t as usize][*p as usize] += 1;
    }
    let hits: usize = (0..4).map(|k| confusion[k][k]).sum();
    let per_class = (0..4u8)
        .filter_map(|k| {
            let row: usize = confusion[k as usize].iter().sum();
            (row > 0).then(|| (k, confusion[k as usize][k as usize] as f64 / row as f64))
        })
        .collect();
    (hits as f64 / truth.len().max(1) as f64, per_class, confusion)
}

/// Dense grid points of the section with their island-membership labels.
pub fn island_grid(params: &SystemParams, section: &SectionConfig, islands: &[ReactiveIsland], resolution: usize) -> Result<(Vec<[f64; 2]>, Vec<u8>)> {
    let points: Vec<[f64; 2]> = sample_grid(params, section, resolution, resolution)?.iter().map(|s| s.point()).collect();
    let labels = points.par_iter().map(|p| island_label(islands, *p)).collect();
    Ok((points, labels))
}

/// Scores a model against island membership on a dense grid and against a held-out trajectory-labeled set.
pub fn evaluate_against_islands(
    params: &SystemParams,
    model: &SectionModel,
    islands: &[ReactiveIsland],
    test: &TestSet,
    settings: &EvaluationSettings,
    labeling: &LabelingSettings,
) -> Result<EvaluationReport> {
    if test.points.is_empty() {
        return Err(Error::InvalidParameter("empty held-out set".into()));
    }
    let section = &model.section;
    let (grid, truth) = island_grid(params, section, islands, settings.resolution)?;
    let on_grid = model.predict_points(params, &grid, labeling)?;
    let agree = on_grid.iter().zip(&truth).filter(|(a, b)| a == b).count();
    let predicted = model.predict_points(params, &test.points, labeling)?;
    let (test_accuracy, per_class_accuracy, confusion) = score(&predicted, &test.labels);
    Ok(EvaluationReport {
        test_accuracy,
        per_class_accuracy,
        boundary_agreement: agree as f64 / grid.len().max(1) as f64,
        confusion,
        n_labeled_trajectories: 0,
        n_test: test.points.len(),
        n_grid: grid.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    /// Training grid `(nx, npx)`.
    pub grid: (usize, usize),
    pub c_grid: Vec<f64>,
    pub gamma_grid: Vec<f64>,
    pub n_folds: usize,
    pub seed: u64,
    /// Standardize features before training.
    pub scale: bool,
    pub smo: SmoSettings,
    #[serde(skip)]
    pub labeling: LabelingSettings,
    pub evaluation: EvaluationSettings,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            grid: (100, 100),
            c_grid: FIXED_C_GRID.to_vec(),
            gamma_grid: FIXED_GAMMA_GRID.to_vec(),
            n_folds: 5,
            seed: 0,
            scale: false,
            smo: SmoSettings::default(),
            labeling: LabelingSettings::default(),
            evaluation: EvaluationSettings::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainingOutcome {
    pub model: SectionModel,
    pub cv: CvReport,
    pub report: EvaluationReport,
    pub dataset: LabeledDataset,
}

fn check_energy(params: &SystemParams, section: &SectionConfig) -> Result<()> {
    // every channel must be open
    let saddle = SaddleId::ALL
        .iter()
        .map(|&s| crate::dynamics::saddle_energy(params, s))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);
    if section.energy <= saddle {
        return Err(Error::EnergyBelowSaddle {
            energy: section.energy,
            saddle_energy: saddle,
        });
    }
    section.x_extent(params).map(|_| ())
}

/// Grid search, final fit and evaluation on an already labeled dataset.
pub fn train_on_dataset(
    params: &SystemParams,
    section: &SectionConfig,
    dataset: LabeledDataset,
    features: FeatureMap,
    cfg: &TrainingConfig,
    islands: &[ReactiveIsland],
) -> Result<TrainingOutcome> {
    if features.with_ld() != dataset.has_ld() {
        return Err(Error::DimensionMismatch {
            expected: if features.with_ld() { 3 } else { 2 },
            found: dataset.feature_names.len(),
        });
    }
    let labels = dataset.label_indices();
    let cv = grid_search(
        &dataset.features,
        &labels,
        &cfg.c_grid,
        &cfg.gamma_grid,
        cfg.n_folds,
        cfg.seed,
        cfg.scale,
        &cfg.smo,
    )?;
    log::info!("best C = {:e}, γ = {:e}, CV accuracy {:.4}", cv.best.c, cv.best.gamma, cv.best_accuracy);
    let svc = train_multiclass(&cv.best, &dataset.features, &labels, cfg.scale, &cfg.smo)?;
    let model = SectionModel {
        svc,
        section: *section,
        features,
    };
    let test = labeled_test_set(params, section, cfg.evaluation.n_test, cfg.evaluation.test_seed, &cfg.labeling)?;
    let mut report = evaluate_against_islands(params, &model, islands, &test, &cfg.evaluation, &cfg.labeling)?;
    report.n_labeled_trajectories = dataset.len();
    Ok(TrainingOutcome { model, cv, report, dataset })
}

/// Grid-labeled `(x, p_x)` dataset, grid-searched RBF classifier, evaluation.
pub fn train_fixed(params: &SystemParams, section: &SectionConfig, cfg: &TrainingConfig, islands: &[ReactiveIsland]) -> Result<TrainingOutcome> {
    check_energy(params, section)?;
    let dataset = build_dataset(params, section, cfg.grid.0, cfg.grid.1, false, cfg.seed, &cfg.labeling)?;
    train_on_dataset(params, section, dataset, FeatureMap::Position, cfg, islands)
}

/// As [`train_fixed`] with the Lagrangian descriptor as a third, standardized feature.
pub fn train_with_ld(params: &SystemParams, section: &SectionConfig, cfg: &TrainingConfig, islands: &[ReactiveIsland]) -> Result<TrainingOutcome> {
    check_energy(params, section)?;
    let cfg = TrainingConfig { scale: true, ..cfg.clone() };
    let dataset = build_dataset(params, section, cfg.grid.0, cfg.grid.1, true, cfg.seed, &cfg.labeling)?;
    let features = FeatureMap::PositionLd {
        tau: cfg.labeling.ld_tau,
        exponent: cfg.labeling.ld_exponent,
    };
    train_on_dataset(params, section, dataset, features, &cfg, islands)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActiveLearnConfig {
    pub initial_grid: (usize, usize),
    pub n_sv_per_iter: usize,
    pub pts_per_sv: usize,
    pub proposal_sigma: f64,
    pub target_accuracy: f64,
    pub max_iters: usize,
    pub seed: u64,
    pub c_grid: Vec<f64>,
    pub gamma_grid: Vec<f64>,
    pub n_folds: usize,
    pub smo: SmoSettings,
    #[serde(skip)]
    pub labeling: LabelingSettings,
    pub evaluation: EvaluationSettings,
}

impl Default for ActiveLearnConfig {
    fn default() -> Self {
        Self {
            initial_grid: (30, 30),
            n_sv_per_iter: 10,
            pts_per_sv: 1,
            proposal_sigma: 1.0,
            target_accuracy: 0.99,
            max_iters: 200,
            seed: 0,
            c_grid: ACTIVE_C_GRID.to_vec(),
            gamma_grid: ACTIVE_GAMMA_GRID.to_vec(),
            n_folds: 5,
            smo: SmoSettings::default(),
            labeling: LabelingSettings::default(),
            evaluation: EvaluationSettings::default(),
        }
    }
}

impl ActiveLearnConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.into()));
        if !(self.target_accuracy > 0.0 && self.target_accuracy <= 1.0) {
            return bad("target accuracy must lie in (0, 1]");
        }
        if self.n_sv_per_iter == 0 || self.pts_per_sv == 0 || self.max_iters == 0 {
            return bad("active-learning counts must be positive");
        }
        if !(self.proposal_sigma > 0.0 && self.proposal_sigma.is_finite()) {
            return bad("proposal σ must be positive");
        }
        if self.initial_grid.0 < 2 || self.initial_grid.1 < 2 {
            return bad("initial grid must be at least 2×2");
        }
        Ok(())
    }
}

/// One round of active learning, recorded after its grid search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActiveIteration {
    pub iteration: usize,
    pub n_labeled: usize,
    pub cv_accuracy: f64,
    pub best: RbfKernelParams,
    /// Accuracy on the held-out trajectory set.
    pub test_accuracy: f64,
    pub n_support: usize,
}

#[derive(Debug, Clone)]
pub struct ActiveLearnOutcome {
    pub model: SectionModel,
    pub history: Vec<ActiveIteration>,
    pub report: EvaluationReport,
    pub dataset: LabeledDataset,
    pub reached_target: bool,
}

/// Gaussian proposals around support vectors, resampled until inside the energy boundary.
pub fn propose_near(
    params: &SystemParams,
    section: &SectionConfig,
    centers: &[Vec<f64>],
    per_center: usize,
    sigma: f64,
    rng: &mut impl Rng,
) -> Result<Vec<[f64; 2]>> {
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let mut out = Vec::with_capacity(centers.len() * per_center);
    for c in centers {
        for _ in 0..per_center {
            let p = (0..PROPOSAL_RETRIES)
                .map(|_| [c[0] + normal.sample(rng), c[1] + normal.sample(rng)])
                .find(|p| section.inside(params, p[0], p[1]))
                .ok_or(Error::ProposalExhausted { tries: PROPOSAL_RETRIES })?;
            out.push(p);
        }
    }
    Ok(out)
}

pub fn active_learning_loop(params: &SystemParams, section: &SectionConfig, cfg: &ActiveLearnConfig, islands: &[ReactiveIsland]) -> Result<ActiveLearnOutcome> {
    cfg.validate()?;
    check_energy(params, section)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut dataset = build_dataset(params, section, cfg.initial_grid.0, cfg.initial_grid.1, false, cfg.seed, &cfg.labeling)?;
    let test = labeled_test_set(params, section, cfg.evaluation.n_test, cfg.evaluation.test_seed, &cfg.labeling)?;
    let mut history = Vec::new();
    let mut iteration = 0;
    let (model, reached_target) = loop {
        let labels = dataset.label_indices();
        let cv = grid_search(&dataset.features, &labels, &cfg.c_grid, &cfg.gamma_grid, cfg.n_folds, cfg.seed, false, &cfg.smo)?;
        let svc = train_multiclass(&cv.best, &dataset.features, &labels, false, &cfg.smo)?;
        let model = SectionModel {
            svc,
            section: *section,
            features: FeatureMap::Position,
        };
        let predicted = model.predict_points(params, &test.points, &cfg.labeling)?;
        let support = model.svc.support_vectors();
        history.push(ActiveIteration {
            iteration,
            n_labeled: dataset.len(),
            cv_accuracy: cv.best_accuracy,
            best: cv.best,
            test_accuracy: score(&predicted, &test.labels).0,
            n_support: support.len(),
        });
        log::info!(
            "active iteration {iteration}: {} labeled, CV {:.4}, held-out {:.4}",
            dataset.len(),
            cv.best_accuracy,
            history.last().unwrap().test_accuracy
        );
        if cv.best_accuracy >= cfg.target_accuracy {
            break (model, true);
        }
        if iteration >= cfg.max_iters {
            break (model, false);
        }
        let chosen: Vec<Vec<f64>> = support.choose_multiple(&mut rng, cfg.n_sv_per_iter).cloned().collect();
        let points = propose_near(params, section, &chosen, cfg.pts_per_sv, cfg.proposal_sigma, &mut rng)?;
        let samples = points
            .iter()
            .map(|p| SectionSample::new(params, section, p[0], p[1]))
            .collect::<Result<Vec<_>>>()?;
        let (labels, features) = label_samples(params, &samples, false, &cfg.labeling)?;
        dataset.extend(samples, labels, features);
        iteration += 1;
    };
    let mut report = evaluate_against_islands(params, &model, islands, &test, &cfg.evaluation, &cfg.labeling)?;
    report.n_labeled_trajectories = dataset.len();
    Ok(ActiveLearnOutcome {
        model,
        history,
        report,
        dataset,
        reached_target,
    })
}

/// Contour between two predicted classes, `lower < upper`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryCurve {
    pub lower: u8,
    pub upper: u8,
    pub points: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionBoundary {
    pub curves: Vec<BoundaryCurve>,
    /// Grid spacing in `(x, p_x)` the contour was traced on.
    pub cell: [f64; 2],
}

impl DecisionBoundary {
    /// Curves separating `class` from anything else.
    pub fn touching(&self, class: u8) -> impl Iterator<Item = &BoundaryCurve> {
        self.curves.iter().filter(move |c| c.lower == class || c.upper == class)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum EdgeKey {
    /// Between nodes `(i, j)` and `(i + 1, j)`.
    H(usize, usize),
    /// Between nodes `(i, j)` and `(i, j + 1)`.
    V(usize, usize),
}

/// Marching squares over a labeled node grid; `None` nodes lie outside the domain.
pub fn label_contours(xs: &[f64], ps: &[f64], labels: &[Vec<Option<u8>>]) -> Vec<BoundaryCurve> {
    let mid = |e: EdgeKey| match e {
        EdgeKey::H(i, j) => [0.5 * (xs[i] + xs[i + 1]), ps[j]],
        EdgeKey::V(i, j) => [xs[i], 0.5 * (ps[j] + ps[j + 1])],
    };
    let mut segments: HashMap<(u8, u8), Vec<(EdgeKey, EdgeKey)>> = HashMap::new();
    for i in 0..xs.len().saturating_sub(1) {
        for j in 0..ps.len().saturating_sub(1) {
            let corners = [labels[i][j], labels[i + 1][j], labels[i + 1][j + 1], labels[i][j + 1]];
            let Some(c) = corners.iter().copied().collect::<Option<Vec<u8>>>() else {
                continue;
            };
            // edges in corner order: bottom, right, top, left
            let edges = [EdgeKey::H(i, j), EdgeKey::V(i + 1, j), EdgeKey::H(i, j + 1), EdgeKey::V(i, j)];
            let ends = [(0, 1), (1, 2), (3, 2), (0, 3)];
            let mut classes = c.clone();
            classes.sort_unstable();
            classes.dedup();
            for &k in &classes {
                let bits = (0..4).fold(0, |b, n| b | (((c[n] == k) as usize) << n));
                let pairs: &[(usize, usize)] = match bits {
                    1 | 14 => &[(3, 0)],
                    2 | 13 => &[(0, 1)],
                    3 | 12 => &[(3, 1)],
                    4 | 11 => &[(1, 2)],
                    6 | 9 => &[(0, 2)],
                    7 | 8 => &[(2, 3)],
                    5 => &[(3, 0), (1, 2)],
                    10 => &[(0, 1), (2, 3)],
                    _ => &[],
                };
                for &(a, b) in pairs {
                    let (u, v) = ends[a];
                    let other = if c[u] == k { c[v] } else { c[u] };
                    if k < other {
                        segments.entry((k, other)).or_default().push((edges[a], edges[b]));
                    }
                }
            }
        }
    }
    let mut keys: Vec<(u8, u8)> = segments.keys().copied().collect();
    keys.sort_unstable();
    let mut curves = Vec::new();
    for key in keys {
        for chain in chain_segments(&segments[&key]) {
            curves.push(BoundaryCurve {
                lower: key.0,
                upper: key.1,
                points: chain.into_iter().map(mid).collect(),
            });
        }
    }
    curves
}

fn chain_segments(segs: &[(EdgeKey, EdgeKey)]) -> Vec<Vec<EdgeKey>> {
    let mut at: HashMap<EdgeKey, Vec<usize>> = HashMap::new();
    for (n, (a, b)) in segs.iter().enumerate() {
        at.entry(*a).or_default().push(n);
        at.entry(*b).or_default().push(n);
    }
    let mut used = vec![false; segs.len()];
    let mut chains = Vec::new();
    let walk = |start: usize, from: EdgeKey, used: &mut Vec<bool>| {
        let mut chain = vec![from];
        let (mut seg, mut here) = (start, from);
        loop {
            used[seg] = true;
            let (a, b) = segs[seg];
            let next = if a == here { b } else { a };
            chain.push(next);
            match at[&next].iter().find(|&&s| !used[s]) {
                Some(&s) => {
                    seg = s;
                    here = next;
                }
                None => break,
            }
        }
        chain
    };
    // open chains start at an end touched once
    for n in 0..segs.len() {
        if used[n] {
            continue;
        }
        for e in [segs[n].0, segs[n].1] {
            if at[&e].len() == 1 && !used[n] {
                chains.push(walk(n, e, &mut used));
            }
        }
    }
    for n in 0..segs.len() {
        if !used[n] {
            chains.push(walk(n, segs[n].0, &mut used));
        }
    }
    chains
}

/// Contours of predicted-label changes on a `resolution × resolution` grid,
/// restricted to cells fully inside the energy boundary.
pub fn extract_decision_boundary(params: &SystemParams, model: &SectionModel, resolution: usize, labeling: &LabelingSettings) -> Result<DecisionBoundary> {
    let section = &model.section;
    let samples = sample_grid(params, section, resolution, resolution)?;
    let (xm, pm) = (section.x_extent(params)?, section.px_extent(params)?);
    let (xs, dx) = grid_axis(xm, resolution);
    let (ps, dp) = grid_axis(pm, resolution);
    let points: Vec<[f64; 2]> = samples.iter().map(|s| s.point()).collect();
    let predicted = model.predict_points(params, &points, labeling)?;
    let mut labels = vec![vec![None; resolution]; resolution];
    // sample_grid keeps row-major order over the same axes
    let index = |v: f64, lo: f64, step: f64| ((v - lo) / step).round() as usize;
    for (p, l) in points.iter().zip(predicted) {
        labels[index(p[0], xs[0], dx)][index(p[1], ps[0], dp)] = Some(l);
    }
    Ok(DecisionBoundary {
        curves: label_contours(&xs, &ps, &labels),
        cell: [dx, dp],
    })
}

/// Arclength fraction of `curves` lying within `cells` grid cells of `target`,
/// with distances measured in cell units.
pub fn fraction_near(curves: &[&BoundaryCurve], target: &[[f64; 2]], cell: [f64; 2], cells: f64) -> f64 {
    let scaled = |p: [f64; 2]| [p[0] / cell[0], p[1] / cell[1]];
    let target: Vec<[f64; 2]> = target.iter().map(|p| scaled(*p)).collect();
    let dist = |p: [f64; 2]| target.windows(2).map(|w| segment_distance(p, w[0], w[1])).fold(f64::INFINITY, f64::min);
    let (mut near, mut total) = (0.0, 0.0);
    for c in curves {
        for w in c.points.windows(2) {
            let (a, b) = (scaled(w[0]), scaled(w[1]));
            let len = (b[0] - a[0]).hypot(b[1] - a[1]);
            total += len;
            if dist([0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]) <= cells {
                near += len;
            }
        }
    }
    if total == 0.0 {
        0.0
    } else {
        near / total
    }
}

fn segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let l2 = dx * dx + dy * dy;
    let t = if l2 > 0.0 {
        (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / l2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (a[0] + t * dx - p[0]).hypot(a[1] + t * dy - p[1])
}

/// Agreement between island membership and trajectory labels on a dense grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    /// Over grid points whose four neighbours are also inside the energy boundary.
    pub interior_agreement: f64,
    pub n_interior: usize,
    /// Over points inside some island.
    pub inside_island_agreement: f64,
    pub n_inside_islands: usize,
    /// Rows are trajectory labels, columns island labels.
    pub confusion: [[usize; 4]; 4],
}

pub fn island_trajectory_consistency(
    params: &SystemParams,
    section: &SectionConfig,
    islands: &[ReactiveIsland],
    resolution: usize,
    labeling: &LabelingSettings,
) -> Result<ConsistencyReport> {
    let samples = sample_grid(params, section, resolution, resolution)?;
    let (xm, pm) = (section.x_extent(params)?, section.px_extent(params)?);
    let (dx, dp) = (grid_axis(xm, resolution).1, grid_axis(pm, resolution).1);
    let interior: Vec<&SectionSample> = samples
        .iter()
        .filter(|s| {
            [(dx, 0.0), (-dx, 0.0), (0.0, dp), (0.0, -dp)]
                .iter()
                .all(|(a, b)| section.inside(params, s.x + a, s.p_x + b))
        })
        .collect();
    let owned: Vec<SectionSample> = interior.iter().map(|s| **s).collect();
    let (labels, _) = label_samples(params, &owned, false, labeling)?;
    let (mut agree, mut inside, mut inside_agree) = (0, 0, 0);
    let mut confusion = [[0usize; 4]; 4];
    for (s, l) in owned.iter().zip(&labels) {
        let island = island_label(islands, s.point());
        let truth = l.value.index();
        confusion[truth as usize][island as usize] += 1;
        agree += (island == truth) as usize;
        if island != 0 {
            inside += 1;
            inside_agree += (island == truth) as usize;
        }
    }
    Ok(ConsistencyReport {
        interior_agreement: agree as f64 / owned.len().max(1) as f64,
        n_interior: owned.len(),
        inside_island_agreement: inside_agree as f64 / inside.max(1) as f64,
        n_inside_islands: inside,
        confusion,
    })
}

/// Share of points where `a` predicts the mirror of what `b` predicts at the mirrored point.
pub fn mirror_agreement(a: &[u8], b_at_mirror: &[u8]) -> f64 {
    let same = a
        .iter()
        .zip(b_at_mirror)
        .filter(|(x, y)| Channel::from_index(**x).map(Channel::mirrored).map(Channel::index) == Some(**y))
        .count();
    same as f64 / a.len().max(1) as f64
}
