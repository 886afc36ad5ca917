use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use reactive_islands::datasets::{build_dataset, feature_names, Channel, EscapeLabel, LabeledDataset, SectionSample};
use reactive_islands::manifolds::{compute_island, energy_boundary_on_section, ReactiveIsland};
use reactive_islands::pipelines::{
    active_learning_loop, compute_islands, extract_decision_boundary, train_on_dataset, ActiveIteration, EvaluationReport, FeatureMap, SectionModel,
    TrainingConfig,
};
use reactive_islands::svc::{accuracy, CvReport, RbfKernelParams};
use reactive_islands::SaddleId;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::plot::Figure;
use crate::table::{num, parse_num, Table};
use crate::{Mode, PlotKind};

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(CliError::json)?;
    text.push('\n');
    write_text(path, &text)
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

pub fn island(cfg: &RunConfig, saddle: SaddleId, out: &Path, manifold_out: Option<&Path>) -> Result<(), CliError> {
    let section = cfg.section();
    let comp = compute_island(&cfg.system, saddle, &section, &cfg.orbit(), &cfg.manifold())?;
    let mut t = Table::new(cfg, &["x", "p_x"])
        .meta("energy", num(section.energy))
        .meta("y_c", num(section.y_c))
        .meta("channel", comp.island.channel)
        .meta("saddle", saddle.name())
        .meta("period", num(comp.orbit.period));
    t.rows = comp.island.curve.iter().map(|p| vec![num(p[0]), num(p[1])]).collect();
    t.write(out)?;
    if let Some(path) = manifold_out {
        let mut m = Table::new(cfg, &["fiber", "t", "x", "y", "p_x", "p_y"])
            .meta("energy", num(section.energy))
            .meta("channel", comp.island.channel)
            .meta("saddle", saddle.name());
        for (k, f) in comp.branch.fibers.iter().enumerate() {
            for (t, s) in f.times.iter().zip(&f.states) {
                m.rows.push(vec![k.to_string(), num(*t), num(s.x), num(s.y), num(s.p_x), num(s.p_y)]);
            }
        }
        m.write(path)?;
    }
    log::info!(
        "island for {} saddle: {} points, area {:.6e}",
        saddle.name(),
        comp.island.curve.len(),
        comp.island.area()
    );
    Ok(())
}

fn dataset_table(cfg: &RunConfig, d: &LabeledDataset) -> Table {
    let mut header: Vec<&str> = d.feature_names.iter().map(String::as_str).collect();
    header.extend(["label", "escape_time"]);
    let mut t = Table::new(cfg, &header);
    t.rows = d
        .features
        .iter()
        .zip(&d.labels)
        .map(|(f, l)| {
            let mut row: Vec<String> = f.iter().map(|v| num(*v)).collect();
            row.push(l.value.index().to_string());
            row.push(num(l.escape_time.unwrap_or(f64::NAN)));
            row
        })
        .collect();
    t
}

pub fn dataset(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let d = build_dataset(
        &cfg.system,
        &cfg.section(),
        cfg.dataset.grid[0],
        cfg.dataset.grid[1],
        cfg.dataset.ld,
        cfg.dataset.seed,
        &cfg.labeling(),
    )?;
    log::info!("{} samples, class counts {:?}", d.len(), d.class_counts());
    dataset_table(cfg, &d).write(out)
}

/// Rebuilds a labeled dataset from its file.
pub fn dataset_from_table(cfg: &RunConfig, t: &Table) -> Result<LabeledDataset, CliError> {
    let with_ld = t.header.iter().any(|h| h == "ld");
    let names = feature_names(with_ld);
    let cols = names.iter().map(|n| t.column(n)).collect::<Result<Vec<_>, _>>()?;
    let (label_col, time_col) = (t.column("label")?, t.column("escape_time")?);
    let section = cfg.section();
    let mut d = LabeledDataset {
        samples: Vec::new(),
        labels: Vec::new(),
        features: Vec::new(),
        feature_names: names,
        horizon: cfg.dataset.horizon,
        seed: cfg.dataset.seed,
    };
    for row in &t.rows {
        let cell = |c: usize| row.get(c).ok_or_else(|| CliError::Data(format!("short row {row:?}")));
        let features = cols.iter().map(|&c| parse_num(cell(c)?)).collect::<Result<Vec<_>, _>>()?;
        let label: u8 = cell(label_col)?.parse().map_err(|_| CliError::Data(format!("bad label in {row:?}")))?;
        let value = Channel::from_index(label).ok_or_else(|| CliError::Data(format!("label {label} out of range")))?;
        let time = parse_num(cell(time_col)?)?;
        d.samples.push(SectionSample::new(&cfg.system, &section, features[0], features[1])?);
        d.labels.push(EscapeLabel {
            value,
            escape_time: (!time.is_nan()).then_some(time),
        });
        d.features.push(features);
    }
    Ok(d)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ModelFile {
    pub config: RunConfig,
    pub mode: String,
    pub model: SectionModel,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ReportFile {
    pub config: RunConfig,
    pub mode: String,
    pub best: RbfKernelParams,
    pub cv_accuracy: f64,
    pub test_accuracy: f64,
    /// Accuracy of the saved model on its own training data.
    pub training_accuracy: f64,
    pub n_support: usize,
    pub n_labeled_trajectories: usize,
    pub evaluation: EvaluationReport,
    pub cv: Option<CvReport>,
    pub history: Vec<ActiveIteration>,
}

fn training_accuracy(model: &SectionModel, d: &LabeledDataset) -> f64 {
    let truth: Vec<u8> = d.labels.iter().map(|l| l.value.index()).collect();
    accuracy(&model.svc.predict_many(&d.features), &truth)
}

pub struct TrainOutputs {
    pub model: PathBuf,
    pub report: PathBuf,
    pub history: Option<PathBuf>,
}

pub fn train(cfg: &RunConfig, mode: Mode, data: Option<&Table>, out: &TrainOutputs) -> Result<(), CliError> {
    let section = cfg.section();
    let islands = compute_islands(&cfg.system, &section, &cfg.orbit(), &cfg.manifold())?;
    let name = format!("{mode:?}").to_lowercase();
    let (model, report) = match mode {
        Mode::Fixed | Mode::Ld => {
            let with_ld = mode == Mode::Ld;
            let tc = TrainingConfig {
                scale: with_ld,
                ..cfg.training()
            };
            let dataset = match data {
                Some(t) => dataset_from_table(cfg, t)?,
                None => build_dataset(&cfg.system, &section, tc.grid.0, tc.grid.1, with_ld, tc.seed, &tc.labeling)?,
            };
            let features = if with_ld {
                FeatureMap::PositionLd {
                    tau: cfg.dataset.ld_tau,
                    exponent: cfg.dataset.ld_exponent,
                }
            } else {
                FeatureMap::Position
            };
            let o = train_on_dataset(&cfg.system, &section, dataset, features, &tc, &islands)?;
            let report = ReportFile {
                config: cfg.clone(),
                mode: name.clone(),
                best: o.cv.best,
                cv_accuracy: o.cv.best_accuracy,
                test_accuracy: o.report.test_accuracy,
                training_accuracy: training_accuracy(&o.model, &o.dataset),
                n_support: o.model.svc.support_vectors().len(),
                n_labeled_trajectories: o.report.n_labeled_trajectories,
                evaluation: o.report,
                cv: Some(o.cv),
                history: Vec::new(),
            };
            (o.model, report)
        }
        Mode::Active => {
            if data.is_some() {
                log::warn!("active learning builds its own data; --dataset only sets the section");
            }
            let o = active_learning_loop(&cfg.system, &section, &cfg.active(), &islands)?;
            let last = o.history.last().cloned().expect("history has the initial model");
            if let Some(path) = &out.history {
                let mut t = Table::new(cfg, &["iteration", "n_labeled", "cv_accuracy", "test_accuracy", "C", "gamma", "n_support"]);
                t.rows = o
                    .history
                    .iter()
                    .map(|h| {
                        vec![
                            h.iteration.to_string(),
                            h.n_labeled.to_string(),
                            num(h.cv_accuracy),
                            num(h.test_accuracy),
                            num(h.best.c),
                            num(h.best.gamma),
                            h.n_support.to_string(),
                        ]
                    })
                    .collect();
                t.write(path)?;
            }
            let report = ReportFile {
                config: cfg.clone(),
                mode: name.clone(),
                best: last.best,
                cv_accuracy: last.cv_accuracy,
                test_accuracy: o.report.test_accuracy,
                training_accuracy: training_accuracy(&o.model, &o.dataset),
                n_support: last.n_support,
                n_labeled_trajectories: o.report.n_labeled_trajectories,
                evaluation: o.report,
                cv: None,
                history: o.history,
            };
            (o.model, report)
        }
    };
    log::info!("{name}: held-out accuracy {:.4}, CV {:.4}", report.test_accuracy, report.cv_accuracy);
    write_json(
        &out.model,
        &ModelFile {
            config: cfg.clone(),
            mode: name,
            model,
        },
    )?;
    write_json(&out.report, &report)
}

fn channel_color(channel: u8) -> &'static str {
    match channel {
        1 => "#d62728",
        2 => "#2ca02c",
        3 => "#1f77b4",
        _ => "#555555",
    }
}

fn read_island(path: &Path) -> Result<(Table, ReactiveIsland), CliError> {
    let t = Table::read(path)?;
    let channel: u8 = t
        .meta_value("channel")
        .and_then(|c| c.parse().ok())
        .ok_or_else(|| CliError::Data(format!("{}: not an island file", path.display())))?;
    let (xc, pc) = (t.column("x")?, t.column("p_x")?);
    let curve = t
        .rows
        .iter()
        .map(|r| Ok([parse_num(&r[xc])?, parse_num(&r[pc])?]))
        .collect::<Result<Vec<_>, CliError>>()?;
    let island = ReactiveIsland {
        channel,
        section: t.config.section(),
        curve,
        order: 1,
    };
    Ok((t, island))
}

fn section_frame(cfg: &RunConfig, title: &str) -> Result<Figure, CliError> {
    let section = cfg.section();
    let (xm, pm) = (section.x_extent(&cfg.system)?, section.px_extent(&cfg.system)?);
    let mut f = Figure::new((-xm, xm), (-pm, pm), "x", "p_x", title);
    f.polyline("energy_boundary", &energy_boundary_on_section(&cfg.system, &section, 256)?, "#999999", false);
    Ok(f)
}

fn section_title(cfg: &RunConfig) -> String {
    format!("E = {}, y = {}", cfg.section.energy, cfg.section.y_c)
}

fn is_json(p: &Path) -> bool {
    p.extension().is_some_and(|e| e == "json")
}

pub fn plot(_cfg: &RunConfig, what: PlotKind, inputs: &[PathBuf], out: &Path) -> Result<(), CliError> {
    let (fig, provenance) = match what {
        PlotKind::Islands => {
            let islands = inputs.iter().map(|p| read_island(p)).collect::<Result<Vec<_>, _>>()?;
            let cfg = islands[0].0.config.clone();
            let mut f = section_frame(&cfg, &format!("Reactive islands, {}", section_title(&cfg)))?;
            for (_, i) in &islands {
                f.polyline(&format!("island_{}", i.channel), &i.curve, channel_color(i.channel), false);
            }
            (f, cfg)
        }
        PlotKind::Boundary => {
            let model_path = inputs
                .iter()
                .find(|p| is_json(p))
                .ok_or_else(|| CliError::Usage("boundary plot needs a model file (.json)".into()))?;
            let m: ModelFile = read_json(model_path)?;
            let cfg = m.config.clone();
            let mut f = section_frame(&cfg, &format!("Learned boundary, {}", section_title(&cfg)))?;
            for p in inputs.iter().filter(|p| !is_json(p)) {
                let (_, i) = read_island(p)?;
                f.polyline(&format!("island_{}", i.channel), &i.curve, channel_color(i.channel), false);
            }
            let b = extract_decision_boundary(&cfg.system, &m.model, cfg.evaluation.resolution, &cfg.labeling())?;
            for c in &b.curves {
                f.polyline(&format!("boundary_{}_{}", c.lower, c.upper), &c.points, "black", true);
            }
            let sv: Vec<[f64; 2]> = m.model.svc.support_vectors().iter().map(|s| [s[0], s[1]]).collect();
            f.dots("support_vectors", &sv, "#00bcd4", 1.5);
            (f, cfg)
        }
        PlotKind::Heatmap => {
            let r: ReportFile = read_json(&inputs[0])?;
            let cv =
                r.cv.as_ref()
                    .ok_or_else(|| CliError::Data("report has no grid search (active-learning reports keep only the history)".into()))?;
            let lc: Vec<f64> = cv.grid.iter().map(|c| c.c.log10()).collect();
            let lg: Vec<f64> = cv.grid.iter().map(|c| c.gamma.log10()).collect();
            let bounds = |v: &[f64]| v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(*x), b.max(*x)));
            let ((c0, c1), (g0, g1)) = (bounds(&lc), bounds(&lg));
            let mut f = Figure::new((c0 - 0.5, c1 + 0.5), (g0 - 0.5, g1 + 0.5), "log10 C", "log10 gamma", "Cross-validated accuracy");
            let (lo, hi) = cv
                .grid
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), c| (a.min(c.mean_accuracy), b.max(c.mean_accuracy)));
            for (k, c) in cv.grid.iter().enumerate() {
                let t = if hi > lo { (c.mean_accuracy - lo) / (hi - lo) } else { 1.0 };
                f.cell("accuracy", [lc[k], lg[k]], [1.0, 1.0], c.mean_accuracy, t);
            }
            (f, r.config)
        }
        PlotKind::LdField => {
            let t = Table::read(&inputs[0])?;
            let (xc, pc, lc) = (t.column("x")?, t.column("p_x")?, t.column("ld")?);
            let mut points = Vec::with_capacity(t.rows.len());
            let mut values = Vec::with_capacity(t.rows.len());
            for r in &t.rows {
                points.push([parse_num(&r[xc])?, parse_num(&r[pc])?]);
                values.push(parse_num(&r[lc])?);
            }
            let cfg = t.config.clone();
            let mut f = section_frame(&cfg, &format!("Lagrangian descriptor, {}", section_title(&cfg)))?;
            f.scatter("ld", &points, &values, 2.0);
            for p in &inputs[1..] {
                let (_, i) = read_island(p)?;
                f.polyline(&format!("island_{}", i.channel), &i.curve, channel_color(i.channel), false);
            }
            (f, cfg)
        }
        PlotKind::ManifoldProjection => {
            let mut fibers: Vec<(u8, Vec<[f64; 2]>)> = Vec::new();
            let mut cfg = None;
            for p in inputs {
                let t = Table::read(p)?;
                let channel: u8 = t.meta_value("channel").and_then(|c| c.parse().ok()).unwrap_or(0);
                let (fc, xc, yc) = (t.column("fiber")?, t.column("x")?, t.column("y")?);
                let mut current: Option<String> = None;
                for r in &t.rows {
                    if current.as_deref() != Some(r[fc].as_str()) {
                        fibers.push((channel, Vec::new()));
                        current = Some(r[fc].clone());
                    }
                    fibers.last_mut().unwrap().1.push([parse_num(&r[xc])?, parse_num(&r[yc])?]);
                }
                cfg.get_or_insert(t.config);
            }
            let cfg = cfg.expect("at least one input");
            let mut f = Figure::new((-1.25, 1.25), (-1.0, 1.25), "x", "y", &format!("Stable manifolds, E = {}", cfg.section.energy));
            for (k, (channel, pts)) in fibers.iter().enumerate() {
                f.polyline(&format!("fiber_{channel}_{k}"), pts, channel_color(*channel), false);
            }
            f.polyline("section", &[[-1.25, cfg.section.y_c], [1.25, cfg.section.y_c]], "black", false);
            (f, cfg)
        }
    };
    write_text(out, &fig.render(&provenance.as_comment()))?;
    let mut side = Table::new(&provenance, &["series", "x", "y", "value"]);
    side.rows = fig.sidecar.iter().map(|(s, x, y, v)| vec![s.clone(), num(*x), num(*y), num(*v)]).collect();
    side.write(&out.with_extension("csv"))
}
