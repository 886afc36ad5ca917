use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use reactive_islands::datasets::LabelingSettings;
use reactive_islands::integrator::IntegrationSettings;
use reactive_islands::manifolds::{ManifoldSettings, SectionConfig};
use reactive_islands::periodic::OrbitSettings;
use reactive_islands::pipelines::{ActiveLearnConfig, EvaluationSettings, TrainingConfig, ACTIVE_C_GRID, ACTIVE_GAMMA_GRID, FIXED_C_GRID, FIXED_GAMMA_GRID};
use reactive_islands::svc::SmoSettings;
use reactive_islands::SystemParams;

/// Every tunable of a run, one table per subsystem. Missing keys take defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemParams,
    pub section: SectionTable,
    pub integration: IntegrationTable,
    pub manifold: ManifoldTable,
    pub dataset: DatasetTable,
    pub svc: SvcTable,
    pub active: ActiveTable,
    pub evaluation: EvaluationSettings,
    pub output: OutputTable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SectionTable {
    pub energy: f64,
    pub y_c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegrationTable {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub event_tol: f64,
    pub max_steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ManifoldTable {
    pub n_seeds: usize,
    pub t_span: f64,
    pub displacement: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetTable {
    pub grid: [usize; 2],
    pub horizon: f64,
    pub ld: bool,
    pub ld_tau: f64,
    pub ld_exponent: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvcTable {
    pub c_grid: Vec<f64>,
    pub gamma_grid: Vec<f64>,
    pub n_folds: usize,
    pub tol: f64,
    pub max_iter: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ActiveTable {
    pub initial_grid: [usize; 2],
    pub n_sv_per_iter: usize,
    pub pts_per_sv: usize,
    pub proposal_sigma: f64,
    pub target_accuracy: f64,
    pub max_iters: usize,
    pub c_grid: Vec<f64>,
    pub gamma_grid: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputTable {
    pub dir: PathBuf,
}

impl Default for SectionTable {
    fn default() -> Self {
        Self { energy: 0.17, y_c: 0.0 }
    }
}

impl Default for IntegrationTable {
    fn default() -> Self {
        let d = IntegrationSettings::default();
        Self {
            rel_tol: d.rel_tol,
            abs_tol: d.abs_tol,
            max_step: d.max_step,
            event_tol: d.event_tol,
            max_steps: d.max_steps,
        }
    }
}

impl Default for ManifoldTable {
    fn default() -> Self {
        let d = ManifoldSettings::default();
        Self {
            n_seeds: d.n_seeds,
            t_span: d.t_span,
            displacement: d.displacement,
        }
    }
}

impl Default for DatasetTable {
    fn default() -> Self {
        let d = LabelingSettings::default();
        Self {
            grid: [100, 100],
            horizon: d.horizon,
            ld: false,
            ld_tau: d.ld_tau,
            ld_exponent: d.ld_exponent,
            seed: 0,
        }
    }
}

impl Default for SvcTable {
    fn default() -> Self {
        let d = SmoSettings::default();
        Self {
            c_grid: FIXED_C_GRID.to_vec(),
            gamma_grid: FIXED_GAMMA_GRID.to_vec(),
            n_folds: 5,
            tol: d.tol,
            max_iter: d.max_iter,
        }
    }
}

impl Default for ActiveTable {
    fn default() -> Self {
        let d = ActiveLearnConfig::default();
        Self {
            initial_grid: [d.initial_grid.0, d.initial_grid.1],
            n_sv_per_iter: d.n_sv_per_iter,
            pts_per_sv: d.pts_per_sv,
            proposal_sigma: d.proposal_sigma,
            target_accuracy: d.target_accuracy,
            max_iters: d.max_iters,
            c_grid: ACTIVE_C_GRID.to_vec(),
            gamma_grid: ACTIVE_GAMMA_GRID.to_vec(),
        }
    }
}

/// Environment variable naming the default output directory.
pub const OUT_DIR_VAR: &str = "REACTIVE_ISLANDS_OUT";

impl Default for OutputTable {
    fn default() -> Self {
        Self {
            dir: std::env::var_os(OUT_DIR_VAR).map_or_else(|| PathBuf::from("."), PathBuf::from),
        }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            system: SystemParams::default(),
            section: SectionTable::default(),
            integration: IntegrationTable::default(),
            manifold: ManifoldTable::default(),
            dataset: DatasetTable::default(),
            svc: SvcTable::default(),
            active: ActiveTable::default(),
            evaluation: EvaluationSettings::default(),
            output: OutputTable::default(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed config {path}: {message}")]
    Parse { path: PathBuf, message: String },
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_owned(), source })?;
        Self::from_toml(&text).map_err(|message| ConfigError::Parse {
            path: path.to_owned(),
            message,
        })
    }

    pub fn from_toml(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config tables serialize")
    }

    /// The config as `# `-prefixed lines, for embedding in data files.
    pub fn as_comment(&self) -> String {
        self.to_toml().lines().map(|l| format!("# {l}\n")).collect()
    }

    /// Recovers a config embedded by [`RunConfig::as_comment`].
    pub fn from_comment(text: &str) -> Result<Self, String> {
        let body: String = text
            .lines()
            .take_while(|l| l.starts_with('#'))
            .filter_map(|l| l.strip_prefix("# ").or_else(|| l.strip_prefix('#')))
            .filter(|l| !l.starts_with('!'))
            .map(|l| format!("{l}\n"))
            .collect();
        Self::from_toml(&body)
    }

    pub fn section(&self) -> SectionConfig {
        SectionConfig::new(self.section.y_c, self.section.energy)
    }

    pub fn integration(&self) -> IntegrationSettings {
        IntegrationSettings {
            rel_tol: self.integration.rel_tol,
            abs_tol: self.integration.abs_tol,
            max_step: self.integration.max_step,
            event_tol: self.integration.event_tol,
            max_steps: self.integration.max_steps,
            ..IntegrationSettings::default()
        }
    }

    pub fn labeling(&self) -> LabelingSettings {
        LabelingSettings {
            horizon: self.dataset.horizon,
            ld_tau: self.dataset.ld_tau,
            ld_exponent: self.dataset.ld_exponent,
            integration: self.integration(),
        }
    }

    pub fn manifold(&self) -> ManifoldSettings {
        ManifoldSettings {
            n_seeds: self.manifold.n_seeds,
            t_span: self.manifold.t_span,
            displacement: self.manifold.displacement,
            integration: self.integration(),
        }
    }

    pub fn orbit(&self) -> OrbitSettings {
        let mut o = OrbitSettings::default();
        o.continuation.correction.integration = self.integration();
        o
    }

    pub fn smo(&self) -> SmoSettings {
        SmoSettings {
            tol: self.svc.tol,
            max_iter: self.svc.max_iter,
        }
    }

    pub fn training(&self) -> TrainingConfig {
        TrainingConfig {
            grid: (self.dataset.grid[0], self.dataset.grid[1]),
            c_grid: self.svc.c_grid.clone(),
            gamma_grid: self.svc.gamma_grid.clone(),
            n_folds: self.svc.n_folds,
            seed: self.dataset.seed,
            scale: false,
            smo: self.smo(),
            labeling: self.labeling(),
            evaluation: self.evaluation.clone(),
        }
    }

    pub fn active(&self) -> ActiveLearnConfig {
        ActiveLearnConfig {
            initial_grid: (self.active.initial_grid[0], self.active.initial_grid[1]),
            n_sv_per_iter: self.active.n_sv_per_iter,
            pts_per_sv: self.active.pts_per_sv,
            proposal_sigma: self.active.proposal_sigma,
            target_accuracy: self.active.target_accuracy,
            max_iters: self.active.max_iters,
            seed: self.dataset.seed,
            c_grid: self.active.c_grid.clone(),
            gamma_grid: self.active.gamma_grid.clone(),
            n_folds: self.svc.n_folds,
            smo: self.smo(),
            labeling: self.labeling(),
            evaluation: self.evaluation.clone(),
        }
    }
}
