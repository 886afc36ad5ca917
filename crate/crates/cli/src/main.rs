mod commands;
mod config;
mod error;
mod plot;
mod table;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::RunConfig;
use crate::error::CliError;

/// Reactive islands of the Hénon-Heiles system: exact islands, labeled datasets,
/// support-vector training and figures.
#[derive(Debug, Parser)]
#[command(name = "reactive-islands", version)]
struct Cli {
    /// Sectioned `key = value` config file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Worker threads for parallel labeling and evaluation (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Directory that relative output paths are resolved against.
    #[arg(long, global = true, env = config::OUT_DIR_VAR)]
    out_dir: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct SectionArgs {
    #[arg(long)]
    energy: Option<f64>,
    /// Section height `y_c`.
    #[arg(long, allow_hyphen_values = true)]
    section: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Fixed,
    Active,
    Ld,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PlotKind {
    Islands,
    Boundary,
    Heatmap,
    LdField,
    ManifoldProjection,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// First-order reactive island of one saddle, as a closed (x, p_x) curve.
    Island {
        #[command(flatten)]
        section: SectionArgs,
        #[arg(long, value_parser = parse_saddle)]
        saddle: reactive_islands::SaddleId,
        /// Number of manifold fibers.
        #[arg(long)]
        seeds: Option<usize>,
        #[arg(long)]
        out: PathBuf,
        /// Also write the stable manifold fibers.
        #[arg(long)]
        manifold_out: Option<PathBuf>,
    },
    /// Grid of section points labeled by escape channel.
    Dataset {
        #[command(flatten)]
        section: SectionArgs,
        /// Grid size as `NX,NPX`.
        #[arg(long, value_parser = parse_grid)]
        grid: Option<[usize; 2]>,
        #[arg(long)]
        horizon: Option<f64>,
        #[arg(long, value_enum)]
        ld: Option<Switch>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a classifier with one of the three pipelines.
    Train {
        #[arg(long, value_enum)]
        mode: Mode,
        /// Labeled dataset from `dataset`; without it the training grid is built here.
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[command(flatten)]
        section: SectionArgs,
        #[arg(long)]
        seed: Option<u64>,
        /// Active-learning iteration cap.
        #[arg(long)]
        max_iters: Option<usize>,
        #[arg(long)]
        model_out: PathBuf,
        #[arg(long)]
        report_out: PathBuf,
        /// Per-iteration history of active learning.
        #[arg(long)]
        history_out: Option<PathBuf>,
    },
    /// SVG figure plus a CSV sidecar of the plotted numbers.
    Plot {
        #[arg(long, value_enum)]
        what: PlotKind,
        #[arg(long = "in", num_args = 1.., required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_saddle(s: &str) -> Result<reactive_islands::SaddleId, String> {
    s.parse().map_err(|e: reactive_islands::Error| e.to_string())
}

fn parse_grid(s: &str) -> Result<[usize; 2], String> {
    let (a, b) = s.split_once(',').ok_or("expected NX,NPX")?;
    let n = |t: &str| t.trim().parse::<usize>().map_err(|e| e.to_string());
    Ok([n(a)?, n(b)?])
}

impl SectionArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        if let Some(e) = self.energy {
            cfg.section.energy = e;
        }
        if let Some(y) = self.section {
            cfg.section.y_c = y;
        }
    }
}

fn resolve(cfg: &RunConfig, p: &std::path::Path) -> PathBuf {
    if p.is_absolute() {
        p.to_owned()
    } else {
        cfg.output.dir.join(p)
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    if let Some(d) = &cli.out_dir {
        cfg.output.dir = d.clone();
    }
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    match cli.command {
        Command::Island {
            section,
            saddle,
            seeds,
            out,
            manifold_out,
        } => {
            section.apply(&mut cfg);
            if let Some(n) = seeds {
                cfg.manifold.n_seeds = n;
            }
            let out = resolve(&cfg, &out);
            let manifold_out = manifold_out.map(|p| resolve(&cfg, &p));
            commands::island(&cfg, saddle, &out, manifold_out.as_deref())
        }
        Command::Dataset {
            section,
            grid,
            horizon,
            ld,
            seed,
            out,
        } => {
            section.apply(&mut cfg);
            if let Some(g) = grid {
                cfg.dataset.grid = g;
            }
            if let Some(h) = horizon {
                cfg.dataset.horizon = h;
            }
            if let Some(s) = ld {
                cfg.dataset.ld = s == Switch::On;
            }
            if let Some(s) = seed {
                cfg.dataset.seed = s;
            }
            commands::dataset(&cfg, &resolve(&cfg, &out))
        }
        Command::Train {
            mode,
            dataset,
            section,
            seed,
            max_iters,
            model_out,
            report_out,
            history_out,
        } => {
            let data = match &dataset {
                Some(p) => {
                    let t = table::Table::read(p)?;
                    // the dataset fixes the physics it was labeled with
                    cfg.system = t.config.system;
                    cfg.section = t.config.section.clone();
                    cfg.dataset = t.config.dataset.clone();
                    cfg.integration = t.config.integration.clone();
                    Some(t)
                }
                None => None,
            };
            section.apply(&mut cfg);
            if let Some(s) = seed {
                cfg.dataset.seed = s;
            }
            if let Some(m) = max_iters {
                cfg.active.max_iters = m;
            }
            let outputs = commands::TrainOutputs {
                model: resolve(&cfg, &model_out),
                report: resolve(&cfg, &report_out),
                history: history_out.map(|p| resolve(&cfg, &p)),
            };
            commands::train(&cfg, mode, data.as_ref(), &outputs)
        }
        Command::Plot { what, inputs, out } => commands::plot(&cfg, what, &inputs, &resolve(&cfg, &out)),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
