use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::smo::SmoOutcome;
use super::{accuracy, train_on_kernel, KernelSource, RbfKernelParams, Scaler, SmoSettings, SvcModel};
use crate::error::{Error, Result};

/// Fold index per row: each class is shuffled with the seed and dealt round-robin.
pub fn stratified_folds(labels: &[u8], n_folds: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut classes: Vec<u8> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    let mut fold = vec![0; labels.len()];
    let mut offset = 0;
    for c in classes {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        members.shuffle(&mut rng);
        for (k, i) in members.iter().enumerate() {
            fold[*i] = (k + offset) % n_folds;
        }
        // keep total fold sizes balanced across classes too
        offset += members.len();
    }
    fold
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvCell {
    #[serde(rename = "C")]
    pub c: f64,
    pub gamma: f64,
    pub mean_accuracy: f64,
    pub fold_accuracies: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub grid: Vec<CvCell>,
    pub best: RbfKernelParams,
    pub best_accuracy: f64,
    pub n_folds: usize,
}

struct Fold {
    train: Vec<usize>,
    test: Vec<usize>,
    scaler: Option<Scaler>,
    points: Vec<Vec<f64>>,
}

fn make_folds(features: &[Vec<f64>], labels: &[u8], n_folds: usize, seed: u64, scale: bool) -> Result<Vec<Fold>> {
    if n_folds < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 folds, got {n_folds}")));
    }
    if features.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: features.len(),
            found: labels.len(),
        });
    }
    let assignment = stratified_folds(labels, n_folds, seed);
    Ok((0..n_folds)
        .map(|f| {
            let train: Vec<usize> = (0..labels.len()).filter(|&i| assignment[i] != f).collect();
            let test: Vec<usize> = (0..labels.len()).filter(|&i| assignment[i] == f).collect();
            let rows: Vec<Vec<f64>> = train.iter().map(|&i| features[i].clone()).collect();
            let scaler = scale.then(|| Scaler::fit(&rows));
            let points = match &scaler {
                Some(s) => rows.iter().map(|r| s.transform(r)).collect(),
                None => rows,
            };
            Fold { train, test, scaler, points }
        })
        .collect())
}

fn fold_accuracy(
    fold: &Fold,
    kernel: &KernelSource<'_>,
    features: &[Vec<f64>],
    labels: &[u8],
    kp: RbfKernelParams,
    settings: &SmoSettings,
    warm: &mut Option<Vec<SmoOutcome>>,
) -> Result<f64> {
    let train_labels: Vec<u8> = fold.train.iter().map(|&i| labels[i]).collect();
    let truth: Vec<u8> = fold.test.iter().map(|&i| labels[i]).collect();
    let all: Vec<usize> = (0..fold.train.len()).collect();
    match train_on_kernel(kernel, &fold.points, &train_labels, &all, kp, settings, warm.as_deref()) {
        Ok((classes, pairwise, outcomes)) => {
            *warm = Some(outcomes);
            let model = SvcModel {
                classes,
                pairwise,
                feature_scaler: fold.scaler.clone(),
                kernel: kp,
            };
            let rows: Vec<Vec<f64>> = fold.test.iter().map(|&i| features[i].clone()).collect();
            Ok(accuracy(&model.predict_many(&rows), &truth))
        }
        Err(Error::SingleClass) => {
            let only = train_labels.first().copied().unwrap_or(0);
            Ok(accuracy(&vec![only; truth.len()], &truth))
        }
        Err(e) => Err(e),
    }
}

/// Held-out accuracy of each of `n_folds` stratified folds.
pub fn cross_validate(
    kp: &RbfKernelParams,
    features: &[Vec<f64>],
    labels: &[u8],
    n_folds: usize,
    seed: u64,
    scale: bool,
    settings: &SmoSettings,
) -> Result<Vec<f64>> {
    let folds = make_folds(features, labels, n_folds, seed, scale)?;
    folds
        .iter()
        .map(|fold| {
            let kernel = KernelSource::new(&fold.points, kp.gamma);
            fold_accuracy(fold, &kernel, features, labels, *kp, settings, &mut None)
        })
        .collect()
}

/// Every `(C, γ)` cell scored by stratified CV; ties go to smaller C, then smaller γ.
#[allow(clippy::too_many_arguments)]
pub fn grid_search(
    features: &[Vec<f64>],
    labels: &[u8],
    c_grid: &[f64],
    gamma_grid: &[f64],
    n_folds: usize,
    seed: u64,
    scale: bool,
    settings: &SmoSettings,
) -> Result<CvReport> {
    if c_grid.is_empty() || gamma_grid.is_empty() {
        return Err(Error::InvalidParameter("empty hyper-parameter grid".into()));
    }
    let params: Vec<Vec<RbfKernelParams>> = c_grid
        .iter()
        .map(|&c| gamma_grid.iter().map(|&g| RbfKernelParams::new(c, g)).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;
    let folds = make_folds(features, labels, n_folds, seed, scale)?;
    let (nc, ng) = (c_grid.len(), gamma_grid.len());
    let mut acc = vec![vec![vec![0.0; n_folds]; ng]; nc];
    for (f, fold) in folds.iter().enumerate() {
        for (gi, &gamma) in gamma_grid.iter().enumerate() {
            let kernel = KernelSource::new(&fold.points, gamma);
            // ascending C so each solve starts from the previous dual solution
            let mut order: Vec<usize> = (0..nc).collect();
            order.sort_by(|a, b| c_grid[*a].total_cmp(&c_grid[*b]));
            let mut warm = None;
            for ci in order {
                acc[ci][gi][f] = fold_accuracy(fold, &kernel, features, labels, params[ci][gi], settings, &mut warm)?;
            }
            log::debug!("fold {f} γ = {gamma}: {:?}", (0..nc).map(|ci| acc[ci][gi][f]).collect::<Vec<_>>());
        }
    }
    let mut grid = Vec::with_capacity(nc * ng);
    for (ci, &c) in c_grid.iter().enumerate() {
        for (gi, &gamma) in gamma_grid.iter().enumerate() {
            let folds = acc[ci][gi].clone();
            grid.push(CvCell {
                c,
                gamma,
                mean_accuracy: folds.iter().sum::<f64>() / n_folds as f64,
                fold_accuracies: folds,
            });
        }
    }
    let best = grid
        .iter()
        .fold(None::<&CvCell>, |best, cell| match best {
            None => Some(cell),
            Some(b) => {
                let better = cell.mean_accuracy > b.mean_accuracy || (cell.mean_accuracy == b.mean_accuracy && (cell.c, cell.gamma) < (b.c, b.gamma));
                Some(if better { cell } else { b })
            }
        })
        .unwrap();
    Ok(CvReport {
        best: RbfKernelParams::new(best.c, best.gamma)?,
        best_accuracy: best.mean_accuracy,
        grid,
        n_folds,
    })
}
