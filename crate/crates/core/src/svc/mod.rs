//! Soft-margin RBF support vector classification: SMO dual solver,
//! one-vs-one voting, standardization, stratified CV and grid search.

mod cv;
pub(crate) mod smo;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use cv::{cross_validate, grid_search, stratified_folds, CvCell, CvReport};
pub(crate) use smo::KernelSource;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RbfKernelParams {
    pub gamma: f64,
    #[serde(rename = "C")]
    pub c: f64,
}

impl RbfKernelParams {
    pub fn new(c: f64, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) || !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidParameter(format!("need C > 0 and γ > 0, got C = {c}, γ = {gamma}")));
        }
        Ok(Self { gamma, c })
    }
}

#[inline]
pub(crate) fn rbf(gamma: f64, a: &[f64], b: &[f64]) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum();
    (-gamma * d2).exp()
}

/// `exp(−γ‖a − b‖²)`.
pub fn rbf_kernel(kp: &RbfKernelParams, a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    Ok(rbf(kp.gamma, a, b))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoSettings {
    /// Stop when the maximal KKT violation drops below this.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SmoSettings {
    fn default() -> Self {
        Self { tol: 1e-3, max_iter: 100_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinarySvm {
    pub support_points: Vec<Vec<f64>>,
    /// `αᵢ·lᵢ` per support point.
    pub dual_coefs: Vec<f64>,
    pub bias: f64,
    pub kernel: RbfKernelParams,
    pub converged: bool,
    pub iterations: usize,
}

/// Alphas below this are dropped from the model.
const PRUNE: f64 = 1e-8;

impl BinarySvm {
    pub fn decision(&self, p: &[f64]) -> f64 {
        let g = self.kernel.gamma;
        self.support_points.iter().zip(&self.dual_coefs).map(|(s, a)| a * rbf(g, s, p)).sum::<f64>() + self.bias
    }

    fn from_outcome(points: &[Vec<f64>], idx: &[usize], y: &[f64], kp: RbfKernelParams, out: &smo::SmoOutcome) -> Self {
        let mut support_points = Vec::new();
        let mut dual_coefs = Vec::new();
        for (t, a) in out.alpha.iter().enumerate() {
            if *a >= PRUNE {
                support_points.push(points[idx[t]].clone());
                dual_coefs.push(a * y[t]);
            }
        }
        Self {
            support_points,
            dual_coefs,
            bias: out.bias,
            kernel: kp,
            converged: out.converged,
            iterations: out.iterations,
        }
    }
}

fn check_dims(points: &[Vec<f64>]) -> Result<usize> {
    let d = points.first().map_or(0, |p| p.len());
    if let Some(p) = points.iter().find(|p| p.len() != d) {
        return Err(Error::DimensionMismatch { expected: d, found: p.len() });
    }
    Ok(d)
}

/// Binary soft-margin machine for labels ±1.
pub fn solve_binary(kp: &RbfKernelParams, points: &[Vec<f64>], labels: &[f64], settings: &SmoSettings) -> Result<BinarySvm> {
    if points.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: points.len(),
            found: labels.len(),
        });
    }
    check_dims(points)?;
    if labels.iter().any(|l| *l != 1.0 && *l != -1.0) {
        return Err(Error::InvalidParameter("binary labels must be ±1".into()));
    }
    if !(labels.contains(&1.0) && labels.contains(&-1.0)) {
        return Err(Error::SingleClass);
    }
    let kernel = KernelSource::new(points, kp.gamma);
    let idx: Vec<usize> = (0..points.len()).collect();
    let out = smo::solve(&kernel, &idx, labels, kp.c, settings.tol, settings.max_iter, None);
    Ok(BinarySvm::from_outcome(points, &idx, labels, *kp, &out))
}

/// Full dual solution before pruning, for diagnostics and oracle checks.
pub fn solve_binary_dual(kp: &RbfKernelParams, points: &[Vec<f64>], labels: &[f64], settings: &SmoSettings) -> Result<(Vec<f64>, f64, bool)> {
    if !(labels.contains(&1.0) && labels.contains(&-1.0)) {
        return Err(Error::SingleClass);
    }
    check_dims(points)?;
    let kernel = KernelSource::new(points, kp.gamma);
    let idx: Vec<usize> = (0..points.len()).collect();
    let out = smo::solve(&kernel, &idx, labels, kp.c, settings.tol, settings.max_iter, None);
    Ok((out.alpha, out.bias, out.converged))
}

pub fn decision_function(m: &BinarySvm, p: &[f64]) -> Result<f64> {
    if let Some(s) = m.support_points.first() {
        if s.len() != p.len() {
            return Err(Error::DimensionMismatch {
                expected: s.len(),
                found: p.len(),
            });
        }
    }
    Ok(m.decision(p))
}

/// Per-feature standardization to zero mean and unit variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Scaler {
    pub fn fit(rows: &[Vec<f64>]) -> Self {
        let d = rows.first().map_or(0, |r| r.len());
        let n = rows.len().max(1) as f64;
        let mean: Vec<f64> = (0..d).map(|k| rows.iter().map(|r| r[k]).sum::<f64>() / n).collect();
        let scale = (0..d)
            .map(|k| {
                let var = rows.iter().map(|r| (r[k] - mean[k]).powi(2)).sum::<f64>() / n;
                if var > 0.0 {
                    var.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, scale }
    }

    pub fn transform(&self, row: &[f64]) -> Vec<f64> {
        row.iter().zip(self.mean.iter().zip(&self.scale)).map(|(v, (m, s))| (v - m) / s).collect()
    }

    pub fn inverse(&self, row: &[f64]) -> Vec<f64> {
        row.iter().zip(self.mean.iter().zip(&self.scale)).map(|(v, (m, s))| v * s + m).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairMachine {
    /// Class voted for by a positive decision value.
    pub positive: u8,
    pub negative: u8,
    pub svm: BinarySvm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvcModel {
    pub classes: Vec<u8>,
    pub pairwise: Vec<PairMachine>,
    pub feature_scaler: Option<Scaler>,
    pub kernel: RbfKernelParams,
}

impl SvcModel {
    pub fn n_features(&self) -> Option<usize> {
        self.pairwise.iter().flat_map(|p| p.svm.support_points.first()).map(|s| s.len()).next()
    }

    /// Distinct support points over all pairwise machines, in original feature units.
    pub fn support_vectors(&self) -> Vec<Vec<f64>> {
        let mut seen: Vec<Vec<f64>> = Vec::new();
        for p in &self.pairwise {
            for s in &p.svm.support_points {
                if !seen.contains(s) {
                    seen.push(s.clone());
                }
            }
        }
        match &self.feature_scaler {
            Some(sc) => seen.iter().map(|s| sc.inverse(s)).collect(),
            None => seen,
        }
    }

    pub fn predict(&self, row: &[f64]) -> u8 {
        match &self.feature_scaler {
            Some(sc) => self.vote(&sc.transform(row)),
            None => self.vote(row),
        }
    }

    pub fn predict_many(&self, rows: &[Vec<f64>]) -> Vec<u8> {
        use rayon::prelude::*;
        rows.par_iter().map(|r| self.predict(r)).collect()
    }

    /// One-vs-one vote; ties go to the larger summed decision value, then the lower class.
    fn vote(&self, p: &[f64]) -> u8 {
        if self.classes.len() == 1 {
            return self.classes[0];
        }
        let k = self.classes.len();
        let mut votes = vec![0usize; k];
        let mut score = vec![0.0; k];
        let pos = |c: u8| self.classes.iter().position(|x| *x == c).unwrap();
        for m in &self.pairwise {
            let d = m.svm.decision(p);
            let (a, b) = (pos(m.positive), pos(m.negative));
            if d > 0.0 {
                votes[a] += 1;
            } else {
                votes[b] += 1;
            }
            score[a] += d;
            score[b] -= d;
        }
        let mut best = 0;
        for c in 1..k {
            if votes[c] > votes[best] || (votes[c] == votes[best] && score[c] > score[best]) {
                best = c;
            }
        }
        self.classes[best]
    }
}

/// Trains all pairwise machines on a shared kernel over `points` (already scaled).
///
/// `warm` holds the dual solutions of an earlier call on the same subset with a
/// smaller C, in pair order; the new solutions are returned in the same order.
pub(crate) fn train_on_kernel(
    kernel: &KernelSource<'_>,
    points: &[Vec<f64>],
    labels: &[u8],
    subset: &[usize],
    kp: RbfKernelParams,
    settings: &SmoSettings,
    warm: Option<&[smo::SmoOutcome]>,
) -> Result<(Vec<u8>, Vec<PairMachine>, Vec<smo::SmoOutcome>)> {
    use rayon::prelude::*;
    let mut classes: Vec<u8> = subset.iter().map(|&i| labels[i]).collect();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::SingleClass);
    }
    let pairs: Vec<(u8, u8)> = classes
        .iter()
        .enumerate()
        .flat_map(|(k, &a)| classes[k + 1..].iter().map(move |&b| (a, b)))
        .collect();
    let solved: Vec<(PairMachine, smo::SmoOutcome)> = pairs
        .par_iter()
        .enumerate()
        .map(|(k, &(a, b))| {
            let idx: Vec<usize> = subset.iter().copied().filter(|&i| labels[i] == a || labels[i] == b).collect();
            let y: Vec<f64> = idx.iter().map(|&i| if labels[i] == a { 1.0 } else { -1.0 }).collect();
            let start = warm.and_then(|w| w.get(k));
            let out = smo::solve(kernel, &idx, &y, kp.c, settings.tol, settings.max_iter, start);
            if !out.converged {
                log::warn!(
                    "SMO for pair ({a}, {b}) stopped after {} iterations with violation {:.3e}",
                    out.iterations,
                    out.max_violation
                );
            }
            let machine = PairMachine {
                positive: a,
                negative: b,
                svm: BinarySvm::from_outcome(points, &idx, &y, kp, &out),
            };
            (machine, out)
        })
        .collect();
    let (pairwise, outcomes) = solved.into_iter().unzip();
    Ok((classes, pairwise, outcomes))
}

/// Optional standardization, then one binary machine per class pair.
pub fn train_multiclass(kp: &RbfKernelParams, features: &[Vec<f64>], labels: &[u8], scale: bool, settings: &SmoSettings) -> Result<SvcModel> {
    if features.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: features.len(),
            found: labels.len(),
        });
    }
    check_dims(features)?;
    let scaler = scale.then(|| Scaler::fit(features));
    let points: Vec<Vec<f64>> = match &scaler {
        Some(s) => features.iter().map(|r| s.transform(r)).collect(),
        None => features.to_vec(),
    };
    let kernel = KernelSource::new(&points, kp.gamma);
    let all: Vec<usize> = (0..points.len()).collect();
    let (classes, pairwise, _) = train_on_kernel(&kernel, &points, labels, &all, *kp, settings, None)?;
    Ok(SvcModel {
        classes,
        pairwise,
        feature_scaler: scaler,
        kernel: *kp,
    })
}

pub fn accuracy(predicted: &[u8], truth: &[u8]) -> f64 {
    if truth.is_empty() {
        return 1.0;
    }
    predicted.iter().zip(truth).filter(|(a, b)| a == b).count() as f64 / truth.len() as f64
}
