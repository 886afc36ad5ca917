//! SMO for the soft-margin dual with maximal-violating-pair selection of the
//! first index and second-order selection of the second.

use std::collections::HashMap;
use std::sync::Mutex;

use super::rbf;

/// Kernel values over a fixed point set, precomputed or evaluated on demand.
pub(crate) enum KernelSource<'a> {
    Dense {
        n: usize,
        k: Vec<f64>,
    },
    Lazy {
        points: &'a [Vec<f64>],
        gamma: f64,
        cache: Mutex<HashMap<usize, std::sync::Arc<Vec<f64>>>>,
        capacity: usize,
    },
}

/// Full Gram matrices are built up to this many points.
pub(crate) const DENSE_LIMIT: usize = 8000;

impl<'a> KernelSource<'a> {
    pub fn new(points: &'a [Vec<f64>], gamma: f64) -> Self {
        let n = points.len();
        if n <= DENSE_LIMIT {
            let mut k = vec![0.0; n * n];
            for i in 0..n {
                k[i * n + i] = 1.0;
                for j in 0..i {
                    let v = rbf(gamma, &points[i], &points[j]);
                    k[i * n + j] = v;
                    k[j * n + i] = v;
                }
            }
            KernelSource::Dense { n, k }
        } else {
            KernelSource::Lazy {
                points,
                gamma,
                cache: Mutex::new(HashMap::new()),
                capacity: (DENSE_LIMIT * DENSE_LIMIT / n).max(16),
            }
        }
    }

    fn row(&self, i: usize) -> Row<'_> {
        match self {
            KernelSource::Dense { n, k } => Row::Slice(&k[i * n..(i + 1) * n]),
            KernelSource::Lazy {
                points,
                gamma,
                cache,
                capacity,
            } => {
                let mut c = cache.lock().unwrap();
                if let Some(r) = c.get(&i) {
                    return Row::Owned(r.clone());
                }
                let r = std::sync::Arc::new(points.iter().map(|p| rbf(*gamma, &points[i], p)).collect::<Vec<_>>());
                if c.len() >= *capacity {
                    c.clear();
                }
                c.insert(i, r.clone());
                Row::Owned(r)
            }
        }
    }
}

enum Row<'a> {
    Slice(&'a [f64]),
    Owned(std::sync::Arc<Vec<f64>>),
}

impl std::ops::Index<usize> for Row<'_> {
    type Output = f64;

    fn index(&self, j: usize) -> &f64 {
        match self {
            Row::Slice(s) => &s[j],
            Row::Owned(v) => &v[j],
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct SmoOutcome {
    pub alpha: Vec<f64>,
    /// `Qα − e`, kept for warm starts.
    pub grad: Vec<f64>,
    pub bias: f64,
    pub converged: bool,
    pub iterations: usize,
    pub max_violation: f64,
}

const TAU: f64 = 1e-12;

/// Solves the dual on the subset `idx` of the kernel's points with labels `y` (±1).
///
/// `warm` is a previous solution on the same subset with a smaller or equal C;
/// it stays feasible and its gradient does not depend on C.
pub(crate) fn solve(kernel: &KernelSource<'_>, idx: &[usize], y: &[f64], c: f64, tol: f64, max_iter: usize, warm: Option<&SmoOutcome>) -> SmoOutcome {
    let n = idx.len();
    let (mut alpha, mut grad) = match warm {
        Some(w) if w.alpha.len() == n && w.alpha.iter().all(|a| *a <= c) => (w.alpha.clone(), w.grad.clone()),
        _ => (vec![0.0; n], vec![-1.0; n]),
    };
    let mut ri = vec![0.0; n];
    let mut rj = vec![0.0; n];
    let gather = |row: &Row<'_>, out: &mut [f64]| {
        let src: &[f64] = match row {
            Row::Slice(s) => s,
            Row::Owned(v) => v,
        };
        for (o, &k) in out.iter_mut().zip(idx) {
            *o = src[k];
        }
    };
    // yg = y∘grad; membership of I_up / I_low as additive 0 / ∞ penalties
    let mut yg: Vec<f64> = y.iter().zip(&grad).map(|(a, b)| a * b).collect();
    let penalties = |y: f64, a: f64| {
        let (up, low) = if y > 0.0 { (a < c, a > 0.0) } else { (a > 0.0, a < c) };
        (if up { 0.0 } else { f64::INFINITY }, if low { 0.0 } else { f64::INFINITY })
    };
    let (mut up_pen, mut low_pen): (Vec<f64>, Vec<f64>) = y.iter().zip(&alpha).map(|(y, a)| penalties(*y, *a)).unzip();

    // maximal violating i over I_up, and the minimum over I_low
    let select = |yg: &[f64], up_pen: &[f64], low_pen: &[f64]| {
        let (yg, up_pen) = (&yg[..n], &up_pen[..n]);
        let (i, g_max) = arg_max(n, f64::NEG_INFINITY, |t| -yg[t] - up_pen[t]);
        let g_min = yg.iter().zip(low_pen).fold(f64::INFINITY, |m, (g, l)| {
            let v = l - g;
            if v < m {
                v
            } else {
                m
            }
        });
        (i, g_max, g_min)
    };

    let (mut i, mut g_max, mut g_min) = select(&yg, &up_pen, &low_pen);
    let mut iterations = 0;
    let mut converged = false;
    loop {
        if i == usize::MAX || g_max - g_min < tol {
            converged = true;
            break;
        }
        if iterations >= max_iter {
            break;
        }
        gather(&kernel.row(idx[i]), &mut ri);
        // second-order gain over I_low; only b > 0 can improve the objective
        let (yg_n, low_n, ri_n) = (&yg[..n], &low_pen[..n], &ri[..n]);
        let (j, _) = arg_max(n, 0.0, |t| {
            let b = g_max + yg_n[t] - low_n[t];
            let a = 2.0 - 2.0 * ri_n[t];
            let gain = b * b / if a > TAU { a } else { TAU };
            if b > 0.0 {
                gain
            } else {
                0.0
            }
        });
        if j == usize::MAX {
            converged = true;
            break;
        }
        gather(&kernel.row(idx[j]), &mut rj);
        let (gi, gj) = (y[i] * yg[i], y[j] * yg[j]);
        let (old_i, old_j) = (alpha[i], alpha[j]);
        let quad = (2.0 - 2.0 * ri[j]).max(TAU);
        if y[i] != y[j] {
            let delta = (-gi - gj) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let delta = (gi - gj) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (si, sj) = (y[i] * (alpha[i] - old_i), y[j] * (alpha[j] - old_j));
        for ((g, a), b) in yg.iter_mut().zip(&ri).zip(&rj) {
            *g += si * a + sj * b;
        }
        for k in [i, j] {
            (up_pen[k], low_pen[k]) = penalties(y[k], alpha[k]);
        }
        (i, g_max, g_min) = select(&yg, &up_pen, &low_pen);
        iterations += 1;
    }
    for t in 0..n {
        grad[t] = y[t] * yg[t];
    }

    // bias from free vectors, else midpoint of the feasible interval
    let (mut sum, mut n_free) = (0.0, 0usize);
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if alpha[t] > 0.0 && alpha[t] < c {
            sum += yg;
            n_free += 1;
        } else if (alpha[t] >= c && y[t] < 0.0) || (alpha[t] <= 0.0 && y[t] > 0.0) {
            ub = ub.min(yg);
        } else {
            lb = lb.max(yg);
        }
    }
    let rho = if n_free > 0 { sum / n_free as f64 } else { 0.5 * (ub + lb) };
    SmoOutcome {
        alpha,
        grad,
        bias: -rho,
        converged,
        iterations,
        max_violation: g_max - g_min,
    }
}

const LANES: usize = 8;

/// First index of the largest `f(t)` strictly above `floor`, or `usize::MAX`.
#[inline(always)]
fn arg_max(n: usize, floor: f64, f: impl Fn(usize) -> f64) -> (usize, f64) {
    let mut m = [floor; LANES];
    let mut id = [usize::MAX; LANES];
    let body = n / LANES * LANES;
    for c in (0..body).step_by(LANES) {
        for k in 0..LANES {
            let v = f(c + k);
            let gt = v > m[k];
            m[k] = if gt { v } else { m[k] };
            id[k] = if gt { c + k } else { id[k] };
        }
    }
    let (mut best, mut at) = (floor, usize::MAX);
    for k in 0..LANES {
        if m[k] > best || (m[k] == best && id[k] < at) {
            best = m[k];
            at = id[k];
        }
    }
    for t in body..n {
        let v = f(t);
        if v > best {
            best = v;
            at = t;
        }
    }
    (at, best)
}
