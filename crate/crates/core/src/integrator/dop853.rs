//! Adaptive DOP853 stepper with lazily evaluated 7th-order dense output.

use super::tableau::{A, B, BHH, D, E};
use crate::error::{Error, Result};

/// Autonomous right-hand side on a fixed-size state.
pub(crate) trait Rhs<const N: usize> {
    fn eval(&self, y: &[f64; N], dy: &mut [f64; N]);
}

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.333;
const FAC_MAX: f64 = 6.0;
const BETA: f64 = 0.04;
const EXPO: f64 = 1.0 / 8.0 - BETA * 0.2;

pub(crate) struct Dop853<'a, R, const N: usize> {
    rhs: &'a R,
    rtol: f64,
    atol: f64,
    h_max: f64,
    pub t: f64,
    pub y: [f64; N],
    h: f64,
    fac_old: f64,
    reject: bool,
    // last accepted step
    pub t_old: f64,
    pub h_old: f64,
    y_old: [f64; N],
    f_cur: [f64; N],
    /// stages of the last attempt; index 12 holds f(y_new) once accepted
    st: Box<[[f64; N]; 16]>,
    dense: Option<Box<[[f64; N]; 8]>>,
    pub n_eval: usize,
}

impl<'a, R: Rhs<N>, const N: usize> Dop853<'a, R, N> {
    pub fn new(rhs: &'a R, y0: [f64; N], rtol: f64, atol: f64, h_max: f64, t_end: f64) -> Result<Self> {
        let mut st = Box::new([[0.0; N]; 16]);
        rhs.eval(&y0, &mut st[0]);
        if y0.iter().chain(st[0].iter()).any(|c| !c.is_finite()) {
            return Err(Error::NonFiniteState { t: 0.0 });
        }
        let mut s = Self {
            rhs,
            rtol,
            atol,
            h_max: h_max.abs(),
            t: 0.0,
            y: y0,
            h: 0.0,
            fac_old: 1e-4,
            reject: false,
            t_old: 0.0,
            h_old: 0.0,
            y_old: y0,
            f_cur: st[0],
            st,
            dense: None,
            n_eval: 1,
        };
        s.h = s.initial_step(t_end);
        Ok(s)
    }

    fn scale(&self, a: f64, b: f64) -> f64 {
        self.atol + self.rtol * a.abs().max(b.abs())
    }

    fn initial_step(&mut self, t_end: f64) -> f64 {
        let f0 = self.f_cur;
        let (mut dnf, mut dny) = (0.0, 0.0);
        for i in 0..N {
            let sk = self.atol + self.rtol * self.y[i].abs();
            dnf += (f0[i] / sk).powi(2);
            dny += (self.y[i] / sk).powi(2);
        }
        let mut h = if dnf <= 1e-10 || dny <= 1e-10 { 1e-6 } else { 0.01 * (dny / dnf).sqrt() };
        h = h.min(self.h_max).min(t_end.max(1e-12));
        let mut y1 = [0.0; N];
        for i in 0..N {
            y1[i] = self.y[i] + h * f0[i];
        }
        let mut f1 = [0.0; N];
        self.rhs.eval(&y1, &mut f1);
        self.n_eval += 1;
        let mut der2 = 0.0;
        for i in 0..N {
            let sk = self.atol + self.rtol * self.y[i].abs();
            der2 += ((f1[i] - f0[i]) / sk).powi(2);
        }
        let der2 = der2.sqrt() / h;
        let der12 = der2.abs().max(dnf.sqrt());
        let h1 = if der12 <= 1e-15 {
            1e-6f64.max(h * 1e-3)
        } else {
            (0.01 / der12).powf(1.0 / 8.0)
        };
        (100.0 * h).min(h1).min(self.h_max)
    }

    /// Advances by one accepted step, never stepping past `t_end`.
    pub fn step(&mut self, t_end: f64) -> Result<()> {
        let mut rejections = 0usize;
        loop {
            let mut h = self.h.min(self.h_max);
            if self.t + 1.01 * h >= t_end {
                h = t_end - self.t;
            }
            if h <= 1e-14 * self.t.abs().max(1.0) {
                return Err(Error::StepSizeUnderflow { t: self.t });
            }
            let (err, y_new) = self.attempt(h);
            let fac11 = if err.is_finite() { err.powf(EXPO) } else { f64::INFINITY };
            if err <= 1.0 {
                let fac = (fac11 / self.fac_old.powf(BETA) / SAFETY).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
                let mut h_new = h / fac;
                self.fac_old = err.max(1e-4);
                if self.reject {
                    h_new = h_new.min(h);
                }
                self.reject = false;
                let mut f_new = [0.0; N];
                self.rhs.eval(&y_new, &mut f_new);
                self.n_eval += 1;
                self.st[12] = f_new;
                self.f_cur = f_new;
                self.y_old = self.y;
                self.t_old = self.t;
                self.h_old = h;
                self.y = y_new;
                self.t = if h == t_end - self.t { t_end } else { self.t + h };
                self.h = h_new;
                self.dense = None;
                return Ok(());
            }
            self.reject = true;
            rejections += 1;
            if rejections > 200 {
                return Err(if y_new.iter().all(|c| c.is_finite()) {
                    Error::StepSizeUnderflow { t: self.t }
                } else {
                    Error::NonFiniteState { t: self.t }
                });
            }
            let shrink = if fac11.is_finite() { (fac11 / SAFETY).min(1.0 / FAC_MIN) } else { 10.0 };
            self.h = h / shrink;
        }
    }

    /// One trial step of size `h`; returns the scaled error and the new state.
    fn attempt(&mut self, h: f64) -> (f64, [f64; N]) {
        self.st[0] = self.f_cur;
        let mut tmp = [0.0; N];
        for s in 1..12 {
            for i in 0..N {
                let mut acc = 0.0;
                for (j, a) in A[s][..s].iter().enumerate() {
                    if *a != 0.0 {
                        acc += a * self.st[j][i];
                    }
                }
                tmp[i] = self.y[i] + h * acc;
            }
            let (head, tail) = self.st.split_at_mut(s);
            let _ = head;
            self.rhs.eval(&tmp, &mut tail[0]);
        }
        self.n_eval += 11;

        let mut y_new = [0.0; N];
        let (mut err, mut err2) = (0.0, 0.0);
        for i in 0..N {
            let mut incr = 0.0;
            let mut e = 0.0;
            for j in 0..12 {
                incr += B[j] * self.st[j][i];
                e += E[j] * self.st[j][i];
            }
            y_new[i] = self.y[i] + h * incr;
            let e2 = incr - BHH[0] * self.st[0][i] - BHH[1] * self.st[8][i] - BHH[2] * self.st[11][i];
            let sk = self.scale(self.y[i], y_new[i]);
            err += (e / sk).powi(2);
            err2 += (e2 / sk).powi(2);
        }
        let mut deno = err + 0.01 * err2;
        if deno <= 0.0 {
            deno = 1.0;
        }
        let err = h.abs() * err * (1.0 / (deno * N as f64)).sqrt();
        (if err.is_nan() { f64::INFINITY } else { err }, y_new)
    }

    fn dense_coeffs(&mut self) -> &[[f64; N]; 8] {
        if self.dense.is_none() {
            let h = self.h_old;
            let mut tmp = [0.0; N];
            // stages 14..=16 need the derivative at the new point (index 12)
            for s in 13..16 {
                for i in 0..N {
                    let mut acc = 0.0;
                    for (j, a) in A[s][..s].iter().enumerate() {
                        if *a != 0.0 {
                            acc += a * self.st[j][i];
                        }
                    }
                    tmp[i] = self.y_old[i] + h * acc;
                }
                let (_, tail) = self.st.split_at_mut(s);
                self.rhs.eval(&tmp, &mut tail[0]);
            }
            self.n_eval += 3;
            let mut r = Box::new([[0.0; N]; 8]);
            for i in 0..N {
                let diff = self.y[i] - self.y_old[i];
                let bspl = h * self.st[0][i] - diff;
                r[0][i] = self.y_old[i];
                r[1][i] = diff;
                r[2][i] = bspl;
                r[3][i] = diff - h * self.st[12][i] - bspl;
                for k in 0..4 {
                    let mut acc = 0.0;
                    for j in 0..16 {
                        acc += D[k][j] * self.st[j][i];
                    }
                    r[4 + k][i] = h * acc;
                }
            }
            self.dense = Some(r);
        }
        self.dense.as_ref().unwrap()
    }

    /// State at `t_old + theta·h_old`, `theta ∈ [0, 1]`.
    pub fn interpolate(&mut self, theta: f64) -> [f64; N] {
        let s1 = 1.0 - theta;
        let r = self.dense_coeffs();
        let mut out = [0.0; N];
        for i in 0..N {
            let par = r[4][i] + theta * (r[5][i] + s1 * (r[6][i] + theta * r[7][i]));
            out[i] = r[0][i] + theta * (r[1][i] + s1 * (r[2][i] + theta * (r[3][i] + s1 * par)));
        }
        out
    }
}
