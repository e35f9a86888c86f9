//! Dormand–Prince 5(4) for the geodesic flow `(x, v)' = (v, a(x, v))` with
//! projection back to `TS^n` after every step.
//!
//! Two modes: adaptive (error-controlled, for long shots and closure
//! detection) and fixed-step (a smooth map of the initial data, used for the
//! short exponentials inside the loop space so that energies and their finite
//! differences are free of step-selection jitter).

use serde::{Deserialize, Serialize};

use super::Metric;
use crate::error::{Error, Result};
use crate::real::Real;
use crate::vecops::dot;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IntegratorConfig {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    /// Upper bound on the adaptive step.
    pub h_max: f64,
    /// Steps per unit parameter for short (`t ∈ [0, 1]`) exponentials.
    pub short_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            rtol: 1e-10,
            atol: 1e-10,
            max_steps: 2_000_000,
            h_max: 0.25,
            short_steps: 24,
        }
    }
}

const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Phase-space state `[x; v]` of length `2(n+1)`.
fn rhs<M: Metric + ?Sized, R: Real>(m: &M, y: &[R], out: &mut [R]) {
    let d = y.len() / 2;
    let (x, v) = y.split_at(d);
    out[..d].copy_from_slice(v);
    m.acceleration(x, v, &mut out[d..]);
}

pub(crate) fn project_state<R: Real>(y: &mut [R]) {
    let d = y.len() / 2;
    let (x, v) = y.split_at_mut(d);
    let r = dot(x, x).sqrt();
    for xi in x.iter_mut() {
        *xi = *xi / r;
    }
    let c = dot(x, v);
    for (vi, xi) in v.iter_mut().zip(x.iter()) {
        *vi -= c * *xi;
    }
}

struct Stages<R> {
    k: [Vec<R>; 7],
    tmp: Vec<R>,
}

impl<R: Real> Stages<R> {
    fn new(len: usize) -> Self {
        Stages {
            k: std::array::from_fn(|_| vec![R::zero(); len]),
            tmp: vec![R::zero(); len],
        }
    }

    /// Stages 2..=`last` given `k[0] = f(y)`; writes the 5th-order update to `out`.
    fn step<M: Metric + ?Sized>(&mut self, m: &M, y: &[R], h: f64, last: usize, out: &mut [R]) {
        let n = y.len();
        for s in 1..last {
            for i in 0..n {
                let mut acc = R::zero();
                for (j, a) in A[s][..s].iter().enumerate() {
                    if *a != 0.0 {
                        acc += self.k[j][i].scale(*a);
                    }
                }
                self.tmp[i] = y[i] + acc.scale(h);
            }
            rhs(m, &self.tmp, &mut self.k[s]);
        }
        for i in 0..n {
            let mut acc = R::zero();
            for (j, b) in B5.iter().enumerate().take(6) {
                if *b != 0.0 {
                    acc += self.k[j][i].scale(*b);
                }
            }
            out[i] = y[i] + acc.scale(h);
        }
    }

    /// Scaled RMS error estimate (real parts only). Needs `k[6] = f(y_new)`.
    fn error(&self, y: &[R], y_new: &[R], h: f64, rtol: f64, atol: f64) -> f64 {
        let n = y.len();
        let mut s = 0.0;
        for i in 0..n {
            let mut e = 0.0;
            for (j, c) in E.iter().enumerate() {
                if *c != 0.0 {
                    e += c * self.k[j][i].re();
                }
            }
            let sc = atol + rtol * y[i].re().abs().max(y_new[i].re().abs());
            let r = h * e / sc;
            s += r * r;
        }
        (s / n as f64).sqrt()
    }
}

/// Integrate `[x; v]` over `[0, t_end]` with `steps` equal steps.
pub(crate) fn integrate_fixed<M: Metric + ?Sized, R: Real>(m: &M, y0: &[R], t_end: f64, steps: usize) -> Vec<R> {
    let n = y0.len();
    let mut st = Stages::new(n);
    let mut y = y0.to_vec();
    let mut y_new = vec![R::zero(); n];
    let h = t_end / steps as f64;
    for _ in 0..steps {
        rhs(m, &y, &mut st.k[0]);
        st.step(m, &y, h, 6, &mut y_new);
        std::mem::swap(&mut y, &mut y_new);
        project_state(&mut y);
    }
    y
}

pub(crate) struct Adaptive<R> {
    pub y: Vec<R>,
    pub steps: usize,
    /// Sum of accepted local error estimates (absolute units).
    pub error: f64,
}

/// Adaptive integration over `[0, t_end]`. `observe(t, y)` is called after
/// every accepted step (including the last one, at `t_end`), and the start
/// state is reported at `t = 0`.
pub(crate) fn integrate_adaptive<M, R, F>(
    m: &M,
    y0: &[R],
    t_end: f64,
    cfg: &IntegratorConfig,
    mut observe: F,
) -> Result<Adaptive<R>>
where
    M: Metric + ?Sized,
    R: Real,
    F: FnMut(f64, &[R]),
{
    let n = y0.len();
    let mut y = y0.to_vec();
    observe(0.0, &y);
    if t_end == 0.0 {
        return Ok(Adaptive { y, steps: 0, error: 0.0 });
    }
    if !(t_end > 0.0) || !t_end.is_finite() {
        return Err(Error::domain(format!("integration time must be non-negative, got {t_end}")));
    }
    let mut st = Stages::new(n);
    let mut y_new = vec![R::zero(); n];
    let mut t = 0.0;
    let mut h = cfg.h_max.min(t_end).min(0.05);
    let mut steps = 0usize;
    let mut accepted = 0usize;
    let mut error = 0.0;
    rhs(m, &y, &mut st.k[0]);
    while t < t_end {
        if steps >= cfg.max_steps {
            return Err(Error::IntegratorFailure(format!(
                "step budget {} exhausted at t = {t:.6}",
                cfg.max_steps
            )));
        }
        steps += 1;
        let last = t + h >= t_end * (1.0 - 1e-14);
        if last {
            h = t_end - t;
        }
        st.step(m, &y, h, 6, &mut y_new);
        rhs(m, &y_new, &mut st.k[6]);
        let err = st.error(&y, &y_new, h, cfg.rtol, cfg.atol);
        if !err.is_finite() {
            h *= 0.2;
            if h < 1e-14 {
                return Err(Error::IntegratorFailure(format!("non-finite state at t = {t:.6}")));
            }
            continue;
        }
        if err <= 1.0 {
            accepted += 1;
            error += err * cfg.atol.max(cfg.rtol);
            t = if last { t_end } else { t + h };
            std::mem::swap(&mut y, &mut y_new);
            project_state(&mut y);
            observe(t, &y);
            rhs(m, &y, &mut st.k[0]);
            let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            h = (h * fac).min(cfg.h_max);
        } else {
            h *= (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
            if h < 1e-14 * t_end.max(1.0) {
                return Err(Error::IntegratorFailure(format!("step size underflow at t = {t:.6}")));
            }
        }
    }
    Ok(Adaptive { y, steps: accepted, error })
}
