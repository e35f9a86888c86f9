//! Hessians, Morse index and kernel dimension of critical points, the Bott
//! iteration formula, and the uniform broken-geodesic discretization of a
//! closed geodesic as an independent index oracle.

use log::warn;
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::critical::CriticalPoint;
use crate::error::{Error, Result};
use crate::loopspace::{ChartCoords, LoopSpace};
use crate::manifold::{Metric, MetricModel, Segment};
use crate::vecops::{dot, normalized, scaled};

pub const DEFAULT_HESSIAN_STEP: f64 = 1e-4;
pub const DEFAULT_ZERO_TOL: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    pub index: usize,
    /// Raw kernel dimension (no reparametrization correction).
    pub kernel: usize,
    pub positive: usize,
    /// Relative zero tolerance; the absolute threshold is `zero_tol · scale`.
    pub zero_tol: f64,
    /// Largest absolute eigenvalue.
    pub scale: f64,
    /// Smallest `|λ|` outside the zero cluster divided by `scale`.
    pub gap: f64,
    /// Set when `gap < 10 · zero_tol`: counts may be unreliable.
    pub gap_warning: bool,
    /// `max|H − Hᵀ| / max|H|` before symmetrization, when known.
    pub asymmetry: Option<f64>,
}

impl SpectralReport {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }
}

/// Index, kernel and positive counts of a symmetric matrix.
pub fn index_nullity(h: &DMatrix<f64>, zero_tol: f64) -> SpectralReport {
    let mut ev: Vec<f64> = h.clone().symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    let scale = ev.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let thr = zero_tol * scale;
    let index = ev.iter().filter(|&&x| x < -thr).count();
    let kernel = ev.iter().filter(|&&x| x.abs() <= thr).count();
    let positive = ev.len() - index - kernel;
    let gap = ev
        .iter()
        .map(|x| x.abs())
        .filter(|&x| x > thr)
        .fold(f64::INFINITY, f64::min)
        / scale.max(f64::MIN_POSITIVE);
    let gap = if gap.is_finite() { gap } else { 1.0 };
    let gap_warning = gap < 10.0 * zero_tol;
    if gap_warning {
        warn!("spectral gap {gap:.3e} is within 10x the zero tolerance {zero_tol:.1e}");
    }
    SpectralReport {
        eigenvalues: ev,
        index,
        kernel,
        positive,
        zero_tol,
        scale,
        gap,
        gap_warning,
        asymmetry: None,
    }
}

/// Symmetrized finite-difference Hessian of the energy in prime-chart
/// coordinates at a critical point, with its relative asymmetry.
pub fn hessian<M: Metric>(space: &LoopSpace<M>, cp: &CriticalPoint, step: f64) -> Result<(DMatrix<f64>, f64)> {
    if cp.grad_norm > 1e-6 {
        return Err(Error::domain(format!(
            "Hessian requested at a non-critical point (gradient norm {:.3e})",
            cp.grad_norm
        )));
    }
    let geo = space.reconstruct(&cp.config)?;
    ChartCoords::new(space, cp.chart.clone(), false).with_hints(&geo).hessian(step)
}

pub fn spectral_report<M: Metric>(space: &LoopSpace<M>, cp: &CriticalPoint, zero_tol: f64) -> Result<SpectralReport> {
    let (h, asym) = hessian(space, cp, DEFAULT_HESSIAN_STEP)?;
    let mut r = index_nullity(&h, zero_tol);
    r.asymmetry = Some(asym);
    Ok(r)
}

/// Bott's formula `m·i + (m − 1)(n − 1)` for the `m`-th iterate of a prime
/// closed geodesic of index `i` on a Besse `n`-manifold.
pub fn iterate_index_expected(i_prime: usize, m: usize, n: usize) -> usize {
    assert!(m >= 1 && n >= 2, "iterate_index_expected needs m >= 1 and n >= 2");
    m * i_prime + (m - 1) * (n - 1)
}

/// Nullity `2n − 2` of every iterate in the Besse case (the kernel of the
/// Hessian on a critical manifold has one more dimension, the S¹ shift).
pub fn iterate_nullity_expected(n: usize) -> usize {
    2 * n - 2
}

/// `count` points at uniform arc-length spacing along the unit-speed
/// geodesic through `(q, u)` over `[0, length)`.
pub fn uniform_samples<M: Metric>(model: &MetricModel<M>, q: &[f64], u: &[f64], length: f64, count: usize) -> Result<Vec<Vec<f64>>> {
    let u = model.normalize(q, &model.project(q, u));
    let times: Vec<f64> = (0..count).map(|i| length * i as f64 / count as f64).collect();
    Ok(model.shoot_to_times(q, &u, &times)?.into_iter().map(|(x, _)| x).collect())
}

/// The classical discretization `F(p) = Σ d(p_i, p_{i+1})² / (θ_{i+1} − θ_i)`
/// on `M^N` (indices mod `N`, `θ_N = 1`), with all points free.
pub struct UniformDiscretization<'a, M: Metric> {
    model: &'a MetricModel<M>,
    base: Vec<Vec<f64>>,
    theta: Vec<f64>,
    frames: Vec<Vec<Vec<f64>>>,
    hints: Vec<Vec<f64>>,
}

impl<'a, M: Metric> UniformDiscretization<'a, M> {
    /// `theta` holds `θ_0 < … < θ_{N−1} < θ_N = 1` for the `N` points.
    pub fn new(model: &'a MetricModel<M>, points: Vec<Vec<f64>>, theta: Vec<f64>) -> Result<Self> {
        let n = points.len();
        if n < 2 || theta.len() != n + 1 || theta.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::domain("need N >= 2 points and N + 1 increasing breakpoint times"));
        }
        let mut hints = Vec::with_capacity(n);
        for i in 0..n {
            hints.push(model.log_segment(&points[i], &points[(i + 1) % n], None)?.initial);
        }
        let frames = points.iter().map(|p| model.tangent_frame(p)).collect();
        Ok(UniformDiscretization {
            model,
            base: points,
            theta,
            frames,
            hints,
        })
    }

    pub fn dim(&self) -> usize {
        self.base.len() * self.model.dim()
    }

    fn points(&self, xi: &[f64]) -> Vec<Vec<f64>> {
        let n = self.model.dim();
        self.base
            .iter()
            .zip(&self.frames)
            .enumerate()
            .map(|(i, (p, e))| {
                let mut w = p.clone();
                for (ea, c) in e.iter().zip(&xi[i * n..(i + 1) * n]) {
                    for (wi, x) in w.iter_mut().zip(ea) {
                        *wi += c * x;
                    }
                }
                normalized(&w)
            })
            .collect()
    }

    fn segments(&self, pts: &[Vec<f64>]) -> Result<Vec<Segment>> {
        let n = pts.len();
        (0..n)
            .map(|i| self.model.log_segment(&pts[i], &pts[(i + 1) % n], Some(&self.hints[i])))
            .collect()
    }

    pub fn value(&self, xi: &[f64]) -> Result<f64> {
        let pts = self.points(xi);
        let segs = self.segments(&pts)?;
        Ok(segs
            .iter()
            .enumerate()
            .map(|(i, s)| s.length * s.length / (self.theta[i + 1] - self.theta[i]))
            .sum())
    }

    /// `dF = Σ 2g(v_i^− − v_i^+, δp_i)` pulled back to the local coordinates.
    pub fn gradient(&self, xi: &[f64]) -> Result<Vec<f64>> {
        let n = self.model.dim();
        let count = self.base.len();
        let pts = self.points(xi);
        let segs = self.segments(&pts)?;
        let mut grad = vec![0.0; self.dim()];
        for i in 0..count {
            let j = (i + count - 1) % count;
            let vm = scaled(1.0 / (self.theta[j + 1] - self.theta[j]), &segs[j].terminal);
            let vp = scaled(1.0 / (self.theta[i + 1] - self.theta[i]), &segs[i].initial);
            let w: Vec<f64> = vm.iter().zip(&vp).map(|(a, b)| 2.0 * (a - b)).collect();
            let x = &pts[i];
            let g = self.model.metric_matrix(x);
            let d = x.len();
            let c: Vec<f64> = (0..d).map(|r| (0..d).map(|s| g[r * d + s] * w[s]).sum()).collect();
            let mut raw = self.base[i].clone();
            for (ea, cc) in self.frames[i].iter().zip(&xi[i * n..(i + 1) * n]) {
                for (wi, e) in raw.iter_mut().zip(ea) {
                    *wi += cc * e;
                }
            }
            let r = dot(&raw, &raw).sqrt();
            for (a, ea) in self.frames[i].iter().enumerate() {
                let xe = dot(x, ea);
                let dx: Vec<f64> = ea.iter().zip(x).map(|(e, xx)| (e - xx * xe) / r).collect();
                grad[i * n + a] = dot(&c, &dx);
            }
        }
        Ok(grad)
    }

    pub fn hessian(&self, h: f64) -> Result<(DMatrix<f64>, f64)> {
        let d = self.dim();
        let cols: Vec<Result<Vec<f64>>> = (0..d)
            .into_par_iter()
            .map(|a| {
                let mut xi = vec![0.0; d];
                xi[a] = h;
                let gp = self.gradient(&xi)?;
                xi[a] = -h;
                let gm = self.gradient(&xi)?;
                Ok(gp.iter().zip(&gm).map(|(p, m)| (p - m) / (2.0 * h)).collect())
            })
            .collect();
        let mut hm = DMatrix::zeros(d, d);
        for (a, c) in cols.into_iter().enumerate() {
            for (r, v) in c?.into_iter().enumerate() {
                hm[(r, a)] = v;
            }
        }
        let scale = hm.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1e-300);
        let asym = (&hm - hm.transpose()).iter().fold(0.0f64, |m, x| m.max(x.abs())) / scale;
        Ok(((&hm + hm.transpose()) * 0.5, asym))
    }
}

/// Index and kernel of the uniform discretization at the closed geodesic
/// sampled by `points` at the breakpoint times `theta`.
pub fn uniform_discretization_index<M: Metric>(
    model: &MetricModel<M>,
    points: Vec<Vec<f64>>,
    theta: Vec<f64>,
    zero_tol: f64,
) -> Result<SpectralReport> {
    let f = UniformDiscretization::new(model, points, theta)?;
    let (h, asym) = f.hessian(DEFAULT_HESSIAN_STEP)?;
    let mut r = index_nullity(&h, zero_tol);
    r.asymmetry = Some(asym);
    Ok(r)
}

/// Uniform-discretization oracle for the smooth or zig-zag critical point
/// `cp`: its underlying closed geodesic sampled at `count` equally spaced
/// points with equal time steps.
pub fn geodesic_oracle<M: Metric>(
    space: &LoopSpace<M>,
    cp: &CriticalPoint,
    count: usize,
    zero_tol: f64,
) -> Result<SpectralReport> {
    let period = cp
        .period
        .ok_or_else(|| Error::domain("the global minimum has no underlying closed geodesic"))?;
    let pts = uniform_samples(&space.model, &cp.chart.q0, &cp.chart.u, period, count)?;
    let theta = (0..=count).map(|i| i as f64 / count as f64).collect();
    uniform_discretization_index(&space.model, pts, theta, zero_tol)
}
