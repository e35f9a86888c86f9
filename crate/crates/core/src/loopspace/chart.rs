//! Prime-chart coordinates `(q_0, u, q_2, …, q_{k−1})` with
//! `q_1 = exp_{q_0}(δu)`, `‖u‖_g = 1`, and local Euclidean coordinates
//! around a base chart for optimization and Hessians.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{BrokenGeodesic, LoopSpace};
use crate::error::Result;
use crate::manifold::Metric;
use crate::real::{Dual, Real};
use crate::vecops::{dot, project_tangent};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrimeChart {
    pub q0: Vec<f64>,
    /// Unit (`g`-norm) direction at `q0`.
    pub u: Vec<f64>,
    /// `q_2, …, q_{k−1}`.
    pub free: Vec<Vec<f64>>,
}

/// Local coordinates `ξ ∈ R^D` around a base chart, via the retraction
/// `q ↦ (q + Σ ξ_a e_a)/|·|` on points (with `g`-orthonormal frames `e_a`)
/// and `u ↦ g-normalize(P(u + Σ ξ_b f_b))` on the direction, where `f_b`
/// spans the `g`-orthogonal complement of `u`.
///
/// Layout: `[ξ_{q0} (n) | ξ_u (n−1) | ξ_2 (n) | … | ξ_{k−1} (n)]`. In pinned
/// mode the `ξ_{q0}` block is absent and `q_0` stays fixed.
pub struct ChartCoords<'a, M: Metric> {
    space: &'a LoopSpace<M>,
    pub base: PrimeChart,
    e0: Vec<Vec<f64>>,
    f: Vec<Vec<f64>>,
    ei: Vec<Vec<Vec<f64>>>,
    pinned: bool,
    hints: Option<Vec<Vec<f64>>>,
}

fn retract_point<R: Real>(q: &[R], frame: &[Vec<f64>], xi: &[R]) -> Vec<R> {
    let mut w = q.to_vec();
    for (e, c) in frame.iter().zip(xi) {
        for (wi, ei) in w.iter_mut().zip(e) {
            *wi += *c * R::cst(*ei);
        }
    }
    let r = dot(&w, &w).sqrt();
    w.iter().map(|x| *x / r).collect()
}

impl<'a, M: Metric> ChartCoords<'a, M> {
    pub fn new(space: &'a LoopSpace<M>, base: PrimeChart, pinned: bool) -> Self {
        let m = &space.model;
        let e0 = m.tangent_frame(&base.q0);
        let f = m.complement_frame(&base.q0, &base.u);
        let ei = base.free.iter().map(|q| m.tangent_frame(q)).collect();
        ChartCoords {
            space,
            base,
            e0,
            f,
            ei,
            pinned,
            hints: None,
        }
    }

    /// Warm-start the logarithms with the segments of a nearby broken geodesic.
    pub fn with_hints(mut self, geo: &BrokenGeodesic) -> Self {
        self.hints = Some(geo.segments().iter().map(|s| s.initial.clone()).collect());
        self
    }

    pub fn space(&self) -> &LoopSpace<M> {
        self.space
    }

    pub fn is_pinned(&self) -> bool {
        self.pinned
    }

    pub fn dim(&self) -> usize {
        self.head_len() + self.ei.len() * self.space.model.dim()
    }

    fn head_len(&self) -> usize {
        let n = self.space.model.dim();
        if self.pinned {
            n - 1
        } else {
            2 * n - 1
        }
    }

    fn head<R: Real>(&self, xi0: &[R], xiu: &[R]) -> (Vec<R>, Vec<R>) {
        let m = &self.space.model;
        let q0: Vec<R> = self.base.q0.iter().map(|x| R::cst(*x)).collect();
        let q0 = if self.pinned { q0 } else { retract_point(&q0, &self.e0, xi0) };
        let mut t: Vec<R> = self.base.u.iter().map(|x| R::cst(*x)).collect();
        for (fb, c) in self.f.iter().zip(xiu) {
            for (ti, fi) in t.iter_mut().zip(fb) {
                *ti += *c * R::cst(*fi);
            }
        }
        let t = project_tangent(&q0, &t);
        let nrm = m.metric.inner(&q0, &t, &t).sqrt();
        let u = t.iter().map(|x| *x / nrm).collect();
        (q0, u)
    }

    fn split<'x, R: Real>(&self, xi: &'x [R]) -> (Vec<R>, &'x [R], &'x [R]) {
        let n = self.space.model.dim();
        if self.pinned {
            (vec![R::zero(); n], &xi[..n - 1], &xi[n - 1..])
        } else {
            (xi[..n].to_vec(), &xi[n..2 * n - 1], &xi[2 * n - 1..])
        }
    }

    pub fn retract(&self, xi: &[f64]) -> PrimeChart {
        let n = self.space.model.dim();
        let (xi0, xiu, rest) = self.split(xi);
        let (q0, u) = self.head(&xi0, xiu);
        let free = self
            .base
            .free
            .iter()
            .zip(&self.ei)
            .enumerate()
            .map(|(j, (q, e))| retract_point(q, e, &rest[j * n..(j + 1) * n]))
            .collect();
        PrimeChart { q0, u, free }
    }

    pub fn evaluate(&self, xi: &[f64]) -> Result<BrokenGeodesic> {
        let chart = self.retract(xi);
        let pts = self.space.chart_points(&chart);
        self.space.reconstruct_points(pts, self.hints.as_deref())
    }

    pub fn energy(&self, xi: &[f64]) -> Result<f64> {
        Ok(self.evaluate(xi)?.config.energy())
    }

    /// Broken geodesic at `R(ξ)` and the gradient of `E∘R` at `ξ`, assembled
    /// from the velocity mismatches `dE = Σ 2g(v_i^- − v_i^+, δq_i)` with
    /// `δq_1` pulled back through `exp_{q_0}(δu)`.
    pub fn gradient(&self, xi: &[f64]) -> Result<(BrokenGeodesic, Vec<f64>)> {
        let m = &self.space.model;
        let n = m.dim();
        let delta = self.space.delta();
        let geo = self.evaluate(xi)?;
        let pts = geo.config.points();
        let covector = |i: usize| -> Vec<f64> {
            let g = m.metric_matrix(&pts[i]);
            let w = geo.mismatch(i);
            let d = w.len();
            (0..d)
                .map(|r| 2.0 * (0..d).map(|c| g[r * d + c] * w[c]).sum::<f64>())
                .collect()
        };
        let c0 = covector(0);
        let c1 = covector(1);
        let mut grad = vec![0.0; self.dim()];
        let h = self.head_len();
        let (xi0, xiu, rest) = self.split(xi);
        let off = if self.pinned { 0 } else { n };
        for (a, g) in grad.iter_mut().take(h).enumerate() {
            let mut x0: Vec<Dual> = xi0.iter().map(|x| Dual::new(*x, 0.0)).collect();
            let mut xu: Vec<Dual> = xiu.iter().map(|x| Dual::new(*x, 0.0)).collect();
            if a < off {
                x0[a].du = 1.0;
            } else {
                xu[a - off].du = 1.0;
            }
            let (q0, u) = self.head(&x0, &xu);
            let v: Vec<Dual> = u.iter().map(|c| c.scale(delta)).collect();
            let (q1, _) = m.exp_with_velocity(&q0, &v);
            *g = q0.iter().zip(&c0).map(|(d, c)| d.du * c).sum::<f64>()
                + q1.iter().zip(&c1).map(|(d, c)| d.du * c).sum::<f64>();
        }
        for (j, (q, e)) in self.base.free.iter().zip(&self.ei).enumerate() {
            let i = j + 2;
            let ci = covector(i);
            let mut w = q.clone();
            for (ea, c) in e.iter().zip(&rest[j * n..(j + 1) * n]) {
                for (wi, eai) in w.iter_mut().zip(ea) {
                    *wi += c * eai;
                }
            }
            let r = dot(&w, &w).sqrt();
            let x = &pts[i];
            for (a, ea) in e.iter().enumerate() {
                let xe = dot(x, ea);
                let dx: Vec<f64> = ea.iter().zip(x).map(|(e, xx)| (e - xx * xe) / r).collect();
                grad[h + j * n + a] = dot(&ci, &dx);
            }
        }
        Ok((geo, grad))
    }

    /// Symmetrized central differences of the gradient at `ξ = 0` with step
    /// `h`, and the relative asymmetry `max|H − Hᵀ| / max|H|` before
    /// symmetrization.
    pub fn hessian(&self, h: f64) -> Result<(DMatrix<f64>, f64)> {
        let d = self.dim();
        let cols: Vec<Result<Vec<f64>>> = (0..d)
            .into_par_iter()
            .map(|a| {
                let mut xi = vec![0.0; d];
                xi[a] = h;
                let (_, gp) = self.gradient(&xi)?;
                xi[a] = -h;
                let (_, gm) = self.gradient(&xi)?;
                Ok(gp.iter().zip(&gm).map(|(p, m)| (p - m) / (2.0 * h)).collect())
            })
            .collect();
        let mut hm = DMatrix::zeros(d, d);
        for (a, c) in cols.into_iter().enumerate() {
            let c = c?;
            for (r, v) in c.into_iter().enumerate() {
                hm[(r, a)] = v;
            }
        }
        let scale = hm.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1e-300);
        let asym = (&hm - hm.transpose()).iter().fold(0.0f64, |m, x| m.max(x.abs())) / scale;
        let sym = (&hm + hm.transpose()) * 0.5;
        Ok((sym, asym))
    }
}
