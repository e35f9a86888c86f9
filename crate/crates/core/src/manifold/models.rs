use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::{Metric, MetricModel, Segment};
use crate::error::{Error, Result};
use crate::real::Real;
use crate::vecops::dot;

/// Unit round sphere `S^n`, `G = I`.
#[derive(Clone, Debug, PartialEq)]
pub struct RoundSphere {
    n: usize,
}

impl RoundSphere {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::Config(format!("sphere dimension must be at least 2, got {n}")));
        }
        Ok(RoundSphere { n })
    }
}

/// Series-safe `(cos θ, sin θ / θ)` from `θ²`.
fn cos_sinc<R: Real>(theta2: R) -> (R, R) {
    if theta2.re() < 1e-12 {
        let t4 = theta2 * theta2;
        (
            R::one() - theta2.scale(0.5) + t4.scale(1.0 / 24.0),
            R::one() - theta2.scale(1.0 / 6.0) + t4.scale(1.0 / 120.0),
        )
    } else {
        let t = theta2.sqrt();
        (t.cos(), t.sin() / t)
    }
}

impl Metric for RoundSphere {
    fn dim(&self) -> usize {
        self.n
    }

    fn injectivity_radius(&self) -> f64 {
        PI
    }

    fn name(&self) -> &'static str {
        "round"
    }

    fn params(&self) -> Vec<f64> {
        Vec::new()
    }

    fn ambient_metric<R: Real>(&self, x: &[R], out: &mut [R]) {
        let d = x.len();
        for i in 0..d {
            for j in 0..d {
                out[i * d + j] = if i == j { R::one() } else { R::zero() };
            }
        }
    }

    fn ambient_metric_partial<R: Real>(&self, _x: &[R], _l: usize, out: &mut [R]) {
        out.iter_mut().for_each(|o| *o = R::zero());
    }

    fn inner<R: Real>(&self, _x: &[R], a: &[R], b: &[R]) -> R {
        dot(a, b)
    }

    fn acceleration<R: Real>(&self, x: &[R], v: &[R], out: &mut [R]) {
        let c = -dot(v, v) / dot(x, x);
        for (o, xi) in out.iter_mut().zip(x) {
            *o = c * *xi;
        }
    }

    fn closed_form_exp<R: Real>(&self, q: &[R], v: &[R]) -> Option<(Vec<R>, Vec<R>)> {
        let theta2 = dot(v, v);
        let (c, sinc) = cos_sinc(theta2);
        let x = q.iter().zip(v).map(|(qi, vi)| c * *qi + sinc * *vi).collect();
        let w = q
            .iter()
            .zip(v)
            .map(|(qi, vi)| -(theta2 * sinc) * *qi + c * *vi)
            .collect();
        Some((x, w))
    }

    fn closed_form_log(&self, q: &[f64], p: &[f64], rho: f64) -> Option<Result<Segment>> {
        let c = dot(q, p);
        let w: Vec<f64> = p.iter().zip(q).map(|(pi, qi)| pi - c * qi).collect();
        let s = dot(&w, &w).sqrt();
        let theta = s.atan2(c);
        if theta >= rho || (s < 1e-300 && c < 0.0) {
            return Some(Err(Error::domain(format!(
                "distance {theta:.6} is not below the injectivity radius {rho:.6}"
            ))));
        }
        let f = if s < 1e-300 { 1.0 } else { theta / s };
        let initial: Vec<f64> = w.iter().map(|wi| f * wi).collect();
        let (ct, st) = (theta.cos(), theta.sin());
        let terminal = q
            .iter()
            .zip(&initial)
            .map(|(qi, vi)| -theta * st * qi + ct * vi)
            .collect();
        Some(Ok(Segment {
            initial,
            terminal,
            length: theta,
        }))
    }
}

/// Ellipsoid `Σ x_i²/a_i² = 1` pulled back to `S^n` by `x ↦ diag(a)·x`,
/// i.e. `G = diag(a_i²)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Ellipsoid {
    axes: Vec<f64>,
    sq: Vec<f64>,
}

impl Ellipsoid {
    pub fn new(axes: &[f64]) -> Result<Self> {
        if axes.len() < 3 {
            return Err(Error::Config(format!(
                "ellipsoid needs at least 3 semi-axes, got {}",
                axes.len()
            )));
        }
        if axes.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
            return Err(Error::Config(format!("ellipsoid semi-axes must be positive: {axes:?}")));
        }
        Ok(Ellipsoid {
            axes: axes.to_vec(),
            sq: axes.iter().map(|a| a * a).collect(),
        })
    }

    pub fn axes(&self) -> &[f64] {
        &self.axes
    }
}

impl Metric for Ellipsoid {
    fn dim(&self) -> usize {
        self.axes.len() - 1
    }

    /// Conservative bound `min(a_i)·π/2`.
    fn injectivity_radius(&self) -> f64 {
        self.axes.iter().copied().fold(f64::INFINITY, f64::min) * PI / 2.0
    }

    fn name(&self) -> &'static str {
        "ellipsoid"
    }

    fn params(&self) -> Vec<f64> {
        self.axes.clone()
    }

    fn ambient_metric<R: Real>(&self, x: &[R], out: &mut [R]) {
        let d = x.len();
        for i in 0..d {
            for j in 0..d {
                out[i * d + j] = if i == j { R::cst(self.sq[i]) } else { R::zero() };
            }
        }
    }

    fn ambient_metric_partial<R: Real>(&self, _x: &[R], _l: usize, out: &mut [R]) {
        out.iter_mut().for_each(|o| *o = R::zero());
    }

    fn inner<R: Real>(&self, _x: &[R], a: &[R], b: &[R]) -> R {
        let mut s = R::zero();
        for ((ai, bi), g) in a.iter().zip(b).zip(&self.sq) {
            s += (*ai * *bi).scale(*g);
        }
        s
    }

    fn acceleration<R: Real>(&self, x: &[R], v: &[R], out: &mut [R]) {
        // G ẍ = μ x, x·ẍ = −|ẋ|²
        let mut xz = R::zero();
        for (xi, g) in x.iter().zip(&self.sq) {
            xz += (*xi * *xi).scale(1.0 / g);
        }
        let mu = -dot(v, v) / xz;
        for ((o, xi), g) in out.iter_mut().zip(x).zip(&self.sq) {
            *o = (mu * *xi).scale(1.0 / g);
        }
    }
}

/// Rotationally symmetric Zoll metric on `S²`
/// `(1 + h(cos r))² dr² + sin² r dθ²` with odd profile `h(t) = a·t(1 − t²)`.
///
/// In ambient coordinates `G = I + φ(x₃) e₃e₃ᵀ`, `φ(t) = 2at + a²t²(1 − t²)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ZollRevolution {
    amplitude: f64,
    rho: f64,
}

impl ZollRevolution {
    pub fn new(amplitude: f64) -> Result<Self> {
        if !(amplitude.abs() < 0.5) {
            return Err(Error::Config(format!(
                "Zoll amplitude must satisfy |a| < 0.5 (positive curvature), got {amplitude}"
            )));
        }
        let rho = PI / Self::max_curvature_of(amplitude).sqrt();
        Ok(ZollRevolution { amplitude, rho })
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    /// Profile `h(t)` with `t = cos r = x₃`.
    pub fn profile(&self, t: f64) -> f64 {
        self.amplitude * t * (1.0 - t * t)
    }

    /// Gaussian curvature as a function of the height `t = x₃`.
    pub fn curvature(&self, t: f64) -> f64 {
        Self::curvature_of(self.amplitude, t)
    }

    fn curvature_of(a: f64, t: f64) -> f64 {
        let w = 1.0 + a * t * (1.0 - t * t);
        (1.0 + 2.0 * a * t * t * t) / (w * w * w)
    }

    fn max_curvature_of(a: f64) -> f64 {
        let n = 4000;
        let (mut best, mut bt) = (f64::NEG_INFINITY, 0.0);
        for i in 0..=n {
            let t = -1.0 + 2.0 * i as f64 / n as f64;
            let k = Self::curvature_of(a, t);
            if k > best {
                best = k;
                bt = t;
            }
        }
        // golden-section polish inside the bracketing cell
        let h = 2.0 / n as f64;
        let (mut lo, mut hi) = ((bt - h).max(-1.0), (bt + h).min(1.0));
        let g = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..80 {
            let m1 = hi - g * (hi - lo);
            let m2 = lo + g * (hi - lo);
            if Self::curvature_of(a, m1) > Self::curvature_of(a, m2) {
                hi = m2;
            } else {
                lo = m1;
            }
        }
        best.max(Self::curvature_of(a, 0.5 * (lo + hi)))
    }

    #[inline]
    fn phi<R: Real>(&self, t: R) -> R {
        let a = self.amplitude;
        let t2 = t * t;
        t.scale(2.0 * a) + (t2 * (R::one() - t2)).scale(a * a)
    }

    #[inline]
    fn dphi<R: Real>(&self, t: R) -> R {
        let a = self.amplitude;
        let t2 = t * t;
        R::cst(2.0 * a) + (t.scale(2.0) - (t2 * t).scale(4.0)).scale(a * a)
    }
}

impl Metric for ZollRevolution {
    fn dim(&self) -> usize {
        2
    }

    /// Klingenberg bound `π/√K_max`.
    fn injectivity_radius(&self) -> f64 {
        self.rho
    }

    fn name(&self) -> &'static str {
        "revolution_zoll"
    }

    fn params(&self) -> Vec<f64> {
        vec![self.amplitude]
    }

    fn ambient_metric<R: Real>(&self, x: &[R], out: &mut [R]) {
        for i in 0..3 {
            for j in 0..3 {
                out[i * 3 + j] = if i == j { R::one() } else { R::zero() };
            }
        }
        out[8] += self.phi(x[2]);
    }

    fn ambient_metric_partial<R: Real>(&self, x: &[R], l: usize, out: &mut [R]) {
        out.iter_mut().for_each(|o| *o = R::zero());
        if l == 2 {
            out[8] = self.dphi(x[2]);
        }
    }

    fn inner<R: Real>(&self, x: &[R], a: &[R], b: &[R]) -> R {
        dot(a, b) + self.phi(x[2]) * a[2] * b[2]
    }

    fn acceleration<R: Real>(&self, x: &[R], v: &[R], out: &mut [R]) {
        // B(v,v) = ½φ'(x₃)v₃² e₃ ; G⁻¹ = I − φ/(1+φ) e₃e₃ᵀ
        let phi = self.phi(x[2]);
        let inv = R::one() / (R::one() + phi);
        let y3 = (self.dphi(x[2]) * v[2] * v[2]).scale(0.5) * inv;
        let z3 = x[2] * inv;
        let xz = x[0] * x[0] + x[1] * x[1] + x[2] * z3;
        let mu = (x[2] * y3 - dot(v, v)) / xz;
        out[0] = mu * x[0];
        out[1] = mu * x[1];
        out[2] = mu * z3 - y3;
    }
}

/// Closed set of built-in models, dispatched statically.
#[derive(Clone, Debug, PartialEq)]
pub enum Model {
    Round(RoundSphere),
    Ellipsoid(Ellipsoid),
    Zoll(ZollRevolution),
}

macro_rules! dispatch {
    ($self:ident, $m:ident => $e:expr) => {
        match $self {
            Model::Round($m) => $e,
            Model::Ellipsoid($m) => $e,
            Model::Zoll($m) => $e,
        }
    };
}

impl Metric for Model {
    fn dim(&self) -> usize {
        dispatch!(self, m => m.dim())
    }
    fn injectivity_radius(&self) -> f64 {
        dispatch!(self, m => m.injectivity_radius())
    }
    fn name(&self) -> &'static str {
        dispatch!(self, m => m.name())
    }
    fn params(&self) -> Vec<f64> {
        dispatch!(self, m => m.params())
    }
    fn ambient_metric<R: Real>(&self, x: &[R], out: &mut [R]) {
        dispatch!(self, m => m.ambient_metric(x, out))
    }
    fn ambient_metric_partial<R: Real>(&self, x: &[R], l: usize, out: &mut [R]) {
        dispatch!(self, m => m.ambient_metric_partial(x, l, out))
    }
    fn inner<R: Real>(&self, x: &[R], a: &[R], b: &[R]) -> R {
        dispatch!(self, m => m.inner(x, a, b))
    }
    fn acceleration<R: Real>(&self, x: &[R], v: &[R], out: &mut [R]) {
        dispatch!(self, m => m.acceleration(x, v, out))
    }
    fn closed_form_exp<R: Real>(&self, q: &[R], v: &[R]) -> Option<(Vec<R>, Vec<R>)> {
        dispatch!(self, m => m.closed_form_exp(q, v))
    }
    fn closed_form_log(&self, q: &[f64], p: &[f64], rho: f64) -> Option<Result<Segment>> {
        dispatch!(self, m => m.closed_form_log(q, p, rho))
    }
}

/// Serializable metric description: `{ "model": ..., "dim": n, "params": [...] }`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricSpec {
    pub model: String,
    pub dim: usize,
    #[serde(default)]
    pub params: Vec<f64>,
    /// Override of the declared injectivity radius.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
}

impl MetricSpec {
    pub fn round(dim: usize) -> Self {
        MetricSpec {
            model: "round".into(),
            dim,
            params: Vec::new(),
            rho: None,
        }
    }

    pub fn ellipsoid(axes: &[f64]) -> Self {
        MetricSpec {
            model: "ellipsoid".into(),
            dim: axes.len().saturating_sub(1),
            params: axes.to_vec(),
            rho: None,
        }
    }

    pub fn zoll(amplitude: f64) -> Self {
        MetricSpec {
            model: "revolution_zoll".into(),
            dim: 2,
            params: vec![amplitude],
            rho: None,
        }
    }

    /// Spec of an existing model; the radius is recorded only when overridden.
    pub fn of<M: Metric>(model: &MetricModel<M>) -> Self {
        let declared = model.metric.injectivity_radius();
        MetricSpec {
            model: model.name().into(),
            dim: model.dim(),
            params: model.params(),
            rho: (model.rho() != declared).then_some(model.rho()),
        }
    }

    pub fn build_metric(&self) -> Result<Model> {
        match self.model.as_str() {
            "round" => {
                if !self.params.is_empty() {
                    return Err(Error::Config("round model takes no params".into()));
                }
                Ok(Model::Round(RoundSphere::new(self.dim)?))
            }
            "ellipsoid" => {
                if self.params.len() != self.dim + 1 {
                    return Err(Error::Config(format!(
                        "ellipsoid of dim {} needs {} semi-axes in params, got {}",
                        self.dim,
                        self.dim + 1,
                        self.params.len()
                    )));
                }
                Ok(Model::Ellipsoid(Ellipsoid::new(&self.params)?))
            }
            "revolution_zoll" => {
                if self.dim != 2 {
                    return Err(Error::Config(format!(
                        "revolution_zoll is only defined for dim 2, got {}",
                        self.dim
                    )));
                }
                if self.params.len() != 1 {
                    return Err(Error::Config(format!(
                        "revolution_zoll takes one param (amplitude), got {}",
                        self.params.len()
                    )));
                }
                Ok(Model::Zoll(ZollRevolution::new(self.params[0])?))
            }
            other => Err(Error::Config(format!(
                "unknown metric model '{other}' (expected round, ellipsoid or revolution_zoll)"
            ))),
        }
    }

    pub fn build(&self) -> Result<MetricModel<Model>> {
        let model = MetricModel::new(self.build_metric()?);
        match self.rho {
            Some(r) => model.with_rho(r),
            None => Ok(model),
        }
    }
}
