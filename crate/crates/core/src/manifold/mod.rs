//! Riemannian metrics on `S^n`, presented in the embedding coordinates of
//! `S^n ⊂ R^{n+1}`, together with geodesic integration, exponential and
//! logarithm maps, distance and closure detection.
//!
//! A metric is given by an ambient symmetric tensor field `G(x)` whose
//! restriction to `T_x S^n = x^⊥` is the metric of interest. Geodesics of the
//! restricted metric are curves on the sphere whose ambient covariant
//! acceleration is `G`-normal to the sphere, which is what
//! [`levi_civita_acceleration`] solves for.

mod geodesic;
mod integrator;
mod models;

pub use geodesic::{christoffel, ambient_christoffel, ShootingResult};
pub use integrator::IntegratorConfig;
pub use models::{Ellipsoid, MetricSpec, Model, RoundSphere, ZollRevolution};

use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::Real;
use crate::vecops::{dot, normalized, project_tangent, sphere_tangent_basis};

/// Ambient description of a Riemannian metric on `S^n`.
///
/// Implementors provide `G(x)` and its first partial derivatives; everything
/// else has a default. Models with closed-form geodesics can override
/// [`Metric::closed_form_exp`] and [`Metric::closed_form_log`], and models with
/// a cheap geodesic equation can override [`Metric::acceleration`].
pub trait Metric: Send + Sync {
    /// Intrinsic dimension `n` (the ambient dimension is `n + 1`).
    fn dim(&self) -> usize;

    /// Analytic injectivity radius, or a certified lower bound for it.
    fn injectivity_radius(&self) -> f64;

    fn name(&self) -> &'static str;

    fn params(&self) -> Vec<f64>;

    /// `G(x)`, row-major `(n+1)×(n+1)`.
    fn ambient_metric<R: Real>(&self, x: &[R], out: &mut [R]);

    /// `∂G/∂x_l`, row-major `(n+1)×(n+1)`.
    fn ambient_metric_partial<R: Real>(&self, x: &[R], l: usize, out: &mut [R]);

    fn inner<R: Real>(&self, x: &[R], a: &[R], b: &[R]) -> R {
        let d = x.len();
        let mut g = vec![R::zero(); d * d];
        self.ambient_metric(x, &mut g);
        let mut s = R::zero();
        for i in 0..d {
            let mut row = R::zero();
            for j in 0..d {
                row += g[i * d + j] * b[j];
            }
            s += a[i] * row;
        }
        s
    }

    /// Geodesic acceleration `ẍ` at `(x, v)` in ambient coordinates.
    fn acceleration<R: Real>(&self, x: &[R], v: &[R], out: &mut [R]) {
        levi_civita_acceleration(self, x, v, out)
    }

    /// `(exp_q(v), d/dt exp_q(tv)|_{t=1})` when available in closed form.
    fn closed_form_exp<R: Real>(&self, _q: &[R], _v: &[R]) -> Option<(Vec<R>, Vec<R>)> {
        None
    }

    /// Closed-form logarithm, if available. `rho` is the declared injectivity radius.
    fn closed_form_log(&self, _q: &[f64], _p: &[f64], _rho: f64) -> Option<Result<Segment>> {
        None
    }
}

/// Symmetric bilinear form `B_l(v, w) = ½(∂_i G_lj + ∂_j G_li − ∂_l G_ij) v^i w^j`
/// (the lowered ambient Christoffel symbols), returned as `B[l][i][j]`.
pub(crate) fn lowered_symbols<M: Metric + ?Sized, R: Real>(m: &M, x: &[R]) -> Vec<R> {
    let d = x.len();
    let mut dg = vec![R::zero(); d * d * d];
    for l in 0..d {
        m.ambient_metric_partial(x, l, &mut dg[l * d * d..(l + 1) * d * d]);
    }
    // dg[l][a][b] = ∂_l G_ab
    let at = |l: usize, a: usize, b: usize| dg[l * d * d + a * d + b];
    let half = R::cst(0.5);
    let mut out = vec![R::zero(); d * d * d];
    for l in 0..d {
        for i in 0..d {
            for j in 0..d {
                out[l * d * d + i * d + j] = half * (at(i, l, j) + at(j, l, i) - at(l, i, j));
            }
        }
    }
    out
}

/// Solve `G y = b` for symmetric positive-definite `G` (row-major) by Cholesky.
pub(crate) fn spd_solve<R: Real>(g: &[R], rhs: &[R]) -> Vec<R> {
    let d = rhs.len();
    let mut l = vec![R::zero(); d * d];
    for i in 0..d {
        for j in 0..=i {
            let mut s = g[i * d + j];
            for k in 0..j {
                s -= l[i * d + k] * l[j * d + k];
            }
            if i == j {
                l[i * d + i] = s.sqrt();
            } else {
                l[i * d + j] = s / l[j * d + j];
            }
        }
    }
    let mut y = rhs.to_vec();
    for i in 0..d {
        let mut s = y[i];
        for k in 0..i {
            s -= l[i * d + k] * y[k];
        }
        y[i] = s / l[i * d + i];
    }
    for i in (0..d).rev() {
        let mut s = y[i];
        for k in i + 1..d {
            s -= l[k * d + i] * y[k];
        }
        y[i] = s / l[i * d + i];
    }
    y
}

/// Generic geodesic acceleration from `G` and `∂G`:
/// `G ẍ = −B(ẋ,ẋ) + μ x` with `μ` fixed by `x·ẍ = −|ẋ|²` (the sphere constraint).
pub fn levi_civita_acceleration<M: Metric + ?Sized, R: Real>(m: &M, x: &[R], v: &[R], out: &mut [R]) {
    let d = x.len();
    let mut g = vec![R::zero(); d * d];
    m.ambient_metric(x, &mut g);
    let b = lowered_symbols(m, x);
    let mut bv = vec![R::zero(); d];
    for l in 0..d {
        let mut s = R::zero();
        for i in 0..d {
            for j in 0..d {
                s += b[l * d * d + i * d + j] * v[i] * v[j];
            }
        }
        bv[l] = s;
    }
    let y = spd_solve(&g, &bv);
    let z = spd_solve(&g, x);
    let mu = (dot(x, &y) - dot(v, v)) / dot(x, &z);
    for k in 0..d {
        out[k] = mu * z[k] - y[k];
    }
}

/// Tangent vector with its base point and cached `g`-norm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TangentVector {
    pub base: Vec<f64>,
    pub vector: Vec<f64>,
    pub norm: f64,
}

impl TangentVector {
    pub fn new<M: Metric>(model: &MetricModel<M>, base: Vec<f64>, vector: Vec<f64>) -> Self {
        let norm = model.norm(&base, &vector);
        TangentVector { base, vector, norm }
    }

    /// Unit (`g`-norm) direction. Zero vectors map to zero.
    pub fn direction(&self) -> Vec<f64> {
        if self.norm == 0.0 {
            return self.vector.clone();
        }
        self.vector.iter().map(|x| x / self.norm).collect()
    }
}

/// Minimizing geodesic segment `c(t) = exp_q(t·initial)`, `t ∈ [0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Segment {
    /// `ċ(0) = exp_q^{-1}(p)`.
    pub initial: Vec<f64>,
    /// `ċ(1)`, tangent at the end point.
    pub terminal: Vec<f64>,
    pub length: f64,
}

/// A metric on `S^n` together with its declared injectivity radius and the
/// integrator settings used for its geodesics.
#[derive(Clone, Debug)]
pub struct MetricModel<M: Metric = Model> {
    pub metric: M,
    rho: f64,
    pub integrator: IntegratorConfig,
}

impl<M: Metric> MetricModel<M> {
    pub fn new(metric: M) -> Self {
        let rho = metric.injectivity_radius();
        MetricModel {
            metric,
            rho,
            integrator: IntegratorConfig::default(),
        }
    }

    /// Override the declared injectivity radius.
    pub fn with_rho(mut self, rho: f64) -> Result<Self> {
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::Config(format!("injectivity radius must be positive, got {rho}")));
        }
        self.rho = rho;
        Ok(self)
    }

    pub fn with_integrator(mut self, integrator: IntegratorConfig) -> Self {
        self.integrator = integrator;
        self
    }

    pub fn dim(&self) -> usize {
        self.metric.dim()
    }

    pub fn ambient_dim(&self) -> usize {
        self.metric.dim() + 1
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn name(&self) -> &'static str {
        self.metric.name()
    }

    pub fn params(&self) -> Vec<f64> {
        self.metric.params()
    }

    pub fn spec(&self) -> MetricSpec {
        MetricSpec::of(self)
    }

    pub fn inner(&self, x: &[f64], a: &[f64], b: &[f64]) -> f64 {
        self.metric.inner(x, a, b)
    }

    pub fn norm(&self, x: &[f64], a: &[f64]) -> f64 {
        self.metric.inner(x, a, a).max(0.0).sqrt()
    }

    /// Ambient metric matrix at `x` (row-major).
    pub fn metric_matrix(&self, x: &[f64]) -> Vec<f64> {
        let d = x.len();
        let mut g = vec![0.0; d * d];
        self.metric.ambient_metric(x, &mut g);
        g
    }

    /// Scale a tangent vector to unit `g`-norm.
    pub fn normalize(&self, x: &[f64], v: &[f64]) -> Vec<f64> {
        let n = self.norm(x, v);
        v.iter().map(|c| c / n).collect()
    }

    /// `g`-orthonormal basis of `T_x S^n`.
    pub fn tangent_frame(&self, x: &[f64]) -> Vec<Vec<f64>> {
        gram_schmidt(self, x, sphere_tangent_basis(x), None)
    }

    /// `g`-orthonormal basis of the `g`-orthogonal complement of `u` in `T_x S^n`.
    pub fn complement_frame(&self, x: &[f64], u: &[f64]) -> Vec<Vec<f64>> {
        gram_schmidt(self, x, sphere_tangent_basis(x), Some(u))
    }

    /// Project an arbitrary ambient vector to `T_x S^n` (Euclidean projection).
    pub fn project(&self, x: &[f64], v: &[f64]) -> Vec<f64> {
        project_tangent(x, v)
    }

    pub fn tangent(&self, base: &[f64], vector: &[f64]) -> TangentVector {
        TangentVector::new(self, base.to_vec(), vector.to_vec())
    }

    /// Eigenvalues of the metric restricted to `T_x S^n` in a Euclidean
    /// orthonormal tangent frame.
    pub fn tangent_eigenvalues(&self, x: &[f64]) -> Vec<f64> {
        let basis = sphere_tangent_basis(x);
        let n = basis.len();
        let m = nalgebra::DMatrix::from_fn(n, n, |i, j| self.inner(x, &basis[i], &basis[j]));
        let mut ev: Vec<f64> = m.symmetric_eigen().eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }
}

/// `g`-Gram–Schmidt of `candidates` in `T_x S^n`. When `lead` is given it is
/// orthonormalised first and then dropped, yielding a basis of its complement.
fn gram_schmidt<M: Metric>(
    model: &MetricModel<M>,
    x: &[f64],
    candidates: Vec<Vec<f64>>,
    lead: Option<&[f64]>,
) -> Vec<Vec<f64>> {
    let n = candidates.len();
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    if let Some(u) = lead {
        out.push(model.normalize(x, &project_tangent(x, u)));
    }
    let start = out.len();
    // Orthogonalise all candidates, then keep the `n - start` with the largest
    // residuals so the dropped direction is the one most parallel to `lead`.
    let mut residuals: Vec<(f64, Vec<f64>)> = Vec::new();
    for c in candidates {
        let mut w = c;
        for e in &out {
            let p = model.inner(x, &w, e);
            for (wi, ei) in w.iter_mut().zip(e) {
                *wi -= p * ei;
            }
        }
        let r = model.norm(x, &w);
        residuals.push((r, w));
    }
    if start == 0 {
        // plain Gram–Schmidt in candidate order
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(n);
        for (_, c) in residuals {
            let mut w = c;
            for e in &basis {
                let p = model.inner(x, &w, e);
                for (wi, ei) in w.iter_mut().zip(e) {
                    *wi -= p * ei;
                }
            }
            basis.push(model.normalize(x, &w));
        }
        return basis;
    }
    let mut order: Vec<usize> = (0..residuals.len()).collect();
    order.sort_by(|&a, &b| residuals[b].0.total_cmp(&residuals[a].0).then(a.cmp(&b)));
    let mut keep: Vec<usize> = order[..n - start].to_vec();
    keep.sort_unstable();
    let mut basis: Vec<Vec<f64>> = out.clone();
    for idx in keep {
        let mut w = residuals[idx].1.clone();
        for e in &basis {
            let p = model.inner(x, &w, e);
            for (wi, ei) in w.iter_mut().zip(e) {
                *wi -= p * ei;
            }
        }
        basis.push(model.normalize(x, &w));
    }
    basis.drain(..start);
    basis
}

/// Uniform point on the unit sphere `S^n ⊂ R^{n+1}` (Gaussian normalisation).
pub fn random_sphere_point<Rg: rand::Rng + ?Sized>(rng: &mut Rg, ambient_dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..ambient_dim).map(|_| rng.sample(StandardNormal)).collect();
        let n = crate::vecops::norm(&v);
        if n > 1e-8 {
            return normalized(&v);
        }
    }
}

/// Uniform `g`-unit direction at `x`: a Gaussian vector in a `g`-orthonormal frame.
pub fn random_unit_direction<M: Metric, Rg: rand::Rng + ?Sized>(
    model: &MetricModel<M>,
    rng: &mut Rg,
    x: &[f64],
) -> Vec<f64> {
    let frame = model.tangent_frame(x);
    loop {
        let c: Vec<f64> = (0..frame.len()).map(|_| rng.sample(StandardNormal)).collect();
        let n = crate::vecops::norm(&c);
        if n > 1e-8 {
            let mut v = vec![0.0; x.len()];
            for (ci, e) in c.iter().zip(&frame) {
                for (vi, ei) in v.iter_mut().zip(e) {
                    *vi += ci / n * ei;
                }
            }
            return v;
        }
    }
}

/// Bump an arbitrary point back onto the unit sphere.
pub fn to_sphere(x: &[f64]) -> Vec<f64> {
    normalized(x)
}

pub(crate) fn check_point(x: &[f64], ambient_dim: usize) -> Result<()> {
    if x.len() != ambient_dim {
        return Err(Error::domain(format!(
            "point has {} coordinates, expected {ambient_dim}",
            x.len()
        )));
    }
    let r = dot(x, x).sqrt();
    if (r - 1.0).abs() > 1e-8 {
        return Err(Error::domain(format!("point is not on the unit sphere (|x| = {r})")));
    }
    Ok(())
}
