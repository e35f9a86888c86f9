use super::integrator::{integrate_adaptive, integrate_fixed, IntegratorConfig};
use super::{check_point, lowered_symbols, spd_solve, Metric, MetricModel, Segment, TangentVector};
use crate::error::{Error, Result};
use crate::real::{Dual, Real};
use crate::vecops::{dist_euclid, dot, lift, norm, project_tangent, sphere_tangent_basis};

/// End state of a geodesic shot.
#[derive(Clone, Debug, PartialEq)]
pub struct ShootingResult {
    pub end_point: Vec<f64>,
    pub end_velocity: Vec<f64>,
    pub elapsed: f64,
    pub error_estimate: f64,
    pub steps: usize,
}

/// Symbols `C^k_ij` of the induced connection in ambient coordinates, laid out
/// as `C[k·d² + i·d + j]`, such that the geodesic equation reads
/// `ẍ^k = −C^k_ij ẋ^i ẋ^j` for `ẋ ∈ T_x S^n`.
pub fn christoffel<M: Metric>(model: &MetricModel<M>, x: &[f64]) -> Vec<f64> {
    let d = x.len();
    let g = model.metric_matrix(x);
    let b = lowered_symbols(&model.metric, x);
    let z = spd_solve(&g, x);
    let xz = dot(x, &z);
    let mut out = vec![0.0; d * d * d];
    let mut col = vec![0.0; d];
    for i in 0..d {
        for j in 0..d {
            for l in 0..d {
                col[l] = b[l * d * d + i * d + j];
            }
            let y = spd_solve(&g, &col);
            let delta = if i == j { 1.0 } else { 0.0 };
            let mu = (dot(x, &y) - delta) / xz;
            for k in 0..d {
                out[k * d * d + i * d + j] = y[k] - mu * z[k];
            }
        }
    }
    out
}

/// Christoffel symbols of the ambient metric `G` itself on `R^{n+1}`
/// (zero when `G` has constant coefficients).
pub fn ambient_christoffel<M: Metric>(model: &MetricModel<M>, x: &[f64]) -> Vec<f64> {
    let d = x.len();
    let g = model.metric_matrix(x);
    let b = lowered_symbols(&model.metric, x);
    let mut out = vec![0.0; d * d * d];
    let mut col = vec![0.0; d];
    for i in 0..d {
        for j in 0..d {
            for l in 0..d {
                col[l] = b[l * d * d + i * d + j];
            }
            let y = spd_solve(&g, &col);
            for k in 0..d {
                out[k * d * d + i * d + j] = y[k];
            }
        }
    }
    out
}

fn state(q: &[f64], v: &[f64]) -> Vec<f64> {
    let mut y = Vec::with_capacity(2 * q.len());
    y.extend_from_slice(q);
    y.extend_from_slice(v);
    y
}

fn split(y: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let d = y.len() / 2;
    (y[..d].to_vec(), y[d..].to_vec())
}

impl<M: Metric> MetricModel<M> {
    pub fn christoffel(&self, x: &[f64]) -> Vec<f64> {
        christoffel(self, x)
    }

    /// Integrate the geodesic with `γ(0) = q`, `γ̇(0) = v` up to parameter `t`.
    pub fn geodesic_shoot(&self, q: &[f64], v: &[f64], t: f64) -> Result<ShootingResult> {
        self.shoot_with(q, v, t, &self.integrator)
    }

    pub(crate) fn shoot_with(&self, q: &[f64], v: &[f64], t: f64, cfg: &IntegratorConfig) -> Result<ShootingResult> {
        check_point(q, self.ambient_dim())?;
        if v.len() != q.len() {
            return Err(Error::domain("velocity has the wrong number of coordinates"));
        }
        if !(t >= 0.0) {
            return Err(Error::domain(format!("shooting time must be non-negative, got {t}")));
        }
        let v = project_tangent(q, v);
        let out = integrate_adaptive(&self.metric, &state(q, &v), t, cfg, |_, _| {})?;
        let (end_point, end_velocity) = split(&out.y);
        Ok(ShootingResult {
            end_point,
            end_velocity,
            elapsed: t,
            error_estimate: out.error,
            steps: out.steps,
        })
    }

    /// States `(γ(t), γ̇(t))` at the requested non-decreasing times.
    pub fn shoot_to_times(&self, q: &[f64], v: &[f64], times: &[f64]) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
        check_point(q, self.ambient_dim())?;
        let mut y = state(q, &project_tangent(q, v));
        let mut t = 0.0;
        let mut out = Vec::with_capacity(times.len());
        for &s in times {
            if s < t {
                return Err(Error::domain("output times must be non-decreasing"));
            }
            if s > t {
                y = integrate_adaptive(&self.metric, &y, s - t, &self.integrator, |_, _| {})?.y;
                t = s;
            }
            out.push(split(&y));
        }
        Ok(out)
    }

    /// `samples + 1` equally spaced points of `γ` on `[0, t]`.
    pub fn trajectory(&self, q: &[f64], v: &[f64], t: f64, samples: usize) -> Result<Vec<Vec<f64>>> {
        let samples = samples.max(1);
        let times: Vec<f64> = (0..=samples).map(|i| t * i as f64 / samples as f64).collect();
        Ok(self.shoot_to_times(q, v, &times)?.into_iter().map(|(x, _)| x).collect())
    }

    /// `(exp_q(v), d/dt exp_q(tv)|_{t=1})` as a smooth map of `(q, v)`.
    /// Closed form when the model has one, fixed-step integration otherwise.
    pub fn exp_with_velocity<R: Real>(&self, q: &[R], v: &[R]) -> (Vec<R>, Vec<R>) {
        if let Some(r) = self.metric.closed_form_exp(q, v) {
            return r;
        }
        let d = q.len();
        let mut y = Vec::with_capacity(2 * d);
        y.extend_from_slice(q);
        y.extend_from_slice(v);
        let y = integrate_fixed(&self.metric, &y, 1.0, self.integrator.short_steps);
        (y[..d].to_vec(), y[d..].to_vec())
    }

    /// `exp_q(v)`; fails with a domain error when `‖v‖_g ≥ ρ`.
    pub fn exp_map(&self, q: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        check_point(q, self.ambient_dim())?;
        let n = self.norm(q, v);
        if n >= self.rho() {
            return Err(Error::domain(format!(
                "|v|_g = {n:.6} is not below the injectivity radius {:.6}",
                self.rho()
            )));
        }
        Ok(self.exp_with_velocity(q, &project_tangent(q, v)).0)
    }

    /// `exp_q(v)` without the injectivity check.
    pub fn exp_map_unchecked(&self, q: &[f64], v: &[f64]) -> Vec<f64> {
        self.exp_with_velocity(q, &project_tangent(q, v)).0
    }

    pub fn log_map(&self, q: &[f64], p: &[f64]) -> Result<TangentVector> {
        let s = self.log_segment(q, p, None)?;
        Ok(TangentVector {
            base: q.to_vec(),
            vector: s.initial,
            norm: s.length,
        })
    }

    pub fn dist(&self, q: &[f64], p: &[f64]) -> Result<f64> {
        Ok(self.log_segment(q, p, None)?.length)
    }

    /// Shortest geodesic from `q` to `p`. `hint` is an approximate initial
    /// velocity (e.g. from a nearby configuration).
    pub fn log_segment(&self, q: &[f64], p: &[f64], hint: Option<&[f64]>) -> Result<Segment> {
        if let Some(r) = self.metric.closed_form_log(q, p, self.rho()) {
            return r;
        }
        let d = q.len();
        if dist_euclid(q, p) < 1e-15 {
            return Ok(Segment {
                initial: vec![0.0; d],
                terminal: vec![0.0; d],
                length: 0.0,
            });
        }
        let basis = sphere_tangent_basis(q);
        let n = basis.len();
        let mut v = match hint {
            Some(h) => project_tangent(q, h),
            None => {
                let c = dot(q, p);
                let w: Vec<f64> = p.iter().zip(q).map(|(pi, qi)| pi - c * qi).collect();
                let s = norm(&w);
                if s < 1e-300 {
                    return Err(Error::domain("antipodal points are beyond the injectivity radius"));
                }
                let theta = s.atan2(c);
                w.iter().map(|wi| theta / s * wi).collect()
            }
        };
        let qd = lift(q);
        let jacobian = |v: &[f64]| -> nalgebra::DMatrix<f64> {
            let mut j = nalgebra::DMatrix::zeros(d, n);
            for (c, b) in basis.iter().enumerate() {
                let (x1, _) = self.exp_with_velocity(&qd, &Dual::seed(v, b));
                for r in 0..d {
                    j[(r, c)] = x1[r].du;
                }
            }
            j
        };
        let residual = |v: &[f64]| -> (Vec<f64>, Vec<f64>, f64) {
            let (x1, w1) = self.exp_with_velocity(q, v);
            let r: Vec<f64> = x1.iter().zip(p).map(|(a, b)| a - b).collect();
            let rn = norm(&r);
            (r, w1, rn)
        };
        let (mut r, mut w1, mut rn) = residual(&v);
        let mut jac = jacobian(&v);
        let mut fresh = true;
        let mut converged = rn < 1e-15;
        for _ in 0..60 {
            if converged {
                break;
            }
            let rv = nalgebra::DVector::from_column_slice(&r);
            let jt = jac.transpose();
            let step = match (&jt * &jac).cholesky() {
                Some(ch) => ch.solve(&(-(&jt * rv))),
                None => {
                    return Err(Error::ConvergenceFailure("singular shooting Jacobian".into()));
                }
            };
            let mut lam = 1.0;
            let mut accepted = false;
            for _ in 0..12 {
                let mut vn = v.clone();
                for (c, b) in basis.iter().enumerate() {
                    for (vi, bi) in vn.iter_mut().zip(b) {
                        *vi += lam * step[c] * bi;
                    }
                }
                let (rr, ww, rrn) = residual(&vn);
                if rrn < rn {
                    let ratio = rrn / rn;
                    let small = rrn < 1e-15 || (rn < 1e-12 && ratio > 0.5);
                    v = vn;
                    r = rr;
                    w1 = ww;
                    rn = rrn;
                    accepted = true;
                    if small {
                        converged = true;
                    } else if ratio > 0.1 {
                        jac = jacobian(&v);
                        fresh = true;
                    } else {
                        fresh = false;
                    }
                    break;
                }
                lam *= 0.5;
            }
            if !accepted {
                if rn < 1e-11 {
                    converged = true;
                    break;
                }
                if fresh {
                    break;
                }
                jac = jacobian(&v);
                fresh = true;
            }
            if self.norm(q, &v) > 4.0 * self.rho() {
                break;
            }
        }
        if !converged && rn > 1e-11 {
            return Err(Error::ConvergenceFailure(format!(
                "shooting residual stalled at {rn:.3e}"
            )));
        }
        let length = self.norm(q, &v);
        if length >= self.rho() {
            return Err(Error::domain(format!(
                "distance {length:.6} is not below the injectivity radius {:.6}",
                self.rho()
            )));
        }
        Ok(Segment {
            initial: v,
            terminal: w1,
            length,
        })
    }

    /// Smallest `t ∈ (0, t_max]` at which the geodesic through `(q, v)`
    /// returns to its initial phase-space state within `tol`.
    pub fn detect_closure(&self, q: &[f64], v: &[f64], t_max: f64, tol: f64) -> Result<Option<f64>> {
        check_point(q, self.ambient_dim())?;
        if !(t_max > 0.0) {
            return Err(Error::domain(format!("t_max must be positive, got {t_max}")));
        }
        let v0 = self.normalize(q, &project_tangent(q, v));
        let mut cfg = self.integrator.clone();
        cfg.h_max = cfg.h_max.min(0.05);
        let mut rec: Vec<(f64, Vec<f64>)> = Vec::new();
        integrate_adaptive(&self.metric, &state(q, &v0), t_max, &cfg, |t, y| rec.push((t, y.to_vec())))?;
        let phase = |y: &[f64]| -> f64 {
            let (x, w) = y.split_at(q.len());
            (dist_euclid(x, q).powi(2) + dist_euclid(w, &v0).powi(2)).sqrt()
        };
        let f: Vec<f64> = rec.iter().map(|(_, y)| phase(y)).collect();
        let coarse = 0.25;
        let mut risen = false;
        for j in 1..rec.len() {
            if f[j] > 2.0 * coarse {
                risen = true;
            }
            if !risen || f[j] > coarse || f[j] > f[j - 1] {
                continue;
            }
            if j + 1 < rec.len() && f[j] > f[j + 1] {
                continue;
            }
            let (t0, y0) = (&rec[j - 1].0, &rec[j - 1].1);
            let t1 = if j + 1 < rec.len() { rec[j + 1].0 } else { rec[j].0 };
            let eval = |t: f64| -> Result<f64> {
                let y = integrate_adaptive(&self.metric, y0, t - t0, &self.integrator, |_, _| {})?.y;
                Ok(phase(&y))
            };
            let g = 0.5 * (5f64.sqrt() - 1.0);
            let (mut a, mut b) = (*t0, t1);
            let mut c = b - g * (b - a);
            let mut e = a + g * (b - a);
            let mut fc = eval(c)?;
            let mut fe = eval(e)?;
            while b - a > 1e-11 {
                if fc < fe {
                    b = e;
                    e = c;
                    fe = fc;
                    c = b - g * (b - a);
                    fc = eval(c)?;
                } else {
                    a = c;
                    c = e;
                    fc = fe;
                    e = a + g * (b - a);
                    fe = eval(e)?;
                }
            }
            let (t, ft) = if fc < fe { (c, fc) } else { (e, fe) };
            if ft < tol && t <= t_max {
                return Ok(Some(t));
            }
        }
        Ok(None)
    }
}
