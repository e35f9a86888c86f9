//! The loop space `Υ_{δ,k}M` of `k`-point configurations `(q_0, …, q_{k−1})`
//! with `d(q_0, q_1) = δ` and `Σ_{i≠0} d(q_i, q_{i+1})² < ρ²`.
//!
//! Each configuration determines a broken geodesic with breakpoint times
//! `τ_1 = δ/(δ+σ)` and equally spaced `τ_2, …, τ_k`, whose energy is
//! `(δ + σ)²` with `σ² = (k−1)·Σ_{i≠0} d(q_i, q_{i+1})²`.

mod broken;
mod chart;

pub use broken::BrokenGeodesic;
pub use chart::{ChartCoords, PrimeChart};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifold::{check_point, random_sphere_point, random_unit_direction, Metric, MetricModel, MetricSpec, Model, Segment, TangentVector};
use crate::vecops::{dist_euclid, normalized, scaled};

/// `k̄(ℓ, δ) = 1 + (ℓ−δ)²/ρ²`: any integer `k > k̄` admits the sampling of a
/// closed geodesic of length `ℓ`.
pub fn k_threshold(length: f64, delta: f64, rho: f64) -> f64 {
    1.0 + (length - delta).powi(2) / (rho * rho)
}

/// Smallest admissible `k` with one extra point of margin: `⌈k̄⌉ + 1`.
pub fn auto_k(length: f64, delta: f64, rho: f64) -> usize {
    (k_threshold(length, delta, rho).ceil() as usize + 1).max(3)
}

/// Supremum `(δ + √(k−1)·ρ)²` of the energy over `Υ_{δ,k}M`.
pub fn sup_energy(delta: f64, k: usize, rho: f64) -> f64 {
    (delta + ((k - 1) as f64).sqrt() * rho).powi(2)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoopParams {
    pub delta: f64,
    pub k: usize,
}

impl LoopParams {
    pub fn new(delta: f64, k: usize, rho: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < rho) {
            return Err(Error::Config(format!("delta must lie in (0, rho = {rho}), got {delta}")));
        }
        if k < 3 {
            return Err(Error::Config(format!("k must be at least 3, got {k}")));
        }
        Ok(LoopParams { delta, k })
    }
}

/// A metric model together with loop parameters `(δ, k)`.
#[derive(Clone, Debug)]
pub struct LoopSpace<M: Metric = Model> {
    pub model: MetricModel<M>,
    pub params: LoopParams,
}

/// A point of `Υ_{δ,k}M`. Immutable; built through [`LoopSpace::config`].
#[derive(Clone, Debug, PartialEq)]
pub struct LoopConfig {
    points: Vec<Vec<f64>>,
    dists: Vec<f64>,
    sigma: f64,
    tau: Vec<f64>,
}

impl LoopConfig {
    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn k(&self) -> usize {
        self.points.len()
    }

    /// `d(q_i, q_{i+1})`, indices mod `k`.
    pub fn dists(&self) -> &[f64] {
        &self.dists
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// `τ_0, …, τ_k`.
    pub fn breakpoints(&self) -> &[f64] {
        &self.tau
    }

    pub fn delta(&self) -> f64 {
        self.dists[0]
    }

    /// `(δ + σ)²`.
    pub fn energy(&self) -> f64 {
        (self.dists[0] + self.sigma).powi(2)
    }

    /// `Σ_i d(q_i, q_{i+1})² / (τ_{i+1} − τ_i)`.
    pub fn telescoped_energy(&self) -> f64 {
        self.dists
            .iter()
            .enumerate()
            .map(|(i, d)| d * d / (self.tau[i + 1] - self.tau[i]))
            .sum()
    }
}

/// JSON form of a configuration: parameters, metric and points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoopConfigRecord {
    pub delta: f64,
    pub k: usize,
    pub metric: MetricSpec,
    pub points: Vec<Vec<f64>>,
}

pub(crate) fn breakpoints_from(delta: f64, sigma: f64, k: usize) -> Vec<f64> {
    let t1 = delta / (delta + sigma);
    let mut tau = Vec::with_capacity(k + 1);
    tau.push(0.0);
    tau.push(t1);
    for i in 2..k {
        tau.push(t1 + (i - 1) as f64 * (1.0 - t1) / (k - 1) as f64);
    }
    tau.push(1.0);
    tau
}

impl<M: Metric> LoopSpace<M> {
    pub fn new(model: MetricModel<M>, delta: f64, k: usize) -> Result<Self> {
        let params = LoopParams::new(delta, k, model.rho())?;
        Ok(LoopSpace { model, params })
    }

    pub fn delta(&self) -> f64 {
        self.params.delta
    }

    pub fn k(&self) -> usize {
        self.params.k
    }

    pub fn rho(&self) -> f64 {
        self.model.rho()
    }

    /// Dimension `(2n−1) + (k−2)·n` of the prime chart.
    pub fn prime_dim(&self) -> usize {
        let n = self.model.dim();
        2 * n - 1 + (self.k() - 2) * n
    }

    pub fn sup_energy(&self) -> f64 {
        sup_energy(self.delta(), self.k(), self.rho())
    }

    pub fn k_threshold(&self, length: f64) -> f64 {
        k_threshold(length, self.delta(), self.rho())
    }

    /// Validate points and build the broken geodesic through them.
    pub fn reconstruct_points(&self, points: Vec<Vec<f64>>, hints: Option<&[Vec<f64>]>) -> Result<BrokenGeodesic> {
        let k = self.k();
        if points.len() != k {
            return Err(Error::domain(format!("expected {k} points, got {}", points.len())));
        }
        for p in &points {
            check_point(p, self.model.ambient_dim())?;
        }
        let rho = self.rho();
        let mut segments: Vec<Segment> = Vec::with_capacity(k);
        let mut tail = 0.0;
        for i in 0..k {
            let j = (i + 1) % k;
            let hint = hints.map(|h| h[i].as_slice());
            let s = self.model.log_segment(&points[i], &points[j], hint)?;
            if i > 0 {
                tail += s.length * s.length;
                if tail >= rho * rho {
                    return Err(Error::domain(format!(
                        "sum of squared distances {tail:.6} is not below rho² = {:.6}",
                        rho * rho
                    )));
                }
            }
            segments.push(s);
        }
        let d0 = segments[0].length;
        if (d0 - self.delta()).abs() > 1e-10 {
            return Err(Error::domain(format!(
                "d(q0, q1) = {d0:.12} differs from delta = {}",
                self.delta()
            )));
        }
        let sigma = ((k - 1) as f64 * tail).sqrt();
        let config = LoopConfig {
            dists: segments.iter().map(|s| s.length).collect(),
            tau: breakpoints_from(d0, sigma, k),
            sigma,
            points,
        };
        Ok(BrokenGeodesic::new(config, segments))
    }

    pub fn config(&self, points: Vec<Vec<f64>>) -> Result<LoopConfig> {
        Ok(self.reconstruct_points(points, None)?.config)
    }

    pub fn reconstruct(&self, config: &LoopConfig) -> Result<BrokenGeodesic> {
        self.reconstruct_points(config.points.clone(), None)
    }

    pub fn sigma(&self, config: &LoopConfig) -> f64 {
        config.sigma
    }

    pub fn energy(&self, config: &LoopConfig) -> f64 {
        config.energy()
    }

    /// `Ev(q) = exp_{q_0}^{-1}(q_1)`.
    pub fn ev_map(&self, config: &LoopConfig) -> Result<TangentVector> {
        self.model.log_map(&config.points[0], &config.points[1])
    }

    /// `F(q, τ) = d(q_0,q_1)²/τ + (k−1)/(1−τ)·Σ_{i≠0} d(q_i,q_{i+1})²`.
    pub fn f_two_var(&self, config: &LoopConfig, tau: f64) -> Result<f64> {
        if !(tau > 0.0 && tau < 1.0) {
            return Err(Error::domain(format!("tau must lie in (0, 1), got {tau}")));
        }
        let d = &config.dists;
        let tail: f64 = d[1..].iter().map(|x| x * x).sum();
        Ok(d[0] * d[0] / tau + (d.len() - 1) as f64 / (1.0 - tau) * tail)
    }

    pub fn chart(&self, config: &LoopConfig) -> Result<PrimeChart> {
        let v = self.model.log_map(&config.points[0], &config.points[1])?.vector;
        Ok(PrimeChart {
            q0: config.points[0].clone(),
            u: self.model.normalize(&config.points[0], &v),
            free: config.points[2..].to_vec(),
        })
    }

    pub fn chart_points(&self, chart: &PrimeChart) -> Vec<Vec<f64>> {
        let v = scaled(self.delta(), &chart.u);
        let q1 = self.model.exp_map_unchecked(&chart.q0, &v);
        let mut pts = Vec::with_capacity(self.k());
        pts.push(chart.q0.clone());
        pts.push(q1);
        pts.extend(chart.free.iter().cloned());
        pts
    }

    pub fn config_from_chart(&self, chart: &PrimeChart) -> Result<LoopConfig> {
        self.config(self.chart_points(chart))
    }

    pub fn reconstruct_chart(&self, chart: &PrimeChart) -> Result<BrokenGeodesic> {
        self.reconstruct_points(self.chart_points(chart), None)
    }

    /// Sample the unit-speed geodesic `γ` with `γ(0) = q`, `γ̇(0) = u` of
    /// length `ℓ` as `q_0 = γ(0)`, `q_i = γ(δ + (i−1)(ℓ−δ)/(k−1))`.
    /// Returns the chart; the configuration is exact on `γ` when `γ` closes
    /// at `ℓ`.
    pub fn sample_geodesic_chart(&self, q: &[f64], u: &[f64], length: f64) -> Result<PrimeChart> {
        let (delta, k) = (self.delta(), self.k());
        if !(length > delta) {
            return Err(Error::domain(format!("length {length} must exceed delta {delta}")));
        }
        let kb = self.k_threshold(length);
        if (k as f64) <= kb {
            return Err(Error::domain(format!(
                "k = {k} does not exceed the threshold {kb:.4} for length {length:.6}"
            )));
        }
        let u = self.model.normalize(q, &self.model.project(q, u));
        let s = (length - delta) / (k - 1) as f64;
        let times: Vec<f64> = (2..k).map(|i| delta + (i - 1) as f64 * s).collect();
        let states = self.model.shoot_to_times(q, &u, &times)?;
        Ok(PrimeChart {
            q0: q.to_vec(),
            u,
            free: states.into_iter().map(|(x, _)| x).collect(),
        })
    }

    pub fn sample_closed_geodesic(&self, q: &[f64], u: &[f64], length: f64) -> Result<LoopConfig> {
        let chart = self.sample_geodesic_chart(q, u, length)?;
        self.config_from_chart(&chart)
    }

    /// Back-and-forth configuration over the segment `t ↦ exp_{q_0}(t·v_0)`,
    /// `‖v_0‖_g = δ`: a global minimum with energy `4δ²`.
    pub fn minimum_chart(&self, q0: &[f64], v0: &[f64]) -> PrimeChart {
        let k = self.k();
        let u = self.model.normalize(q0, &self.model.project(q0, v0));
        let free = (2..k)
            .map(|i| {
                let s = self.delta() * (1.0 - (i - 1) as f64 / (k - 1) as f64);
                self.model.exp_map_unchecked(q0, &scaled(s, &u))
            })
            .collect();
        PrimeChart { q0: q0.to_vec(), u, free }
    }

    pub fn minimum_config(&self, q0: &[f64], v0: &[f64]) -> Result<LoopConfig> {
        self.config_from_chart(&self.minimum_chart(q0, v0))
    }

    /// Zig-zag configuration over the closed geodesic through `(q, u)` of
    /// length `ℓ`: `q_0 = γ(0)`, `q_1 = γ(δ)` and then backwards,
    /// `q_i = γ(δ − (i−1)(ℓ+δ)/(k−1))`. Energy `(ℓ + 2δ)²`.
    pub fn zigzag_chart(&self, q: &[f64], u: &[f64], length: f64) -> Result<PrimeChart> {
        let (delta, k) = (self.delta(), self.k());
        let total = length + 2.0 * delta;
        let kb = self.k_threshold(total);
        if (k as f64) <= kb {
            return Err(Error::domain(format!(
                "k = {k} does not exceed the threshold {kb:.4} for the zig-zag of length {total:.6}"
            )));
        }
        let u = self.model.normalize(q, &self.model.project(q, u));
        let s = (length + delta) / (k - 1) as f64;
        // γ(δ − t) = γ_back(t − δ) for t ≥ δ, where γ_back has velocity −u
        let back: Vec<f64> = u.iter().map(|c| -c).collect();
        let mut free = Vec::with_capacity(k - 2);
        let mut times = Vec::new();
        for i in 2..k {
            let t = delta - (i - 1) as f64 * s;
            if t >= 0.0 {
                free.push(Some(self.model.exp_map_unchecked(q, &scaled(t, &u))));
            } else {
                free.push(None);
                times.push(-t);
            }
        }
        let states = self.model.shoot_to_times(q, &back, &times)?;
        let mut it = states.into_iter();
        let free = free
            .into_iter()
            .map(|p| p.unwrap_or_else(|| it.next().map(|(x, _)| x).unwrap_or_default()))
            .collect();
        Ok(PrimeChart { q0: q.to_vec(), u, free })
    }

    /// Random valid configuration near a random geodesic arc, with tangent
    /// noise of size `noise` on the free points.
    pub fn random_config<Rg: Rng + ?Sized>(&self, rng: &mut Rg, noise: f64) -> Result<LoopConfig> {
        let (delta, k, rho) = (self.delta(), self.k(), self.rho());
        let lmax = delta + ((k - 1) as f64).sqrt() * rho;
        for _ in 0..200 {
            let q = random_sphere_point(rng, self.model.ambient_dim());
            let u = random_unit_direction(&self.model, rng, &q);
            let length = 2.0 * delta + rng.gen::<f64>() * (0.95 * lmax - 2.0 * delta);
            let Ok(mut chart) = self.sample_geodesic_chart(&q, &u, length) else {
                continue;
            };
            for p in chart.free.iter_mut() {
                let w = random_unit_direction(&self.model, rng, p);
                let s = noise * rng.gen::<f64>();
                *p = normalized(&p.iter().zip(&w).map(|(a, b)| a + s * b).collect::<Vec<_>>());
            }
            if let Ok(c) = self.config_from_chart(&chart) {
                return Ok(c);
            }
        }
        Err(Error::ConvergenceFailure("could not sample a valid configuration".into()))
    }

    pub fn record(&self, config: &LoopConfig) -> LoopConfigRecord {
        LoopConfigRecord {
            delta: self.delta(),
            k: self.k(),
            metric: self.model.spec(),
            points: config.points.clone(),
        }
    }

    /// Rebuild a configuration from its record, checking the parameters match.
    pub fn from_record(&self, rec: &LoopConfigRecord) -> Result<LoopConfig> {
        if rec.k != self.k() || (rec.delta - self.delta()).abs() > 0.0 {
            return Err(Error::Config(format!(
                "record has (delta, k) = ({}, {}), space has ({}, {})",
                rec.delta,
                rec.k,
                self.delta(),
                self.k()
            )));
        }
        self.config(rec.points.clone())
    }
}

impl LoopSpace<Model> {
    pub fn from_record_standalone(rec: &LoopConfigRecord) -> Result<(Self, LoopConfig)> {
        let space = LoopSpace::new(rec.metric.build()?, rec.delta, rec.k)?;
        let c = space.from_record(rec)?;
        Ok((space, c))
    }
}

/// Max Euclidean distance between corresponding points of two configurations.
pub fn config_distance(a: &LoopConfig, b: &LoopConfig) -> f64 {
    a.points
        .iter()
        .zip(&b.points)
        .map(|(p, q)| dist_euclid(p, q))
        .fold(0.0, f64::max)
}
