use log::{debug, info};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{critical_point, refine_chart, refine_pinned, CriticalPoint, Kind, SearchConfig};
use crate::error::{Error, Result};
use crate::loopspace::{LoopSpace, PrimeChart};
use crate::manifold::{random_sphere_point, random_unit_direction, Metric, MetricModel};
use crate::vecops::{dist_euclid, normalized, scaled};

const SEED_ATTEMPTS: usize = 100;

/// Zig-zag partner of a smooth critical point: the same closed geodesic with
/// the first segment traversed forth and back, so that `√E″ = √E′ + 2δ`.
pub fn make_zigzag<M: Metric>(space: &LoopSpace<M>, smooth: &CriticalPoint, search: &SearchConfig) -> Result<CriticalPoint> {
    if smooth.kind != Kind::SmoothGeodesic {
        return Err(Error::domain(format!("make_zigzag needs a smooth critical point, got {}", smooth.kind)));
    }
    let l = smooth.energy.sqrt();
    let chart = space.zigzag_chart(&smooth.chart.q0, &smooth.chart.u, l)?;
    let zz = refine_chart(space, &chart, search)?;
    if zz.kind != Kind::ZigZag {
        return Err(Error::UnclassifiableCritical(format!(
            "zig-zag seed converged to a {} point",
            zz.kind
        )));
    }
    let gap = zz.energy.sqrt() - l - 2.0 * space.delta();
    if gap.abs() > 1e-8 {
        return Err(Error::ConvergenceFailure(format!(
            "zig-zag drifted off its geodesic (energy relation off by {gap:.3e})"
        )));
    }
    Ok(zz)
}

/// Shift `s ∈ [0, period)` at which the unit-speed geodesic through
/// `(qa, ua)` passes through `(qb, ub)` within `tol` in phase space, if any.
pub fn phase_match<M: Metric>(
    model: &MetricModel<M>,
    (qa, ua, period): (&[f64], &[f64], f64),
    (qb, ub): (&[f64], &[f64]),
    tol: f64,
) -> Result<Option<f64>> {
    let samples = 96;
    let times: Vec<f64> = (0..samples).map(|j| period * j as f64 / samples as f64).collect();
    let states = model.shoot_to_times(qa, ua, &times)?;
    let phase = |x: &[f64], v: &[f64]| (dist_euclid(x, qb).powi(2) + dist_euclid(v, ub).powi(2)).sqrt();
    let (j, _) = states
        .iter()
        .enumerate()
        .map(|(j, (x, v))| (j, phase(x, v)))
        .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
    let h = period / samples as f64;
    let eval = |t: f64| -> Result<f64> {
        let (x, v) = if t >= 0.0 {
            let r = model.geodesic_shoot(qa, ua, t)?;
            (r.end_point, r.end_velocity)
        } else {
            let back: Vec<f64> = ua.iter().map(|c| -c).collect();
            let r = model.geodesic_shoot(qa, &back, -t)?;
            (r.end_point, r.end_velocity.iter().map(|c| -c).collect())
        };
        Ok(phase(&x, &v))
    };
    let (mut a, mut b) = (times[j] - h, times[j] + h);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (eval(c)?, eval(d)?);
    while b - a > 1e-9 * period.max(1.0) {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = eval(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = eval(d)?;
        }
    }
    let t = 0.5 * (a + b);
    let f = eval(t)?;
    Ok((f < tol).then(|| t.rem_euclid(period)))
}

fn same_point<M: Metric>(space: &LoopSpace<M>, a: &CriticalPoint, b: &CriticalPoint, search: &SearchConfig) -> bool {
    if a.kind != b.kind {
        return false;
    }
    if (a.energy - b.energy).abs() > search.energy_gap * a.energy.max(1.0) {
        return false;
    }
    match (a.kind, a.period) {
        (Kind::GlobalMinimum, _) => true,
        (_, Some(p)) => {
            let ea = (a.chart.q0.as_slice(), a.chart.u.as_slice(), p);
            let eb = (b.chart.q0.as_slice(), b.chart.u.as_slice());
            matches!(phase_match(&space.model, ea, eb, search.shift_tol), Ok(Some(_)))
        }
        _ => false,
    }
}

/// Merge duplicates (same kind and energy, same geodesic up to a shift of
/// the basepoint), keeping the point with the smallest gradient. All global
/// minima form one critical manifold and merge into one record.
pub fn dedup<M: Metric>(space: &LoopSpace<M>, mut points: Vec<CriticalPoint>, search: &SearchConfig) -> Vec<CriticalPoint> {
    points.sort_by(|a, b| a.energy.total_cmp(&b.energy));
    let mut out: Vec<CriticalPoint> = Vec::new();
    for p in points {
        match out.iter_mut().find(|q| same_point(space, q, &p, search)) {
            Some(q) => {
                if p.grad_norm < q.grad_norm {
                    *q = p;
                }
            }
            None => out.push(p),
        }
    }
    out.sort_by(|a, b| a.energy.total_cmp(&b.energy));
    out
}

/// Length in `(lo, hi)` at which the unit-speed geodesic through `(q, u)`
/// comes closest to its initial phase-space state (sampled on a grid).
pub fn near_return_length<M: Metric>(model: &MetricModel<M>, q: &[f64], u: &[f64], lo: f64, hi: f64) -> Result<f64> {
    let samples = 400;
    let times: Vec<f64> = (0..=samples).map(|j| lo + (hi - lo) * j as f64 / samples as f64).collect();
    let states = model.shoot_to_times(q, u, &times)?;
    let best = states
        .iter()
        .zip(&times)
        .map(|((x, v), t)| (dist_euclid(x, q).powi(2) + dist_euclid(v, u).powi(2), *t))
        .fold((f64::INFINITY, lo), |a, b| if b.0 < a.0 { b } else { a });
    Ok(best.1)
}

/// Free points moved by tangent noise of size up to `noise`.
fn jitter<M: Metric>(space: &LoopSpace<M>, mut chart: PrimeChart, noise: f64, rng: &mut ChaCha8Rng) -> PrimeChart {
    for p in chart.free.iter_mut() {
        let w = random_unit_direction(&space.model, rng, p);
        let s = noise * rng.gen::<f64>();
        *p = normalized(&p.iter().zip(&w).map(|(a, b)| a + s * b).collect::<Vec<_>>());
    }
    chart
}

/// Start `index` of a survey, drawn from `rng`. Starts cycle through
/// geodesic samples of random length, geodesic and zig-zag samples cut at
/// the nearest return of the geodesic, noisy random configurations and
/// noisy back-and-forth configurations.
pub fn seed_chart<M: Metric>(space: &LoopSpace<M>, index: usize, rng: &mut ChaCha8Rng) -> Result<PrimeChart> {
    let m = &space.model;
    let delta = space.delta();
    let lmax = ((space.k() - 1) as f64).sqrt() * space.rho();
    let mut last = Error::ConvergenceFailure("no seed drawn".into());
    for _ in 0..SEED_ATTEMPTS {
        let q = random_sphere_point(rng, m.ambient_dim());
        let u = random_unit_direction(m, rng, &q);
        let chart = match index % 5 {
            0 => {
                let l = 2.0 * delta + rng.gen::<f64>() * (lmax - 2.0 * delta);
                space.sample_geodesic_chart(&q, &u, l)
            }
            1 => near_return_length(m, &q, &u, 3.0 * delta, lmax)
                .and_then(|l| space.sample_geodesic_chart(&q, &u, l)),
            2 => near_return_length(m, &q, &u, 3.0 * delta, lmax - 2.0 * delta)
                .and_then(|l| space.zigzag_chart(&q, &u, l)),
            3 => {
                let noise = 0.1 * rng.gen::<f64>();
                space.random_config(rng, noise).and_then(|c| space.chart(&c))
            }
            _ => {
                let v0 = scaled(delta, &u);
                let c = space.minimum_chart(&q, &v0);
                let noise = 0.05 * rng.gen::<f64>();
                Ok(jitter(space, c, noise, rng))
            }
        };
        // geodesic arcs that do not close may leave the domain
        match chart.and_then(|c| space.config_from_chart(&c).map(|_| c)) {
            Ok(c) => return Ok(c),
            Err(e) => last = e,
        }
    }
    Err(last)
}

/// Survey of critical points: refine seeded starts in parallel, deduplicate,
/// keep the energies inside the window (global minima are always kept) and
/// sort by energy.
///
/// Start `i` is [`seed_chart`] with `index = i`; it draws from its own stream of
/// the seeded generator, so the survey does not depend on scheduling.
pub fn multistart<M: Metric>(space: &LoopSpace<M>, search: &SearchConfig) -> Vec<CriticalPoint> {
    let found: Vec<Option<CriticalPoint>> = (0..search.samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(search.seed);
            rng.set_stream(i as u64);
            let chart = seed_chart(space, i, &mut rng).ok()?;
            match refine_chart(space, &chart, search) {
                Ok(cp) => {
                    debug!("start {i}: {} at E = {:.10}", cp.kind, cp.energy);
                    Some(cp)
                }
                Err(e) => {
                    debug!("start {i} failed: {e}");
                    None
                }
            }
        })
        .collect();
    let ok: Vec<CriticalPoint> = found.into_iter().flatten().collect();
    info!("multistart: {} of {} starts converged", ok.len(), search.samples);
    let (lo, hi) = search.window;
    let kept = ok
        .into_iter()
        .filter(|c| c.kind == Kind::GlobalMinimum || (c.energy > lo && c.energy < hi))
        .collect();
    dedup(space, kept, search)
}

/// One critical level of a survey.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Level {
    pub energy: f64,
    pub kind: Kind,
    pub count: usize,
}

/// Group energy-sorted critical points into levels of one kind whose
/// energies agree within `gap` (relative).
pub fn levels(points: &[CriticalPoint], gap: f64) -> Vec<Level> {
    let mut out: Vec<Level> = Vec::new();
    for p in points {
        match out
            .iter_mut()
            .find(|l| l.kind == p.kind && (l.energy - p.energy).abs() <= gap * l.energy.max(1.0))
        {
            Some(l) => l.count += 1,
            None => out.push(Level {
                energy: p.energy,
                kind: p.kind,
                count: 1,
            }),
        }
    }
    out.sort_by(|a, b| a.energy.total_cmp(&b.energy));
    out
}

/// Unit directions at `q` used as starts for pinned searches: evenly spaced
/// on the unit circle for surfaces, seeded random otherwise.
pub fn start_directions<M: Metric>(model: &MetricModel<M>, q: &[f64], count: usize, seed: u64) -> Vec<Vec<f64>> {
    let frame = model.tangent_frame(q);
    if model.dim() == 2 {
        (0..count)
            .map(|j| {
                let a = std::f64::consts::TAU * j as f64 / count as f64;
                let v: Vec<f64> = frame[0].iter().zip(&frame[1]).map(|(x, y)| a.cos() * x + a.sin() * y).collect();
                model.normalize(q, &v)
            })
            .collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count).map(|_| random_unit_direction(model, &mut rng, q)).collect()
    }
}

/// Pinned search for a critical point at energy `target` with `q_0 = q`.
/// Starts are smooth and zig-zag samples in [`start_directions`]; a pinned
/// solution counts only if it is critical in the full loop space.
pub fn find_through_point<M: Metric>(
    space: &LoopSpace<M>,
    q: &[f64],
    target: f64,
    search: &SearchConfig,
) -> Result<Option<CriticalPoint>> {
    let q = normalized(q);
    let lo = 4.0 * space.delta() * space.delta();
    if !(target > lo && target < space.sup_energy()) {
        return Err(Error::domain(format!(
            "target energy {target} outside ({lo}, {})",
            space.sup_energy()
        )));
    }
    let l = target.sqrt();
    for u in start_directions(&space.model, &q, search.directions, search.seed) {
        let seeds = [
            space.sample_geodesic_chart(&q, &u, l),
            space.zigzag_chart(&q, &u, l - 2.0 * space.delta()),
        ];
        for chart in seeds.into_iter().flatten() {
            if let Some(cp) = through_point_from(space, &chart, target, search, &|_| false) {
                return Ok(Some(cp));
            }
        }
    }
    Ok(None)
}

/// Pinned refinement from `chart`, accepted when the limit is critical in
/// the full loop space at energy `target` (relative `search.energy_tol`).
pub fn through_point_from<M: Metric>(
    space: &LoopSpace<M>,
    chart: &PrimeChart,
    target: f64,
    search: &SearchConfig,
    stop: &dyn Fn(&PrimeChart) -> bool,
) -> Option<CriticalPoint> {
    let r = refine_pinned(space, chart, search, stop).ok()?;
    let cp = critical_point(space, &r.chart, r.trace).ok()?;
    let critical = cp.grad_norm < (100.0 * search.grad_tol).max(1e-6);
    let level = (cp.energy - target).abs() <= search.energy_tol * target;
    (critical && level && cp.kind != Kind::GlobalMinimum).then_some(cp)
}
