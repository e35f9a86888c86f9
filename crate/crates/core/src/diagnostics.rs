//! Besse/Zoll scans of the geodesic flow, Ev-coverage of critical levels and
//! the combined report comparing both.

use log::info;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::critical::{levels, multistart, through_point_from, CriticalPoint, Kind, Level, SearchConfig};
use crate::error::{Error, Result};
use crate::loopspace::{LoopSpace, PrimeChart};
use crate::manifold::{random_sphere_point, random_unit_direction, Metric, MetricModel};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", content = "period")]
pub enum Verdict {
    Zoll(f64),
    Besse(f64),
    NonBesse,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Verdict::Zoll(l) => write!(f, "Zoll({l:.6})"),
            Verdict::Besse(l) => write!(f, "Besse({l:.6})"),
            Verdict::NonBesse => f.write_str("NonBesse"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticConfig {
    pub scan_samples: usize,
    pub t_max: f64,
    /// Phase-space tolerance for closure; periods cluster with gap `10·tol`.
    pub tol: f64,
    pub coverage_grid: usize,
    /// Half-angle of the direction cone in coverage searches.
    pub cone: f64,
    /// Max angle between `Ev/δ` and the grid direction for a hit.
    pub ev_angle: f64,
    /// Critical levels within this distance of `4δ²` count as minima.
    pub margin: f64,
}

impl Default for DiagnosticConfig {
    fn default() -> Self {
        DiagnosticConfig {
            scan_samples: 200,
            t_max: 20.0,
            tol: 1e-6,
            coverage_grid: 100,
            cone: 0.2,
            ev_angle: 0.05,
            margin: 1e-3,
        }
    }
}

impl DiagnosticConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("t_max", self.t_max),
            ("tol", self.tol),
            ("cone", self.cone),
            ("ev_angle", self.ev_angle),
            ("margin", self.margin),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("diagnostics.{name} must be positive, got {v}")));
            }
        }
        if self.scan_samples == 0 || self.coverage_grid == 0 {
            return Err(Error::Config("diagnostics sample counts must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeriodCluster {
    pub center: f64,
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClosureScan {
    pub samples: usize,
    pub closed: usize,
    pub failures: usize,
    pub closure_fraction: f64,
    /// Single-linkage clusters of the minimal periods, ascending.
    pub clusters: Vec<PeriodCluster>,
    pub verdict: Verdict,
}

/// Uniform samples of the unit tangent bundle: area-uniform base points and
/// `g`-uniform directions, from one seeded stream.
pub fn sample_unit_bundle<M: Metric>(model: &MetricModel<M>, count: usize, seed: u64) -> Vec<(Vec<f64>, Vec<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let q = random_sphere_point(&mut rng, model.ambient_dim());
            let u = random_unit_direction(model, &mut rng, &q);
            (q, u)
        })
        .collect()
}

/// Single-linkage clustering of sorted values with the given gap.
pub fn cluster(values: &[f64], gap: f64) -> Vec<PeriodCluster> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mut out: Vec<Vec<f64>> = Vec::new();
    for x in v {
        match out.last_mut() {
            Some(c) if x - c[c.len() - 1] <= gap => c.push(x),
            _ => out.push(vec![x]),
        }
    }
    out.into_iter()
        .map(|c| PeriodCluster {
            center: c.iter().sum::<f64>() / c.len() as f64,
            min: c[0],
            max: c[c.len() - 1],
            count: c.len(),
        })
        .collect()
}

fn verdict(clusters: &[PeriodCluster], all_closed: bool, tol: f64) -> Verdict {
    if !all_closed || clusters.is_empty() {
        return Verdict::NonBesse;
    }
    if clusters.len() == 1 {
        return Verdict::Zoll(clusters[0].center);
    }
    let top = clusters[clusters.len() - 1].center;
    let common = clusters.iter().all(|c| {
        let m = (top / c.center).round();
        m >= 1.0 && (m * c.center - top).abs() <= 10.0 * tol * m
    });
    if common {
        Verdict::Besse(top)
    } else {
        Verdict::NonBesse
    }
}

/// Closure scan of the geodesic flow over `samples` seeded points of the
/// unit tangent bundle.
pub fn besse_zoll_scan<M: Metric>(model: &MetricModel<M>, samples: usize, t_max: f64, tol: f64, seed: u64) -> Result<ClosureScan> {
    let sm = sample_unit_bundle(model, samples, seed);
    let res: Vec<Result<Option<f64>>> = sm
        .par_iter()
        .map(|(q, u)| model.detect_closure(q, u, t_max, tol))
        .collect();
    let failures = res.iter().filter(|r| r.is_err()).count();
    if failures * 100 > samples {
        return Err(Error::InconclusiveScan(format!(
            "{failures} of {samples} integrations failed"
        )));
    }
    let periods: Vec<f64> = res.into_iter().filter_map(|r| r.ok().flatten()).collect();
    let closed = periods.len();
    let clusters = cluster(&periods, 10.0 * tol);
    let verdict = verdict(&clusters, closed == samples, tol);
    info!("closure scan on {}: {closed}/{samples} closed, {verdict}", model.name());
    Ok(ClosureScan {
        samples,
        closed,
        failures,
        closure_fraction: closed as f64 / samples as f64,
        clusters,
        verdict,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub point: Vec<f64>,
    pub direction: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Coverage {
    pub level: f64,
    pub grid: usize,
    pub hits: usize,
    pub fraction: f64,
    /// Grid samples no critical point at the level was found for.
    pub witnesses: Vec<Witness>,
}

fn angle<M: Metric>(model: &MetricModel<M>, q: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let c = model.inner(q, a, b) / (model.norm(q, a) * model.norm(q, b));
    c.clamp(-1.0, 1.0).acos()
}

/// Whether some critical point at `level` has `q_0 = q` and `Ev/δ` within
/// `cfg.ev_angle` of `u`. The pinned searches start from the smooth and the
/// zig-zag sample along `(q, u)` and stop once the direction leaves the
/// cone of half-angle `cfg.cone` around `u`.
pub fn covers<M: Metric>(
    space: &LoopSpace<M>,
    q: &[f64],
    u: &[f64],
    level: f64,
    search: &SearchConfig,
    cfg: &DiagnosticConfig,
) -> Option<CriticalPoint> {
    let m = &space.model;
    let u = m.normalize(q, &m.project(q, u));
    let l = level.sqrt();
    let stop = |c: &PrimeChart| angle(m, q, &c.u, &u) > cfg.cone;
    let seeds = [
        space.sample_geodesic_chart(q, &u, l),
        space.zigzag_chart(q, &u, l - 2.0 * space.delta()),
    ];
    seeds.into_iter().flatten().find_map(|chart| {
        through_point_from(space, &chart, level, search, &stop).filter(|cp| angle(m, q, &cp.ev, &u) < cfg.ev_angle)
    })
}

/// Fraction of the grid covered by `Ev` on the critical points at `level`.
pub fn ev_coverage<M: Metric>(
    space: &LoopSpace<M>,
    level: f64,
    grid: &[(Vec<f64>, Vec<f64>)],
    search: &SearchConfig,
    cfg: &DiagnosticConfig,
) -> Coverage {
    let hit: Vec<bool> = grid
        .par_iter()
        .map(|(q, u)| covers(space, q, u, level, search, cfg).is_some())
        .collect();
    let hits = hit.iter().filter(|&&h| h).count();
    let witnesses = grid
        .iter()
        .zip(&hit)
        .filter(|(_, &h)| !h)
        .map(|((q, u), _)| Witness {
            point: q.clone(),
            direction: u.clone(),
        })
        .collect();
    Coverage {
        level,
        grid: grid.len(),
        hits,
        fraction: hits as f64 / grid.len().max(1) as f64,
        witnesses,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LowestLevel {
    pub energy: f64,
    pub kind: Kind,
    /// Period of the underlying closed geodesic (`√E` or `√E − 2δ`).
    pub period: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticReport {
    pub model: String,
    pub params: Vec<f64>,
    pub delta: f64,
    pub k: usize,
    pub seed: u64,
    pub scan: ClosureScan,
    pub levels: Vec<Level>,
    pub lowest: Option<LowestLevel>,
    pub coverage: Option<Coverage>,
    pub statement: String,
}

impl DiagnosticReport {
    pub fn verdict(&self) -> &Verdict {
        &self.scan.verdict
    }

    pub fn csv_header() -> &'static str {
        "model,params,delta,k,seed,verdict,period,closure_fraction,lowest_energy,lowest_kind,coverage,witnesses"
    }

    /// One-line summary; floats in `{:.16e}`.
    pub fn csv_row(&self) -> String {
        let f = |x: f64| format!("{x:.16e}");
        let period = match self.scan.verdict {
            Verdict::Zoll(l) | Verdict::Besse(l) => f(l),
            Verdict::NonBesse => String::new(),
        };
        let verdict = match self.scan.verdict {
            Verdict::Zoll(_) => "Zoll",
            Verdict::Besse(_) => "Besse",
            Verdict::NonBesse => "NonBesse",
        };
        let params: Vec<String> = self.params.iter().map(|p| f(*p)).collect();
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            self.model,
            params.join(";"),
            f(self.delta),
            self.k,
            self.seed,
            verdict,
            period,
            f(self.scan.closure_fraction),
            self.lowest.as_ref().map(|l| f(l.energy)).unwrap_or_default(),
            self.lowest.as_ref().map(|l| l.kind.as_str()).unwrap_or_default(),
            self.coverage.as_ref().map(|c| f(c.fraction)).unwrap_or_default(),
            self.coverage.as_ref().map(|c| c.witnesses.len()).unwrap_or(0),
        )
    }
}

/// Lowest critical level above the minimum level `4δ² + margin`.
pub fn lowest_level<M: Metric>(space: &LoopSpace<M>, points: &[CriticalPoint], margin: f64) -> Option<LowestLevel> {
    let floor = 4.0 * space.delta() * space.delta() + margin;
    points
        .iter()
        .filter(|c| c.kind != Kind::GlobalMinimum && c.energy > floor)
        .min_by(|a, b| a.energy.total_cmp(&b.energy))
        .map(|c| LowestLevel {
            energy: c.energy,
            kind: c.kind,
            period: match c.kind {
                Kind::ZigZag => c.energy.sqrt() - 2.0 * space.delta(),
                _ => c.energy.sqrt(),
            },
        })
}

/// Survey, closure scan and Ev-coverage at the lowest critical level,
/// combined into one verdict.
pub fn minmax_gap_report<M: Metric>(
    space: &LoopSpace<M>,
    search: &SearchConfig,
    cfg: &DiagnosticConfig,
) -> Result<DiagnosticReport> {
    let m = &space.model;
    let scan = besse_zoll_scan(m, cfg.scan_samples, cfg.t_max, cfg.tol, search.seed)?;
    let points = multistart(space, search);
    let lowest = lowest_level(space, &points, cfg.margin);
    let coverage = lowest.as_ref().map(|l| {
        let grid = sample_unit_bundle(m, cfg.coverage_grid, search.seed.wrapping_add(1));
        ev_coverage(space, l.energy, &grid, search, cfg)
    });
    let statement = match (&scan.verdict, &coverage) {
        (_, None) => "no critical level above the minima was found".to_string(),
        (Verdict::Zoll(_), Some(c)) if c.hits == c.grid => {
            "full coverage and a Zoll scan: consistent with equal min-max values at the lowest level".to_string()
        }
        (_, Some(c)) if c.hits < c.grid => format!(
            "coverage gap ({} of {} samples missed): the min-max values at the lowest level must separate",
            c.grid - c.hits,
            c.grid
        ),
        (v, Some(_)) => format!("full coverage, closure scan {v}: inconclusive"),
    };
    Ok(DiagnosticReport {
        model: m.name().to_string(),
        params: m.params(),
        delta: space.delta(),
        k: space.k(),
        seed: search.seed,
        levels: levels(&points, search.energy_gap),
        scan,
        lowest,
        coverage,
        statement,
    })
}
