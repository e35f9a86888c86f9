//! Critical points of the loop-space energy: refinement, classification by
//! the velocity pattern at the joints, zig-zag construction and surveys.
//!
//! Every critical point is one of three kinds. Global minima retrace the
//! first segment backwards (`E = 4δ²`); smooth critical points sample a closed
//! geodesic of length `√E`; zig-zags add a back-and-forth excursion over the
//! first segment to a closed geodesic of length `√E − 2δ`.

mod search;

pub use search::{
    dedup, find_through_point, near_return_length, seed_chart, levels, make_zigzag, multistart, phase_match, start_directions, through_point_from, Level,
};

use log::debug;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loopspace::{BrokenGeodesic, ChartCoords, LoopConfig, LoopSpace, PrimeChart};
use crate::manifold::Metric;
use crate::vecops::norm;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Kind {
    GlobalMinimum,
    SmoothGeodesic,
    ZigZag,
}

impl Kind {
    pub fn as_str(&self) -> &'static str {
        match self {
            Kind::GlobalMinimum => "GlobalMinimum",
            Kind::SmoothGeodesic => "SmoothGeodesic",
            Kind::ZigZag => "ZigZag",
        }
    }
}

impl std::fmt::Display for Kind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// How [`refine`] treats the landscape.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RefineMode {
    /// Damped Newton on `∇E = 0`; converges to saddles as well as minima.
    Critical,
    /// Armijo descent on `E`, then the Newton polish once `‖∇E‖` is small.
    Minimize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    pub max_iter: usize,
    pub grad_tol: f64,
    /// Armijo constant for the line searches.
    pub armijo: f64,
    /// Backtracking factor.
    pub backtrack: f64,
    pub max_backtracks: usize,
    /// Gradient norm below which the descent phase hands over to Newton.
    pub newton_switch: f64,
    /// Cap on the chart-coordinate length of a Newton step.
    pub trust_radius: f64,
    /// Finite-difference step for Hessians.
    pub hessian_step: f64,
    pub mode: RefineMode,
    pub seed: u64,
    pub samples: usize,
    /// Relative energy gap below which two critical points may be merged.
    pub energy_gap: f64,
    /// Angular gap (radians) between Ev directions treated as equal.
    pub ev_angle_gap: f64,
    /// Phase-space tolerance for matching up to a basepoint shift.
    pub shift_tol: f64,
    /// Only critical points with energy in this open window are reported
    /// (global minima are always kept).
    pub window: (f64, f64),
    /// Relative energy tolerance for level matching in targeted searches.
    pub energy_tol: f64,
    /// Initial directions tried per base point in targeted searches.
    pub directions: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            max_iter: 60,
            grad_tol: 1e-7,
            armijo: 1e-4,
            backtrack: 0.5,
            max_backtracks: 30,
            newton_switch: 1e-3,
            trust_radius: 0.5,
            hessian_step: 1e-4,
            mode: RefineMode::Critical,
            seed: 0,
            samples: 48,
            energy_gap: 1e-6,
            ev_angle_gap: 1e-3,
            shift_tol: 1e-4,
            window: (0.0, f64::INFINITY),
            energy_tol: 1e-6,
            directions: 8,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("grad_tol", self.grad_tol),
            ("armijo", self.armijo),
            ("backtrack", self.backtrack),
            ("newton_switch", self.newton_switch),
            ("trust_radius", self.trust_radius),
            ("hessian_step", self.hessian_step),
            ("energy_gap", self.energy_gap),
            ("ev_angle_gap", self.ev_angle_gap),
            ("shift_tol", self.shift_tol),
            ("energy_tol", self.energy_tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("search.{name} must be positive, got {v}")));
            }
        }
        if self.backtrack >= 1.0 {
            return Err(Error::Config("search.backtrack must be below 1".into()));
        }
        if !(self.window.0 < self.window.1) {
            return Err(Error::Config(format!("search.window {:?} is empty", self.window)));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("search.max_iter must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CriticalPoint {
    pub config: LoopConfig,
    pub chart: PrimeChart,
    pub energy: f64,
    pub kind: Kind,
    pub grad_norm: f64,
    /// `Ev(q) = exp_{q_0}^{-1}(q_1)`, of norm `δ`.
    pub ev: Vec<f64>,
    /// Length of the underlying closed geodesic.
    pub period: Option<f64>,
    /// Max relative deviation of the segment speeds.
    pub speed_spread: f64,
    /// Energies along the refinement that produced this point.
    pub trace: Vec<f64>,
    pub index: Option<usize>,
    pub kernel: Option<usize>,
}

/// Cosine thresholds for aligned / reversed joints.
pub const ALIGNED: f64 = 0.999;

/// Kind of a converged configuration from the joint pattern.
pub fn classify<M: Metric>(space: &LoopSpace<M>, geo: &BrokenGeodesic, energy_tol: f64) -> Result<Kind> {
    let m = &space.model;
    let c0 = geo.joint_cosine(m, 0);
    let c1 = geo.joint_cosine(m, 1);
    for i in 2..geo.k() {
        let c = geo.joint_cosine(m, i);
        if c <= ALIGNED {
            return Err(Error::UnclassifiableCritical(format!(
                "joint {i} is not smooth (cos = {c:.6})"
            )));
        }
    }
    let min_energy = 4.0 * space.delta() * space.delta();
    let e = geo.config.energy();
    match (c0 > ALIGNED, c1 > ALIGNED, c0 < -ALIGNED, c1 < -ALIGNED) {
        (true, true, _, _) => Ok(Kind::SmoothGeodesic),
        (_, _, true, true) => {
            if (e - min_energy).abs() <= energy_tol * min_energy.max(1.0) {
                Ok(Kind::GlobalMinimum)
            } else {
                Ok(Kind::ZigZag)
            }
        }
        _ => Err(Error::UnclassifiableCritical(format!(
            "mixed joint pattern at q0/q1: cos = {c0:.6}, {c1:.6}"
        ))),
    }
}

/// Full prime-chart gradient at `chart`.
pub fn gradient_at<M: Metric>(space: &LoopSpace<M>, chart: &PrimeChart) -> Result<(BrokenGeodesic, Vec<f64>)> {
    let coords = ChartCoords::new(space, chart.clone(), false);
    coords.gradient(&vec![0.0; coords.dim()])
}

/// Assemble a [`CriticalPoint`] at a converged chart.
pub fn critical_point<M: Metric>(space: &LoopSpace<M>, chart: &PrimeChart, trace: Vec<f64>) -> Result<CriticalPoint> {
    let (geo, g) = gradient_at(space, chart)?;
    let kind = classify(space, &geo, 1e-6)?;
    let energy = geo.config.energy();
    let period = match kind {
        Kind::GlobalMinimum => None,
        Kind::SmoothGeodesic => Some(energy.sqrt()),
        Kind::ZigZag => Some(energy.sqrt() - 2.0 * space.delta()),
    };
    Ok(CriticalPoint {
        ev: geo.segments()[0].initial.clone(),
        speed_spread: geo.speed_spread(),
        grad_norm: norm(&g),
        config: geo.config.clone(),
        chart: chart.clone(),
        energy,
        kind,
        period,
        trace,
        index: None,
        kernel: None,
    })
}

/// Outcome of a raw refinement before classification.
pub struct Refined {
    pub chart: PrimeChart,
    pub geo: BrokenGeodesic,
    pub grad_norm: f64,
    pub trace: Vec<f64>,
    pub iterations: usize,
}

fn eigen(h: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let e = h.symmetric_eigen();
    (e.eigenvalues.iter().copied().collect(), e.eigenvectors)
}

/// Damped Newton step `p = −Σ λ_i/(λ_i² + μ)·(e_i·g)·e_i`, ignoring the
/// numerically null eigenvalues.
fn newton_step(vals: &[f64], vecs: &DMatrix<f64>, g: &[f64], mu: f64) -> Vec<f64> {
    let d = g.len();
    let lmax = vals.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut p = vec![0.0; d];
    for (i, &l) in vals.iter().enumerate() {
        if l.abs() < 1e-9 * lmax {
            continue;
        }
        let e = vecs.column(i);
        let c: f64 = (0..d).map(|r| e[r] * g[r]).sum();
        let f = -l / (l * l + mu) * c;
        for r in 0..d {
            p[r] += f * e[r];
        }
    }
    p
}

/// Iterations over which the gradient norm must at least halve.
const STALL_WINDOW: usize = 15;

/// Core iteration on `∇E = 0` in local prime-chart coordinates.
/// `stop(chart)` may end the iteration early (returns an error).
pub fn refine_raw<M: Metric>(
    space: &LoopSpace<M>,
    init: &PrimeChart,
    pinned: bool,
    search: &SearchConfig,
    stop: &dyn Fn(&PrimeChart) -> bool,
) -> Result<Refined> {
    let mut chart = init.clone();
    let mut coords = ChartCoords::new(space, chart.clone(), pinned);
    let (mut geo, mut g) = coords.gradient(&vec![0.0; coords.dim()])?;
    let mut gn = norm(&g);
    let mut trace = vec![geo.config.energy()];
    let mut descending = search.mode == RefineMode::Minimize;
    let mut alpha_prev: f64 = 1.0;
    let mut history = vec![gn];
    for it in 0..search.max_iter {
        if gn < search.grad_tol {
            return Ok(Refined {
                chart,
                geo,
                grad_norm: gn,
                trace,
                iterations: it,
            });
        }
        if it >= STALL_WINDOW && gn > 0.5 * history[it - STALL_WINDOW] {
            return Err(Error::ConvergenceFailure(format!(
                "gradient norm stalled at {gn:.3e} after {it} iterations"
            )));
        }
        if stop(&chart) {
            return Err(Error::ConvergenceFailure("search left its admissible region".into()));
        }
        if descending && gn < search.newton_switch {
            descending = false;
        }
        let d = coords.dim();
        let e0 = geo.config.energy();
        let mut accepted: Option<(Vec<f64>, BrokenGeodesic, Vec<f64>)> = None;
        let mut domain_failures = 0usize;
        if descending {
            // Armijo descent on E along −∇E
            let mut alpha = (alpha_prev * 2.0).min(1.0);
            for _ in 0..search.max_backtracks {
                let xi: Vec<f64> = g.iter().map(|x| -alpha * x).collect();
                let step = norm(&xi);
                if step > search.trust_radius {
                    alpha *= search.backtrack;
                    continue;
                }
                match coords.gradient(&xi) {
                    Ok((ng, ngr)) if ng.config.energy() <= e0 - search.armijo * alpha * gn * gn => {
                        alpha_prev = alpha;
                        accepted = Some((xi, ng, ngr));
                        break;
                    }
                    Ok(_) => {}
                    Err(_) => domain_failures += 1,
                }
                alpha *= search.backtrack;
            }
        } else {
            let (h, _) = coords.hessian(search.hessian_step)?;
            let (vals, vecs) = eigen(h);
            let lmax = vals.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            let mut mu = 0.0;
            'lm: for _ in 0..6 {
                let mut p = newton_step(&vals, &vecs, &g, mu);
                let pn = norm(&p);
                if pn > search.trust_radius {
                    p.iter_mut().for_each(|x| *x *= search.trust_radius / pn);
                }
                let mut alpha = 1.0;
                for _ in 0..search.max_backtracks.min(12) {
                    let xi: Vec<f64> = p.iter().map(|x| alpha * x).collect();
                    match coords.gradient(&xi) {
                        Ok((ng, ngr)) if norm(&ngr) <= (1.0 - search.armijo * alpha) * gn => {
                            accepted = Some((xi, ng, ngr));
                            break 'lm;
                        }
                        Ok(_) => {}
                        Err(_) => domain_failures += 1,
                    }
                    alpha *= search.backtrack;
                }
                mu = if mu == 0.0 { (1e-3 * lmax).powi(2) } else { mu * 100.0 };
            }
        }
        let Some((xi, ng, _)) = accepted else {
            if domain_failures > 0 && domain_failures >= search.max_backtracks.min(12) {
                return Err(Error::BoundaryEscape);
            }
            if descending {
                // stalled descent: let Newton take over
                descending = false;
                continue;
            }
            return Err(Error::ConvergenceFailure(format!(
                "no acceptable step at gradient norm {gn:.3e} (iteration {it})"
            )));
        };
        chart = coords.retract(&xi);
        coords = ChartCoords::new(space, chart.clone(), pinned).with_hints(&ng);
        let (g2, gr2) = coords.gradient(&vec![0.0; d])?;
        geo = g2;
        g = gr2;
        gn = norm(&g);
        history.push(gn);
        trace.push(geo.config.energy());
        debug!("refine it {it}: E = {:.12}, |grad| = {gn:.3e}", geo.config.energy());
    }
    if gn < search.grad_tol {
        return Ok(Refined {
            chart,
            geo,
            grad_norm: gn,
            trace,
            iterations: search.max_iter,
        });
    }
    Err(Error::MaxIterations {
        iterations: search.max_iter,
        grad_norm: gn,
    })
}

/// Refine a configuration to a critical point and classify it.
pub fn refine<M: Metric>(space: &LoopSpace<M>, init: &LoopConfig, search: &SearchConfig) -> Result<CriticalPoint> {
    let chart = space.chart(init)?;
    refine_chart(space, &chart, search)
}

pub fn refine_chart<M: Metric>(space: &LoopSpace<M>, init: &PrimeChart, search: &SearchConfig) -> Result<CriticalPoint> {
    let r = refine_raw(space, init, false, search, &|_| false)?;
    critical_point(space, &r.chart, r.trace)
}

/// Refine with `q_0` held fixed. The result is a critical point of the
/// restricted energy; callers check the full gradient themselves.
pub fn refine_pinned<M: Metric>(
    space: &LoopSpace<M>,
    init: &PrimeChart,
    search: &SearchConfig,
    stop: &dyn Fn(&PrimeChart) -> bool,
) -> Result<Refined> {
    refine_raw(space, init, true, search, stop)
}
