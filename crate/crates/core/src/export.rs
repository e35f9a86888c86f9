//! Records and text formats for results. Floats in CSV and polyline files
//! use `{:.16e}` (17 significant digits).

use serde::{Deserialize, Serialize};

use crate::critical::{critical_point, CriticalPoint, Kind};
use crate::error::Result;
use crate::loopspace::{LoopConfigRecord, LoopSpace};
use crate::manifold::Metric;
use crate::vecops::scaled;

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalRecord {
    pub energy: f64,
    pub kind: Kind,
    pub period: Option<f64>,
    pub grad_norm: f64,
    pub speed_spread: f64,
    /// `Ev/δ`.
    pub ev_direction: Vec<f64>,
    pub index: Option<usize>,
    pub kernel: Option<usize>,
    pub config: LoopConfigRecord,
}

impl CriticalRecord {
    pub fn new<M: Metric>(space: &LoopSpace<M>, cp: &CriticalPoint) -> Self {
        CriticalRecord {
            energy: cp.energy,
            kind: cp.kind,
            period: cp.period,
            grad_norm: cp.grad_norm,
            speed_spread: cp.speed_spread,
            ev_direction: scaled(1.0 / space.delta(), &cp.ev),
            index: cp.index,
            kernel: cp.kernel,
            config: space.record(&cp.config),
        }
    }

    /// Rebuild the critical point in `space`, recomputing every derived field.
    pub fn restore<M: Metric>(&self, space: &LoopSpace<M>) -> Result<CriticalPoint> {
        let config = space.from_record(&self.config)?;
        let chart = space.chart(&config)?;
        let mut cp = critical_point(space, &chart, vec![self.energy])?;
        cp.index = self.index;
        cp.kernel = self.kernel;
        Ok(cp)
    }
}

pub fn survey_csv_header() -> &'static str {
    "id,kind,energy,period,grad_norm,speed_spread,ev_direction"
}

/// One row per critical point; the Ev direction is `;`-separated.
pub fn survey_csv(points: &[CriticalPoint], delta: f64) -> String {
    let mut out = String::from(survey_csv_header());
    out.push('\n');
    for (i, cp) in points.iter().enumerate() {
        let ev: Vec<String> = cp.ev.iter().map(|c| fmt_f64(c / delta)).collect();
        out.push_str(&format!(
            "{i},{},{},{},{},{},{}\n",
            cp.kind,
            fmt_f64(cp.energy),
            cp.period.map(fmt_f64).unwrap_or_default(),
            fmt_f64(cp.grad_norm),
            fmt_f64(cp.speed_spread),
            ev.join(";")
        ));
    }
    out
}

/// One point per line, whitespace-separated embedding coordinates.
pub fn polyline_text(points: &[Vec<f64>]) -> String {
    let mut out = String::new();
    for p in points {
        let row: Vec<String> = p.iter().map(|x| fmt_f64(*x)).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

pub fn parse_polyline(text: &str) -> std::result::Result<Vec<Vec<f64>>, std::num::ParseFloatError> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.split_whitespace().map(str::parse).collect())
        .collect()
}
