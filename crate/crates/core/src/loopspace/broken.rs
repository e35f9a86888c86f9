use super::LoopConfig;
use crate::manifold::{Metric, MetricModel, Segment};
use crate::vecops::{scaled, sub};

/// The periodic broken geodesic `γ_q` of a configuration: on `[τ_i, τ_{i+1}]`
/// it is the shortest geodesic from `q_i` to `q_{i+1}`.
#[derive(Clone, Debug, PartialEq)]
pub struct BrokenGeodesic {
    pub config: LoopConfig,
    /// Unit-time segments `t ↦ exp_{q_i}(t·V_i)`, `t ∈ [0, 1]`.
    segments: Vec<Segment>,
}

impl BrokenGeodesic {
    pub(crate) fn new(config: LoopConfig, segments: Vec<Segment>) -> Self {
        BrokenGeodesic { config, segments }
    }

    pub fn k(&self) -> usize {
        self.segments.len()
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn breakpoints(&self) -> &[f64] {
        self.config.breakpoints()
    }

    /// `τ_{i+1} − τ_i`.
    pub fn duration(&self, i: usize) -> f64 {
        let t = self.config.breakpoints();
        t[i + 1] - t[i]
    }

    /// Outgoing velocity `v_i^+ = γ̇_q(τ_i^+)`.
    pub fn v_plus(&self, i: usize) -> Vec<f64> {
        let i = i % self.k();
        scaled(1.0 / self.duration(i), &self.segments[i].initial)
    }

    /// Incoming velocity `v_i^- = γ̇_q(τ_i^-)`, indices mod `k`.
    pub fn v_minus(&self, i: usize) -> Vec<f64> {
        let k = self.k();
        let j = (i + k - 1) % k;
        scaled(1.0 / self.duration(j), &self.segments[j].terminal)
    }

    /// `v_i^- − v_i^+`.
    pub fn mismatch(&self, i: usize) -> Vec<f64> {
        sub(&self.v_minus(i), &self.v_plus(i))
    }

    /// `‖v_i^- − v_i^+‖_g / ‖v_i^-‖_g`.
    pub fn relative_mismatch<M: Metric>(&self, model: &MetricModel<M>, i: usize) -> f64 {
        let q = &self.config.points()[i % self.k()];
        model.norm(q, &self.mismatch(i)) / model.norm(q, &self.v_minus(i))
    }

    /// Cosine of the angle between `v_i^-` and `v_i^+`.
    pub fn joint_cosine<M: Metric>(&self, model: &MetricModel<M>, i: usize) -> f64 {
        let q = &self.config.points()[i % self.k()];
        let (a, b) = (self.v_minus(i), self.v_plus(i));
        model.inner(q, &a, &b) / (model.norm(q, &a) * model.norm(q, &b))
    }

    /// Speed `d(q_i, q_{i+1}) / (τ_{i+1} − τ_i)` of each segment.
    pub fn speeds(&self) -> Vec<f64> {
        (0..self.k())
            .map(|i| self.segments[i].length / self.duration(i))
            .collect()
    }

    /// Max relative deviation of the segment speeds from their mean.
    pub fn speed_spread(&self) -> f64 {
        let s = self.speeds();
        let mean = s.iter().sum::<f64>() / s.len() as f64;
        s.iter().map(|x| (x - mean).abs() / mean).fold(0.0, f64::max)
    }

    /// `γ_q(t)` for `t ∈ [0, 1]` (wrapped).
    pub fn position<M: Metric>(&self, model: &MetricModel<M>, t: f64) -> Vec<f64> {
        let t = t.rem_euclid(1.0);
        let tau = self.config.breakpoints();
        let i = (0..self.k()).rfind(|&i| tau[i] <= t).unwrap_or(0);
        let s = (t - tau[i]) / self.duration(i);
        model.exp_map_unchecked(&self.config.points()[i], &scaled(s, &self.segments[i].initial))
    }

    /// Dense sampling with `per_segment` steps on every segment; the closing
    /// point `γ_q(1) = q_0` is included.
    pub fn polyline<M: Metric>(&self, model: &MetricModel<M>, per_segment: usize) -> Vec<Vec<f64>> {
        let per = per_segment.max(1);
        let mut out = Vec::with_capacity(self.k() * per + 1);
        for (i, seg) in self.segments.iter().enumerate() {
            let q = &self.config.points()[i];
            for j in 0..per {
                let s = j as f64 / per as f64;
                out.push(model.exp_map_unchecked(q, &scaled(s, &seg.initial)));
            }
        }
        out.push(self.config.points()[0].clone());
        out
    }
}
