//! Shared fixtures for the criterion benches.

use std::f64::consts::PI;

use zoll_core::critical::refine;
use zoll_core::{CriticalPoint, LoopSpace, MetricSpec, SearchConfig};

pub fn round_space() -> LoopSpace {
    LoopSpace::new(MetricSpec::round(2).build().unwrap(), 0.1, 8).unwrap()
}

pub fn ellipsoid_space(k: usize) -> LoopSpace {
    LoopSpace::new(MetricSpec::ellipsoid(&[1.0, 1.1, 1.2]).build().unwrap(), 0.1, k).unwrap()
}

/// Prime great circle through `(0.6, 0, 0.8)`.
pub fn great_circle(space: &LoopSpace) -> CriticalPoint {
    let c = space
        .sample_closed_geodesic(&[0.6, 0.0, 0.8], &[0.0, 1.0, 0.0], 2.0 * PI)
        .unwrap();
    refine(space, &c, &SearchConfig::default()).unwrap()
}
