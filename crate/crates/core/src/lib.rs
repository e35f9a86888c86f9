//! Finite-dimensional loop spaces of broken geodesics on Riemannian spheres.
//!
//! The crate provides metric models on `S^n` with geodesic shooting, the
//! loop space `Υ_{δ,k}` of `k`-point configurations with a fixed-length first
//! segment, critical-point search and classification, Morse indices, and
//! Besse/Zoll diagnostics.

pub mod critical;
pub mod diagnostics;
pub mod error;
pub mod export;
pub mod loopspace;
pub mod manifold;
pub mod morse;
pub mod real;
pub mod vecops;

pub use critical::{CriticalPoint, Kind, SearchConfig};
pub use diagnostics::{DiagnosticConfig, DiagnosticReport, Verdict};
pub use error::{Error, Result};
pub use loopspace::{BrokenGeodesic, LoopConfig, LoopParams, LoopSpace, PrimeChart};
pub use manifold::{MetricModel, MetricSpec, Model, TangentVector};
pub use morse::SpectralReport;
