use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use zoll_core::loopspace::auto_k;
use zoll_core::{DiagnosticConfig, LoopSpace, MetricSpec, SearchConfig};

/// Loop-space parameters: `k` directly, or `auto_k_length = ℓ` for the
/// smallest admissible `k` for closed geodesics of length `ℓ` plus one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoopSection {
    pub delta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub auto_k_length: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    pub metric: MetricSpec,
    #[serde(rename = "loop")]
    pub loop_params: LoopSection,
    #[serde(default)]
    pub search: SearchConfig,
    #[serde(default)]
    pub diagnostics: DiagnosticConfig,
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, String> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| e.to_string())?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Self::parse(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run configuration serializes")
    }

    pub fn validate(&self) -> Result<(), String> {
        let model = self.metric.build().map_err(|e| format!("metric: {e}"))?;
        let l = &self.loop_params;
        if !(l.delta > 0.0 && l.delta < model.rho()) {
            return Err(format!(
                "loop.delta = {} must lie in (0, rho = {})",
                l.delta,
                model.rho()
            ));
        }
        match (l.k, l.auto_k_length) {
            (Some(_), Some(_)) => return Err("loop: give either k or auto_k_length, not both".into()),
            (None, None) => return Err("loop: missing field `k` (or `auto_k_length`)".into()),
            (None, Some(len)) if !(len > l.delta) => {
                return Err(format!("loop.auto_k_length = {len} must exceed delta"));
            }
            (Some(k), None) if k < 3 => return Err(format!("loop.k = {k} must be at least 3")),
            _ => {}
        }
        self.search.validate().map_err(|e| e.to_string())?;
        self.diagnostics.validate().map_err(|e| e.to_string())?;
        Ok(())
    }

    pub fn k(&self, rho: f64) -> usize {
        match (self.loop_params.k, self.loop_params.auto_k_length) {
            (Some(k), _) => k,
            (None, Some(len)) => auto_k(len, self.loop_params.delta, rho).max(3),
            (None, None) => unreachable!("validated"),
        }
    }

    pub fn space(&self) -> Result<LoopSpace, String> {
        let model = self.metric.build().map_err(|e| format!("metric: {e}"))?;
        let k = self.k(model.rho());
        LoopSpace::new(model, self.loop_params.delta, k).map_err(|e| format!("loop: {e}"))
    }

    pub fn search(&self) -> SearchConfig {
        let mut s = self.search.clone();
        s.seed = self.seed;
        s
    }
}
