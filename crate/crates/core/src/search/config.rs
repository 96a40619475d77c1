use serde::{Deserialize, Serialize};

use super::SearchError;

/// Step size, termination threshold and budgets of a boundary search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub alpha: f32,
    /// The local phase stops once the confidence gap drops below this.
    pub target_dconf: f32,
    pub local_max: usize,
    pub remote_max: usize,
    /// Growth factor of the working step while predictions stay unchanged.
    pub stall_scale: f32,
    pub clamp_range: Option<(f32, f32)>,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            alpha: 1e-4,
            target_dconf: 1e-6,
            local_max: 2000,
            remote_max: 500,
            stall_scale: 2.0,
            clamp_range: Some((0.0, 1.0)),
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), SearchError> {
        let bad = |msg: String| Err(SearchError::InvalidConfig(msg));
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return bad(format!("alpha must be positive, got {}", self.alpha));
        }
        if !(self.target_dconf > 0.0 && self.target_dconf < 1.0) {
            return bad(format!("target_dconf must lie in (0, 1), got {}", self.target_dconf));
        }
        if self.local_max < 1 || self.remote_max < 1 {
            return bad("local_max and remote_max must be at least 1".into());
        }
        if !(self.stall_scale > 1.0 && self.stall_scale.is_finite()) {
            return bad(format!("stall_scale must exceed 1, got {}", self.stall_scale));
        }
        if let Some((lo, hi)) = self.clamp_range {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return bad(format!("invalid clamp range [{lo}, {hi}]"));
            }
        }
        Ok(())
    }
}
