use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(
    default,
    deny_unknown_fields,
    bound(deserialize = "S: Scalar + Deserialize<'de>")
)]
pub struct RankerConfig<S> {
    pub year_boost_factor: S,
    pub top_k_reference: usize,
    pub top_k_feature: usize,
    pub score_threshold: S,
}

impl<S: Scalar> Default for RankerConfig<S> {
    fn default() -> Self {
        Self {
            year_boost_factor: S::from_f64_lossy(1.5),
            top_k_reference: 5,
            top_k_feature: 6,
            score_threshold: S::zero(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid ranker configuration: {0}")]
pub struct ConfigError(pub String);

impl<S: Scalar> RankerConfig<S> {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.year_boost_factor.is_finite() && self.year_boost_factor > S::zero()) {
            return Err(ConfigError("year_boost_factor must be positive".into()));
        }
        if self.top_k_reference == 0 || self.top_k_feature == 0 {
            return Err(ConfigError("top_k values must be at least 1".into()));
        }
        if !(self.score_threshold.is_finite() && self.score_threshold >= S::zero()) {
            return Err(ConfigError("score_threshold must be non-negative".into()));
        }
        Ok(())
    }
}
