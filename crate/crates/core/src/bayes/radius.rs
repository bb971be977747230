use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Radius of the self-normalized confidence ellipsoid around a ridge
/// estimate:
///
/// ```text
///   β_t = σ √(d · ln((1 + t L² / λ) / δ)) + √λ S
/// ```
///
/// `S` bounds `‖θ‖₂` and `L` bounds `‖x‖₂`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceRadius {
    delta: f64,
    param_bound: f64,
    feature_bound: f64,
}

impl ConfidenceRadius {
    pub fn new(delta: f64, param_bound: f64, feature_bound: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::Config(format!("delta must lie in (0, 1), got {delta}")));
        }
        if !(param_bound.is_finite() && param_bound >= 0.0) {
            return Err(Error::Config(format!("parameter bound must be nonnegative, got {param_bound}")));
        }
        if !(feature_bound.is_finite() && feature_bound > 0.0) {
            return Err(Error::Config(format!("feature bound must be positive, got {feature_bound}")));
        }
        Ok(Self {
            delta,
            param_bound,
            feature_bound,
        })
    }

    /// Default parameter bound `3√d`, which covers `‖θ‖` for standard normal
    /// draws with high probability.
    pub fn default_param_bound(dim: usize) -> f64 {
        3.0 * (dim as f64).sqrt()
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn param_bound(&self) -> f64 {
        self.param_bound
    }

    pub fn feature_bound(&self) -> f64 {
        self.feature_bound
    }

    /// Raises `L` to cover a newly registered feature norm.
    pub fn register_feature_norm(&mut self, norm: f64) {
        if norm.is_finite() && norm > self.feature_bound {
            self.feature_bound = norm;
        }
    }

    pub fn beta(&self, t: u64, dim: usize, noise_std: f64, lambda: f64) -> f64 {
        let growth = 1.0 + t as f64 * self.feature_bound.powi(2) / lambda;
        let log_term = (growth / self.delta).ln().max(0.0);
        noise_std * (dim as f64 * log_term).sqrt() + lambda.sqrt() * self.param_bound
    }
}
