use nalgebra::DMatrix;
use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::Outcome;
use crate::bayes::{logistic, GaussianLinearPosterior, LaplaceLogisticPosterior};
use crate::error::{Error, Result};

/// When a buffered logistic model is refitted: after every one of the first
/// `warmup` observations, then every `every` observations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RefitSchedule {
    pub warmup: usize,
    pub every: usize,
}

impl Default for RefitSchedule {
    fn default() -> Self {
        Self { warmup: 20, every: 20 }
    }
}

impl RefitSchedule {
    fn due(&self, n: usize) -> bool {
        n <= self.warmup || n % self.every.max(1) == 0
    }
}

/// Posterior over the reward and constraint functions.
#[derive(Debug, Clone)]
pub enum MetricModel {
    /// Independent linear-Gaussian models for reward and constraint.
    Linear {
        reward: GaussianLinearPosterior,
        constraint: GaussianLinearPosterior,
    },
    /// One Bernoulli success model; the constraint is the success
    /// probability and the reward is that probability times the action's
    /// payoff.
    Success {
        posterior: LaplaceLogisticPosterior,
        payoffs: Vec<f64>,
        refit: RefitSchedule,
    },
}

/// Reward and constraint values of every feature row under one draw.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledScores {
    pub reward: Vec<f64>,
    pub constraint: Vec<f64>,
}

impl MetricModel {
    pub fn linear(dim: usize, lambda: f64, noise_std: f64) -> Result<Self> {
        Ok(MetricModel::Linear {
            reward: GaussianLinearPosterior::new(dim, lambda, noise_std)?,
            constraint: GaussianLinearPosterior::new(dim, lambda, noise_std)?,
        })
    }

    pub fn success(dim: usize, lambda: f64, payoffs: Vec<f64>, refit: RefitSchedule) -> Result<Self> {
        if payoffs.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidInput("payoffs must be finite".into()));
        }
        Ok(MetricModel::Success {
            posterior: LaplaceLogisticPosterior::new(dim, lambda)?,
            payoffs,
            refit,
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            MetricModel::Linear { reward, .. } => reward.dim(),
            MetricModel::Success { posterior, .. } => posterior.dim(),
        }
    }

    /// Draws one model from the posterior and scores every feature row.
    ///
    /// Each call consumes the same amount of randomness regardless of the
    /// data, so policies sharing a stream stay aligned.
    pub fn sample_scores(&self, features: &DMatrix<f64>, rng: &mut dyn RngCore) -> Result<SampledScores> {
        if features.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: features.ncols(),
            });
        }
        match self {
            MetricModel::Linear { reward, constraint } => {
                let theta_r = reward.sample(rng);
                let theta_c = constraint.sample(rng);
                Ok(SampledScores {
                    reward: (features * theta_r).iter().copied().collect(),
                    constraint: (features * theta_c).iter().copied().collect(),
                })
            }
            MetricModel::Success { posterior, payoffs, .. } => {
                if payoffs.len() < features.nrows() {
                    return Err(Error::DimensionMismatch {
                        expected: features.nrows(),
                        actual: payoffs.len(),
                    });
                }
                let w = posterior.sample_weights(rng);
                let constraint: Vec<f64> = (features * w).iter().map(|&z| logistic(z)).collect();
                let reward = constraint.iter().zip(payoffs).map(|(p, v)| p * v).collect();
                Ok(SampledScores { reward, constraint })
            }
        }
    }

    pub fn observe(&mut self, x: &[f64], outcome: &Outcome) -> Result<()> {
        match self {
            MetricModel::Linear { reward, constraint } => {
                reward.update(x, outcome.reward)?;
                constraint.update(x, outcome.constraint)
            }
            MetricModel::Success { posterior, refit, .. } => {
                posterior.push(x, outcome.constraint > 0.5)?;
                if refit.due(posterior.len()) {
                    posterior.fit()?;
                }
                Ok(())
            }
        }
    }
}
