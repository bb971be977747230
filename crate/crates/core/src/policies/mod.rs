//! Decision rules behind a single [`Policy`] interface.
//!
//! | policy | constraint handling |
//! |---|---|
//! | [`ThompsonSampling::ts_asc`] | per-step check under one posterior draw |
//! | [`ThompsonSampling::vanilla`] | none |
//! | [`Clucb2`] cumulative | running sums over confidence ellipsoids |
//! | [`Clucb2`] instance | per-step pessimistic check |
//! | [`FixedBaseline`] | always plays the baseline action |
//!
//! Every feasible set contains the baseline action, and ties are broken
//! towards the lowest action index.

mod baseline;
mod clucb2;
mod model;
mod thompson;

use nalgebra::DMatrix;
use rand::RngCore;
use serde::{Deserialize, Serialize};

pub use baseline::FixedBaseline;
pub use clucb2::{Clucb2, Clucb2Accumulators, ConstraintScope};
pub use model::{MetricModel, RefitSchedule, SampledScores};
pub use thompson::{select_feasible_argmax, ConstraintFilter, ThompsonSampling};

use crate::bayes::ConfidenceRadius;
use crate::error::{Error, Result};

/// What a policy sees at one step.
#[derive(Debug, Clone, Copy)]
pub struct StepContext<'a> {
    /// One feature row per action index.
    pub features: &'a DMatrix<f64>,
    /// Action indices that may be played, ascending.
    pub available: &'a [usize],
    /// Action of the baseline policy, `b_t`.
    pub baseline: usize,
}

impl StepContext<'_> {
    pub fn row(&self, action: usize) -> Vec<f64> {
        self.features.row(action).iter().copied().collect()
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.available.is_empty() {
            return Err(Error::InvalidInput("no available actions".into()));
        }
        if let Some(&a) = self.available.iter().find(|&&a| a >= self.features.nrows()) {
            return Err(Error::InvalidInput(format!("action {a} has no feature row")));
        }
        if !self.available.contains(&self.baseline) {
            return Err(Error::InvalidInput(format!(
                "baseline action {} is not available",
                self.baseline
            )));
        }
        Ok(())
    }
}

/// Observed metrics of the played action.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub reward: f64,
    pub constraint: f64,
}

/// Model values behind a decision, kept for audit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecisionScores {
    /// Sampled or optimistic reward of the chosen action.
    pub reward: f64,
    /// Sampled or pessimistic constraint value of the chosen action.
    pub constraint: f64,
    /// Sampled or optimistic constraint value of the baseline action.
    pub baseline_constraint: f64,
}

/// One selection and the feasible set it was drawn from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub t: u64,
    pub action: usize,
    pub baseline: usize,
    /// Ascending.
    pub feasible: Vec<usize>,
    pub scores: Option<DecisionScores>,
}

impl Decision {
    pub fn is_consistent(&self) -> bool {
        self.feasible.binary_search(&self.action).is_ok() && self.feasible.binary_search(&self.baseline).is_ok()
    }
}

pub trait Policy: Send {
    fn name(&self) -> &'static str;

    fn select(&mut self, ctx: &StepContext<'_>, rng: &mut dyn RngCore) -> Result<Decision>;

    /// Feeds the outcome of `decision` back into the policy.
    fn observe(&mut self, ctx: &StepContext<'_>, decision: &Decision, outcome: &Outcome) -> Result<()>;

    /// Number of observed steps.
    fn steps(&self) -> u64;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    TsAsc,
    Clucb2AscC,
    Clucb2AscI,
    VanillaTs,
    Baseline,
}

impl PolicyKind {
    pub fn label(self) -> &'static str {
        match self {
            PolicyKind::TsAsc => "ts_asc",
            PolicyKind::Clucb2AscC => "clucb2_asc_c",
            PolicyKind::Clucb2AscI => "clucb2_asc_i",
            PolicyKind::VanillaTs => "vanilla_ts",
            PolicyKind::Baseline => "baseline",
        }
    }
}

/// Hyperparameters of the linear-Gaussian metric models and their
/// confidence sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinearModelSettings {
    pub delta: f64,
    pub lambda: f64,
    pub noise_std: f64,
    /// Bound `S` on `‖θ‖`; defaults to `3√d`.
    pub param_bound: Option<f64>,
    /// Bound `L` on `‖x‖`; defaults to the largest feature norm seen so far.
    pub feature_bound: Option<f64>,
    /// Known lower bound on the baseline's expected constraint value.
    pub r_l: f64,
}

impl Default for LinearModelSettings {
    fn default() -> Self {
        Self {
            delta: 0.001,
            lambda: 1.0,
            noise_std: 0.1,
            param_bound: None,
            feature_bound: None,
            r_l: 0.0,
        }
    }
}

impl LinearModelSettings {
    pub fn radius(&self, dim: usize) -> Result<ConfidenceRadius> {
        let s = self.param_bound.unwrap_or_else(|| ConfidenceRadius::default_param_bound(dim));
        // Placeholder L; registered feature norms raise it.
        ConfidenceRadius::new(self.delta, s, self.feature_bound.unwrap_or(f64::MIN_POSITIVE))
    }
}

/// Builds a policy over linear-Gaussian reward and constraint models.
pub fn build_linear_policy(
    kind: PolicyKind,
    alpha: f64,
    dim: usize,
    settings: &LinearModelSettings,
) -> Result<Box<dyn Policy>> {
    let linear = || MetricModel::linear(dim, settings.lambda, settings.noise_std);
    Ok(match kind {
        PolicyKind::TsAsc => Box::new(ThompsonSampling::ts_asc(linear()?, alpha)?),
        PolicyKind::VanillaTs => Box::new(ThompsonSampling::vanilla(linear()?)),
        PolicyKind::Clucb2AscC | PolicyKind::Clucb2AscI => {
            let scope = if kind == PolicyKind::Clucb2AscC {
                ConstraintScope::Cumulative
            } else {
                ConstraintScope::Instance
            };
            let mut policy = Clucb2::new(scope, dim, alpha, settings.r_l, settings.lambda, settings.noise_std, settings.radius(dim)?)?;
            if settings.feature_bound.is_some() {
                policy = policy.with_fixed_feature_bound();
            }
            Box::new(policy)
        }
        PolicyKind::Baseline => Box::new(FixedBaseline::default()),
    })
}

/// Builds a policy over a Bernoulli success model whose reward is the
/// success probability times a per-action payoff.
pub fn build_success_policy(
    kind: PolicyKind,
    alpha: f64,
    dim: usize,
    lambda: f64,
    payoffs: Vec<f64>,
    refit: RefitSchedule,
) -> Result<Box<dyn Policy>> {
    let model = || MetricModel::success(dim, lambda, payoffs.clone(), refit);
    Ok(match kind {
        PolicyKind::TsAsc => Box::new(ThompsonSampling::ts_asc(model()?, alpha)?),
        PolicyKind::VanillaTs => Box::new(ThompsonSampling::vanilla(model()?)),
        PolicyKind::Baseline => Box::new(FixedBaseline::default()),
        PolicyKind::Clucb2AscC | PolicyKind::Clucb2AscI => {
            return Err(Error::Config(format!(
                "{} needs linear-Gaussian metric models",
                kind.label()
            )))
        }
    })
}
