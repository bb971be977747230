use rand::RngCore;

use super::{Decision, DecisionScores, MetricModel, Outcome, Policy, StepContext};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConstraintFilter {
    /// Keep `a` iff `f̃_c(a) ≥ (1 − α) f̃_c(b)`.
    Relative { alpha: f64 },
    /// Every available action is feasible.
    Disabled,
}

/// Filters `available` by the sampled constraint and returns the sampled
/// reward maximizer among the survivors, together with the feasible set.
///
/// The baseline action is always feasible. Ties go to the lowest index.
pub fn select_feasible_argmax(
    available: &[usize],
    reward: &[f64],
    constraint: &[f64],
    baseline: usize,
    filter: ConstraintFilter,
) -> (usize, Vec<usize>) {
    let threshold = match filter {
        ConstraintFilter::Relative { alpha } => (1.0 - alpha) * constraint[baseline],
        ConstraintFilter::Disabled => f64::NEG_INFINITY,
    };
    let mut feasible: Vec<usize> = available
        .iter()
        .copied()
        .filter(|&a| a == baseline || constraint[a] >= threshold)
        .collect();
    feasible.sort_unstable();
    let mut best = feasible[0];
    for &a in &feasible[1..] {
        if reward[a] > reward[best] {
            best = a;
        }
    }
    (best, feasible)
}

/// Thompson sampling over a [`MetricModel`], optionally with the auxiliary
/// safety filter (TS-ASC).
///
/// Each step draws one model from the posterior, keeps the actions whose
/// sampled constraint value is within a factor `1 − α` of the baseline's, and
/// plays the sampled-reward maximizer among them.
#[derive(Debug, Clone)]
pub struct ThompsonSampling {
    model: MetricModel,
    filter: ConstraintFilter,
    steps: u64,
}

impl ThompsonSampling {
    pub fn ts_asc(model: MetricModel, alpha: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha >= 0.0) {
            return Err(Error::Config(format!("alpha must be a nonnegative number, got {alpha}")));
        }
        Ok(Self {
            model,
            filter: ConstraintFilter::Relative { alpha },
            steps: 0,
        })
    }

    pub fn vanilla(model: MetricModel) -> Self {
        Self {
            model,
            filter: ConstraintFilter::Disabled,
            steps: 0,
        }
    }

    pub fn model(&self) -> &MetricModel {
        &self.model
    }

    pub fn filter(&self) -> ConstraintFilter {
        self.filter
    }
}

impl Policy for ThompsonSampling {
    fn name(&self) -> &'static str {
        match self.filter {
            ConstraintFilter::Relative { .. } => "ts_asc",
            ConstraintFilter::Disabled => "vanilla_ts",
        }
    }

    fn select(&mut self, ctx: &StepContext<'_>, rng: &mut dyn RngCore) -> Result<Decision> {
        ctx.validate()?;
        let scores = self.model.sample_scores(ctx.features, rng)?;
        let (action, feasible) =
            select_feasible_argmax(ctx.available, &scores.reward, &scores.constraint, ctx.baseline, self.filter);
        Ok(Decision {
            t: self.steps + 1,
            action,
            baseline: ctx.baseline,
            feasible,
            scores: Some(DecisionScores {
                reward: scores.reward[action],
                constraint: scores.constraint[action],
                baseline_constraint: scores.constraint[ctx.baseline],
            }),
        })
    }

    fn observe(&mut self, ctx: &StepContext<'_>, decision: &Decision, outcome: &Outcome) -> Result<()> {
        if decision.action >= ctx.features.nrows() {
            return Err(Error::InvalidInput(format!("action {} has no feature row", decision.action)));
        }
        self.model.observe(&ctx.row(decision.action), outcome)?;
        self.steps += 1;
        Ok(())
    }

    fn steps(&self) -> u64 {
        self.steps
    }
}
