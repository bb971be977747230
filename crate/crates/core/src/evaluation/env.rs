use std::borrow::Cow;

use nalgebra::DMatrix;
use rand::RngCore;

use crate::error::Result;
use crate::policies::{Outcome, StepContext};
use crate::problems::{LinearConstraintProblem, Quality, RewardShape, TranscodeContext, TranscodeProblem};

/// One environment step as handed to a policy, plus environment-private
/// state needed to resolve outcomes.
#[derive(Debug, Clone)]
pub struct EnvStep<'a, S> {
    pub features: Cow<'a, DMatrix<f64>>,
    pub available: Cow<'a, [usize]>,
    pub baseline: usize,
    pub state: S,
}

impl<S> EnvStep<'_, S> {
    pub fn context(&self) -> StepContext<'_> {
        StepContext {
            features: &self.features,
            available: &self.available,
            baseline: self.baseline,
        }
    }
}

/// Regret reference points for one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardReference {
    /// Best expected reward among actions satisfying the true constraint.
    pub feasible: f64,
    /// Best expected reward among all available actions.
    pub unconstrained: f64,
}

/// A ground-truth environment the episode runner can drive.
pub trait Environment: Sync {
    type State;

    /// Draws the next step from the context stream.
    fn next_step(&self, rng: &mut dyn RngCore) -> EnvStep<'_, Self::State>;

    /// `(E[r | x, a], E[c | x, a])` under the true model.
    fn expected(&self, step: &EnvStep<'_, Self::State>, action: usize) -> (f64, f64);

    fn sample_outcome(&self, step: &EnvStep<'_, Self::State>, action: usize, rng: &mut dyn RngCore) -> Result<Outcome>;

    fn reference(&self, step: &EnvStep<'_, Self::State>) -> RewardReference;

    /// `α` of the true instance-level constraint.
    fn spec_alpha(&self) -> f64;

    /// Source quality of the step, where that notion exists.
    fn source(&self, _step: &EnvStep<'_, Self::State>) -> Option<Quality> {
        None
    }
}

/// The synthetic problem seen as a context-free environment: every step
/// offers all arms and the baseline arm.
#[derive(Debug, Clone)]
pub struct SyntheticEnv<'p> {
    problem: &'p LinearConstraintProblem,
    arms: Vec<usize>,
    reference: RewardReference,
}

impl<'p> SyntheticEnv<'p> {
    pub fn new(problem: &'p LinearConstraintProblem) -> Self {
        let alpha = problem.spec_alpha();
        Self {
            problem,
            arms: (0..problem.arms()).collect(),
            reference: RewardReference {
                feasible: problem.oracle_optimal_feasible_reward(alpha),
                unconstrained: problem.oracle_optimal_reward(),
            },
        }
    }

    pub fn problem(&self) -> &LinearConstraintProblem {
        self.problem
    }
}

impl Environment for SyntheticEnv<'_> {
    type State = ();

    fn next_step(&self, _rng: &mut dyn RngCore) -> EnvStep<'_, ()> {
        EnvStep {
            features: Cow::Borrowed(self.problem.features()),
            available: Cow::Borrowed(&self.arms),
            baseline: self.problem.baseline(),
            state: (),
        }
    }

    fn expected(&self, _step: &EnvStep<'_, ()>, action: usize) -> (f64, f64) {
        (self.problem.reward_means()[action], self.problem.constraint_means()[action])
    }

    fn sample_outcome(&self, _step: &EnvStep<'_, ()>, action: usize, rng: &mut dyn RngCore) -> Result<Outcome> {
        let (reward, constraint) = self.problem.sample_outcomes(action, rng);
        Ok(Outcome { reward, constraint })
    }

    fn reference(&self, _step: &EnvStep<'_, ()>) -> RewardReference {
        self.reference
    }

    fn spec_alpha(&self) -> f64 {
        self.problem.spec_alpha()
    }
}

/// The upload simulator under a fixed reward shape. The constraint `α`
/// of the environment is the shape's `α`.
#[derive(Debug, Clone)]
pub struct TranscodeEnv<'p> {
    problem: &'p TranscodeProblem,
    shape: RewardShape,
}

impl<'p> TranscodeEnv<'p> {
    pub fn new(problem: &'p TranscodeProblem, shape: RewardShape) -> Self {
        Self { problem, shape }
    }

    pub fn shape(&self) -> &RewardShape {
        &self.shape
    }

    pub fn problem(&self) -> &TranscodeProblem {
        self.problem
    }
}

impl Environment for TranscodeEnv<'_> {
    type State = TranscodeContext;

    fn next_step(&self, rng: &mut dyn RngCore) -> EnvStep<'_, TranscodeContext> {
        let ctx = self.problem.transcode_step(rng);
        let baseline = self.problem.baseline_action(&ctx);
        EnvStep {
            features: Cow::Owned(self.problem.action_features(&ctx.x)),
            available: Cow::Owned(ctx.available.clone()),
            baseline,
            state: ctx,
        }
    }

    fn expected(&self, step: &EnvStep<'_, TranscodeContext>, action: usize) -> (f64, f64) {
        let q = Quality::ALL[action];
        let p = self.problem.success_probability(&step.state.x, q);
        (p * self.shape.payoff(q), p)
    }

    fn sample_outcome(
        &self,
        step: &EnvStep<'_, TranscodeContext>,
        action: usize,
        rng: &mut dyn RngCore,
    ) -> Result<Outcome> {
        let out = self.problem.transcode_outcome(&step.state, action, &self.shape, rng)?;
        Ok(Outcome {
            reward: out.reward,
            constraint: out.constraint,
        })
    }

    fn reference(&self, step: &EnvStep<'_, TranscodeContext>) -> RewardReference {
        let (_, cb) = self.expected(step, step.baseline);
        let threshold = (1.0 - self.shape.alpha) * cb;
        let mut feasible = f64::NEG_INFINITY;
        let mut unconstrained = f64::NEG_INFINITY;
        for &a in step.available.iter() {
            let (r, c) = self.expected(step, a);
            unconstrained = unconstrained.max(r);
            if a == step.baseline || c >= threshold {
                feasible = feasible.max(r);
            }
        }
        RewardReference { feasible, unconstrained }
    }

    fn spec_alpha(&self) -> f64 {
        self.shape.alpha
    }

    fn source(&self, step: &EnvStep<'_, TranscodeContext>) -> Option<Quality> {
        Some(step.state.source)
    }
}
