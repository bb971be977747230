use rand::RngCore;

use super::{Decision, Outcome, Policy, StepContext};
use crate::error::Result;

/// Plays the environment's baseline action `b_t` every step.
#[derive(Debug, Clone, Default)]
pub struct FixedBaseline {
    steps: u64,
}

impl Policy for FixedBaseline {
    fn name(&self) -> &'static str {
        "baseline"
    }

    fn select(&mut self, ctx: &StepContext<'_>, _rng: &mut dyn RngCore) -> Result<Decision> {
        ctx.validate()?;
        Ok(Decision {
            t: self.steps + 1,
            action: ctx.baseline,
            baseline: ctx.baseline,
            feasible: vec![ctx.baseline],
            scores: None,
        })
    }

    fn observe(&mut self, _ctx: &StepContext<'_>, _decision: &Decision, _outcome: &Outcome) -> Result<()> {
        self.steps += 1;
        Ok(())
    }

    fn steps(&self) -> u64 {
        self.steps
    }
}
