use serde::{Deserialize, Serialize};

use super::env::Environment;
use crate::error::{Error, Result};
use crate::policies::{Decision, Policy};
use crate::problems::Quality;
use crate::rng::{keyed_rng, Stream};

/// What happened at one step, with the ground-truth quantities the metrics
/// are computed from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: u64,
    pub action: usize,
    pub baseline: usize,
    pub reward: f64,
    pub constraint: f64,
    pub expected_reward: f64,
    pub expected_constraint: f64,
    pub baseline_constraint: f64,
    /// `E[c | a_t] < (1 − α) E[c | b_t]` under the environment's `α`.
    pub violation: bool,
    /// Against the best feasible expected reward; negative when an
    /// infeasible action beats it.
    pub regret: f64,
    /// Against the best expected reward overall; never negative.
    pub regret_unconstrained: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<Quality>,
}

impl StepRecord {
    /// `E[c | a_t] / E[c | b_t]`.
    pub fn normalized_constraint(&self) -> f64 {
        self.expected_constraint / self.baseline_constraint
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub policy: String,
    pub spec_alpha: f64,
    pub records: Vec<StepRecord>,
}

impl EpisodeTrace {
    pub fn horizon(&self) -> usize {
        self.records.len()
    }

    pub fn violations(&self) -> Vec<bool> {
        self.records.iter().map(|r| r.violation).collect()
    }

    /// JSON-lines encoding, one [`StepRecord`] per line.
    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r)?);
            out.push('\n');
        }
        Ok(out)
    }

    pub fn from_jsonl(policy: &str, spec_alpha: f64, text: &str) -> Result<Self> {
        let records = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect::<std::result::Result<Vec<StepRecord>, _>>()?;
        Ok(Self {
            policy: policy.to_string(),
            spec_alpha,
            records,
        })
    }
}

/// Runs `policy` for `horizon` steps. Randomness comes from the policy,
/// environment and context streams of `key`, so two policies run under the
/// same key see the same contexts and outcome noise.
pub fn run_episode<E: Environment>(env: &E, policy: &mut dyn Policy, horizon: usize, key: u64) -> Result<EpisodeTrace> {
    run_episode_with(env, policy, horizon, key, |_, _| Ok(()))
}

/// [`run_episode`] with a hook receiving every decision and its record.
///
/// Every decision is checked to contain its action and the baseline action
/// in its feasible set.
pub fn run_episode_with<E, F>(
    env: &E,
    policy: &mut dyn Policy,
    horizon: usize,
    key: u64,
    mut hook: F,
) -> Result<EpisodeTrace>
where
    E: Environment,
    F: FnMut(&Decision, &StepRecord) -> Result<()>,
{
    if horizon == 0 {
        return Err(Error::Config("horizon must be at least 1".into()));
    }
    let mut policy_rng = keyed_rng(key, Stream::Policy);
    let mut env_rng = keyed_rng(key, Stream::Environment);
    let mut context_rng = keyed_rng(key, Stream::Context);
    let alpha = env.spec_alpha();
    let mut records = Vec::with_capacity(horizon);
    for t in 1..=horizon as u64 {
        let step = env.next_step(&mut context_rng);
        let ctx = step.context();
        let decision = policy.select(&ctx, &mut policy_rng).map_err(|e| e.at_step(t))?;
        if !decision.is_consistent() || !ctx.available.contains(&decision.action) {
            return Err(Error::Internal(format!(
                "{} chose action {} outside its feasible set {:?}",
                policy.name(),
                decision.action,
                decision.feasible
            ))
            .at_step(t));
        }
        let outcome = env
            .sample_outcome(&step, decision.action, &mut env_rng)
            .map_err(|e| e.at_step(t))?;
        policy.observe(&ctx, &decision, &outcome).map_err(|e| e.at_step(t))?;

        let (expected_reward, expected_constraint) = env.expected(&step, decision.action);
        let (_, baseline_constraint) = env.expected(&step, step.baseline);
        let reference = env.reference(&step);
        let record = StepRecord {
            t,
            action: decision.action,
            baseline: step.baseline,
            reward: outcome.reward,
            constraint: outcome.constraint,
            expected_reward,
            expected_constraint,
            baseline_constraint,
            violation: expected_constraint < (1.0 - alpha) * baseline_constraint,
            regret: reference.feasible - expected_reward,
            regret_unconstrained: reference.unconstrained - expected_reward,
            source: env.source(&step),
        };
        hook(&decision, &record).map_err(|e| e.at_step(t))?;
        records.push(record);
    }
    Ok(EpisodeTrace {
        policy: policy.name().to_string(),
        spec_alpha: alpha,
        records,
    })
}
