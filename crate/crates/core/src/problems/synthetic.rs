use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Size of the reward-ranked pool the baseline arm is drawn from.
pub const BASELINE_POOL: usize = 30;
/// Rank (1-based, by expected constraint) of the baseline arm within the pool.
pub const BASELINE_RANK: usize = 20;

/// Knobs of the synthetic generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticConfig {
    pub arms: usize,
    pub dim: usize,
    pub noise_std: f64,
    /// Candidate problems allowed before giving up.
    pub max_draws: usize,
    /// Feature redraws allowed per arm before the candidate is rejected.
    pub max_arm_draws: usize,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            arms: 100,
            dim: 4,
            noise_std: 0.1,
            max_draws: 100_000,
            max_arm_draws: 10_000,
        }
    }
}

/// Fixed-arm linear problem with a reward and a constraint metric.
///
/// Arm `a` has features `x_a`; outcomes are `r ~ N(x_aᵀθ_r, σ²)` and
/// `c ~ N(x_aᵀθ_c, σ²)`. The baseline policy always plays arm `b`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraintProblem {
    seed: u64,
    features: DMatrix<f64>,
    theta_reward: DVector<f64>,
    theta_constraint: DVector<f64>,
    noise_std: f64,
    spec_alpha: f64,
    baseline: usize,
    reward_means: Vec<f64>,
    constraint_means: Vec<f64>,
}

/// Returns `BASELINE_RANK`-th best arm by constraint among the
/// `BASELINE_POOL` best arms by reward. Ties at either stage go to the lowest
/// arm index; ties at the selected constraint value resolve to the lowest
/// index carrying that value.
pub fn select_baseline(reward_means: &[f64], constraint_means: &[f64]) -> Result<usize> {
    let k = reward_means.len();
    if k != constraint_means.len() {
        return Err(Error::DimensionMismatch {
            expected: k,
            actual: constraint_means.len(),
        });
    }
    if k <= BASELINE_POOL {
        return Err(Error::InvalidInput(format!(
            "baseline selection needs at least {} arms, got {k}",
            BASELINE_POOL + 1
        )));
    }
    let mut by_reward: Vec<usize> = (0..k).collect();
    by_reward.sort_by(|&a, &b| reward_means[b].total_cmp(&reward_means[a]).then(a.cmp(&b)));
    let mut pool = by_reward[..BASELINE_POOL].to_vec();
    pool.sort_by(|&a, &b| constraint_means[b].total_cmp(&constraint_means[a]).then(a.cmp(&b)));
    let value = constraint_means[pool[BASELINE_RANK - 1]];
    let chosen = pool
        .iter()
        .copied()
        .filter(|&a| constraint_means[a] == value)
        .min()
        .expect("pool contains the ranked arm");
    Ok(chosen)
}

fn feasible_mask(constraint_means: &[f64], baseline: usize, alpha: f64) -> impl Iterator<Item = bool> + '_ {
    let threshold = (1.0 - alpha) * constraint_means[baseline];
    constraint_means.iter().enumerate().map(move |(a, &c)| a == baseline || c >= threshold)
}

fn max_feasible_reward(reward: &[f64], constraint: &[f64], baseline: usize, alpha: f64) -> f64 {
    feasible_mask(constraint, baseline, alpha)
        .zip(reward)
        .filter_map(|(ok, &r)| ok.then_some(r))
        .fold(f64::NEG_INFINITY, f64::max)
}

fn has_tradeoff(reward: &[f64], constraint: &[f64], baseline: usize, alpha: f64) -> bool {
    let best = reward.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max_feasible_reward(reward, constraint, baseline, alpha) < best
}

fn draw_vector(rng: &mut dyn RngCore, dim: usize) -> DVector<f64> {
    DVector::from_fn(dim, |_, _| StandardNormal.sample(&mut *rng))
}

/// Draws a problem with `θ_r, θ_c ~ N(0, I)` and arm features `x_a ~ N(0, I)`
/// conditioned on positive expected metrics for every arm, redrawing all
/// parameters until the best reward among `alpha`-feasible arms falls short
/// of the best reward overall.
///
/// Positivity is enforced arm by arm given the parameters: each `x_a` is
/// redrawn until both of its means are positive.
pub fn generate_synthetic(seed: u64, alpha: f64, config: &SyntheticConfig) -> Result<LinearConstraintProblem> {
    let SyntheticConfig {
        arms,
        dim,
        noise_std,
        max_draws,
        max_arm_draws,
    } = *config;
    if arms <= BASELINE_POOL {
        return Err(Error::Config(format!(
            "synthetic problems need at least {} arms, got {arms}",
            BASELINE_POOL + 1
        )));
    }
    if dim == 0 {
        return Err(Error::Config("dimension must be positive".into()));
    }
    check_alpha(alpha)?;
    if !(noise_std.is_finite() && noise_std >= 0.0) {
        return Err(Error::Config(format!("noise std must be nonnegative, got {noise_std}")));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut positivity = 0;
    let mut tradeoff = 0;
    'draws: for _ in 0..max_draws {
        let theta_reward = draw_vector(&mut rng, dim);
        let theta_constraint = draw_vector(&mut rng, dim);
        let mut features = DMatrix::zeros(arms, dim);
        for a in 0..arms {
            let mut accepted = false;
            for _ in 0..max_arm_draws {
                let x = draw_vector(&mut rng, dim);
                if x.dot(&theta_reward) > 0.0 && x.dot(&theta_constraint) > 0.0 {
                    features.set_row(a, &x.transpose());
                    accepted = true;
                    break;
                }
            }
            if !accepted {
                positivity += 1;
                continue 'draws;
            }
        }
        let reward_means: Vec<f64> = (&features * &theta_reward).iter().copied().collect();
        let constraint_means: Vec<f64> = (&features * &theta_constraint).iter().copied().collect();
        let baseline = select_baseline(&reward_means, &constraint_means)?;
        if !has_tradeoff(&reward_means, &constraint_means, baseline, alpha) {
            tradeoff += 1;
            continue;
        }
        return Ok(LinearConstraintProblem {
            seed,
            features,
            theta_reward,
            theta_constraint,
            noise_std,
            spec_alpha: alpha,
            baseline,
            reward_means,
            constraint_means,
        });
    }
    Err(Error::GenerationFailed {
        draws: max_draws,
        positivity,
        tradeoff,
        dominant: if positivity >= tradeoff { "positivity" } else { "trade-off" },
    })
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::Config(format!("alpha must lie in [0, 1), got {alpha}")));
    }
    Ok(())
}

impl LinearConstraintProblem {
    /// Assembles a problem from explicit parameters; the baseline is chosen
    /// by [`select_baseline`] unless `baseline` is given. No trade-off check
    /// is applied.
    pub fn from_parts(
        features: DMatrix<f64>,
        theta_reward: DVector<f64>,
        theta_constraint: DVector<f64>,
        noise_std: f64,
        spec_alpha: f64,
        baseline: Option<usize>,
    ) -> Result<Self> {
        let (k, d) = features.shape();
        if theta_reward.len() != d || theta_constraint.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: theta_reward.len().max(theta_constraint.len()),
            });
        }
        if k == 0 {
            return Err(Error::InvalidInput("problem needs at least one arm".into()));
        }
        check_alpha(spec_alpha)?;
        let reward_means: Vec<f64> = (&features * &theta_reward).iter().copied().collect();
        let constraint_means: Vec<f64> = (&features * &theta_constraint).iter().copied().collect();
        let baseline = match baseline {
            Some(b) if b < k => b,
            Some(b) => return Err(Error::InvalidInput(format!("baseline arm {b} out of range"))),
            None => select_baseline(&reward_means, &constraint_means)?,
        };
        Ok(Self {
            seed: 0,
            features,
            theta_reward,
            theta_constraint,
            noise_std,
            spec_alpha,
            baseline,
            reward_means,
            constraint_means,
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn arms(&self) -> usize {
        self.features.nrows()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    /// Arm features, one row per arm.
    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    pub fn theta_reward(&self) -> &DVector<f64> {
        &self.theta_reward
    }

    pub fn theta_constraint(&self) -> &DVector<f64> {
        &self.theta_constraint
    }

    pub fn noise_std(&self) -> f64 {
        self.noise_std
    }

    pub fn spec_alpha(&self) -> f64 {
        self.spec_alpha
    }

    pub fn baseline(&self) -> usize {
        self.baseline
    }

    pub fn reward_means(&self) -> &[f64] {
        &self.reward_means
    }

    pub fn constraint_means(&self) -> &[f64] {
        &self.constraint_means
    }

    /// Same problem evaluated under another `alpha`. The trade-off condition
    /// must still hold; it always does for a smaller `alpha`.
    pub fn with_spec_alpha(&self, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        if !has_tradeoff(&self.reward_means, &self.constraint_means, self.baseline, alpha) {
            return Err(Error::Config(format!("trade-off condition fails at alpha {alpha}")));
        }
        Ok(Self {
            spec_alpha: alpha,
            ..self.clone()
        })
    }

    /// Same problem with a different outcome noise level.
    pub fn with_noise_std(&self, noise_std: f64) -> Self {
        Self {
            noise_std,
            ..self.clone()
        }
    }

    pub fn sample_outcomes(&self, arm: usize, rng: &mut dyn RngCore) -> (f64, f64) {
        let mean_r = self.reward_means[arm];
        let mean_c = self.constraint_means[arm];
        if self.noise_std == 0.0 {
            return (mean_r, mean_c);
        }
        let noise = Normal::new(0.0, self.noise_std).expect("validated noise");
        let r = mean_r + noise.sample(&mut *rng);
        let c = mean_c + noise.sample(&mut *rng);
        (r, c)
    }

    /// Arms satisfying `x_aᵀθ_c ≥ (1 − α) x_bᵀθ_c` under the true parameters.
    pub fn oracle_feasible_set(&self, alpha: f64) -> Vec<usize> {
        feasible_mask(&self.constraint_means, self.baseline, alpha)
            .enumerate()
            .filter_map(|(a, ok)| ok.then_some(a))
            .collect()
    }

    pub fn is_feasible(&self, arm: usize, alpha: f64) -> bool {
        arm == self.baseline || self.constraint_means[arm] >= (1.0 - alpha) * self.constraint_means[self.baseline]
    }

    pub fn oracle_optimal_feasible_reward(&self, alpha: f64) -> f64 {
        max_feasible_reward(&self.reward_means, &self.constraint_means, self.baseline, alpha)
    }

    pub fn oracle_optimal_reward(&self) -> f64 {
        self.reward_means.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Checks positivity, the trade-off condition at the problem's `alpha`,
    /// and baseline feasibility.
    pub fn invariant_report(&self) -> Vec<(&'static str, bool)> {
        let positive_reward = self.reward_means.iter().all(|&m| m > 0.0);
        let positive_constraint = self.constraint_means.iter().all(|&m| m > 0.0);
        let tradeoff = has_tradeoff(&self.reward_means, &self.constraint_means, self.baseline, self.spec_alpha);
        let baseline_feasible = self.oracle_feasible_set(self.spec_alpha).contains(&self.baseline);
        vec![
            ("positive expected reward", positive_reward),
            ("positive expected constraint", positive_constraint),
            ("trade-off condition", tradeoff),
            ("baseline feasible", baseline_feasible),
        ]
    }

    /// A uniformly random arm, for tests and sanity checks.
    pub fn random_arm(&self, rng: &mut dyn RngCore) -> usize {
        rng.random_range(0..self.arms())
    }
}

/// Serialized form, exact enough to replay a problem across machines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemDocument {
    pub version: u32,
    pub seed: u64,
    #[serde(rename = "K")]
    pub arms: usize,
    pub d: usize,
    /// Arm features, row-major.
    #[serde(rename = "X")]
    pub features: Vec<f64>,
    pub theta_reward: Vec<f64>,
    pub theta_constraint: Vec<f64>,
    pub sigma: f64,
    pub alpha: f64,
    pub baseline: usize,
}

impl ProblemDocument {
    pub const VERSION: u32 = 1;
}

impl From<&LinearConstraintProblem> for ProblemDocument {
    fn from(p: &LinearConstraintProblem) -> Self {
        let mut features = Vec::with_capacity(p.arms() * p.dim());
        for row in p.features.row_iter() {
            features.extend(row.iter().copied());
        }
        Self {
            version: Self::VERSION,
            seed: p.seed,
            arms: p.arms(),
            d: p.dim(),
            features,
            theta_reward: p.theta_reward.iter().copied().collect(),
            theta_constraint: p.theta_constraint.iter().copied().collect(),
            sigma: p.noise_std,
            alpha: p.spec_alpha,
            baseline: p.baseline,
        }
    }
}

impl TryFrom<ProblemDocument> for LinearConstraintProblem {
    type Error = Error;

    fn try_from(doc: ProblemDocument) -> Result<Self> {
        if doc.version != ProblemDocument::VERSION {
            return Err(Error::InvalidInput(format!("unsupported problem version {}", doc.version)));
        }
        if doc.features.len() != doc.arms * doc.d {
            return Err(Error::DimensionMismatch {
                expected: doc.arms * doc.d,
                actual: doc.features.len(),
            });
        }
        let features = DMatrix::from_row_slice(doc.arms, doc.d, &doc.features);
        let mut problem = Self::from_parts(
            features,
            DVector::from_vec(doc.theta_reward),
            DVector::from_vec(doc.theta_constraint),
            doc.sigma,
            doc.alpha,
            Some(doc.baseline),
        )?;
        problem.seed = doc.seed;
        Ok(problem)
    }
}

impl LinearConstraintProblem {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ProblemDocument::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ProblemDocument = serde_json::from_str(text)?;
        doc.try_into()
    }
}
