use nalgebra::{DMatrix, DVector};
use rand::RngCore;

use super::{Decision, DecisionScores, Outcome, Policy, StepContext};
use crate::bayes::{ConfidenceRadius, GaussianLinearPosterior};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintScope {
    /// Constraint enforced on running sums (CLUCB2-ASC-C).
    Cumulative,
    /// Constraint enforced at every step (CLUCB2-ASC-I).
    Instance,
}

/// Running sums of the conservative check.
#[derive(Debug, Clone, PartialEq)]
pub struct Clucb2Accumulators {
    /// Baseline plays.
    pub n: u64,
    /// `Σ x_{a_t}` over non-baseline plays.
    pub z: DVector<f64>,
    /// `Σ x_{b_t}` over baseline plays.
    pub w: DVector<f64>,
    /// `Σ x_{b_t}` over non-baseline plays.
    pub v: DVector<f64>,
    /// Known lower bound on the baseline's expected constraint value.
    pub r_l: f64,
}

impl Clucb2Accumulators {
    pub fn new(dim: usize, r_l: f64) -> Self {
        Self {
            n: 0,
            z: DVector::zeros(dim),
            w: DVector::zeros(dim),
            v: DVector::zeros(dim),
            r_l,
        }
    }
}

/// Conservative linear UCB with the safety check moved to the constraint
/// metric.
///
/// Cumulative scope, for each candidate `a'`:
///
/// ```text
///   R_t = max_{θ ∈ C_c} (v + x_b)ᵀθ
///   L_t = min_{θ ∈ C_c} (z + x_a')ᵀθ + α · max(min_{θ ∈ C_c} wᵀθ, n·r_l)
///   a' feasible  ⇔  L_t ≥ (1 − α) R_t
/// ```
///
/// Instance scope: `a'` is feasible iff `LCB_c(a') ≥ (1 − α) UCB_c(b)`.
///
/// Both play the reward-UCB maximizer over the feasible set, which always
/// contains `b`.
#[derive(Debug, Clone)]
pub struct Clucb2 {
    scope: ConstraintScope,
    alpha: f64,
    reward: GaussianLinearPosterior,
    constraint: GaussianLinearPosterior,
    radius: ConfidenceRadius,
    track_feature_bound: bool,
    fixed_beta: Option<f64>,
    acc: Clucb2Accumulators,
    steps: u64,
}

/// Values of the conservative check for one candidate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CumulativeBounds {
    pub lower: f64,
    pub upper: f64,
}

impl Clucb2 {
    pub fn new(
        scope: ConstraintScope,
        dim: usize,
        alpha: f64,
        r_l: f64,
        lambda: f64,
        noise_std: f64,
        radius: ConfidenceRadius,
    ) -> Result<Self> {
        if !(alpha.is_finite() && alpha >= 0.0) {
            return Err(Error::Config(format!("alpha must be a nonnegative number, got {alpha}")));
        }
        Ok(Self {
            scope,
            alpha,
            reward: GaussianLinearPosterior::new(dim, lambda, noise_std)?,
            constraint: GaussianLinearPosterior::new(dim, lambda, noise_std)?,
            radius,
            track_feature_bound: true,
            fixed_beta: None,
            acc: Clucb2Accumulators::new(dim, r_l),
            steps: 0,
        })
    }

    /// Replaces the posteriors, e.g. with exact models in checks.
    pub fn with_models(mut self, reward: GaussianLinearPosterior, constraint: GaussianLinearPosterior) -> Result<Self> {
        if reward.dim() != self.reward.dim() || constraint.dim() != self.reward.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.reward.dim(),
                actual: reward.dim(),
            });
        }
        self.reward = reward;
        self.constraint = constraint;
        Ok(self)
    }

    /// Uses `beta` for every confidence set instead of the radius formula.
    pub fn with_fixed_beta(mut self, beta: f64) -> Self {
        self.fixed_beta = Some(beta);
        self
    }

    /// Keeps the configured feature bound instead of raising it to cover
    /// observed feature norms.
    pub fn with_fixed_feature_bound(mut self) -> Self {
        self.track_feature_bound = false;
        self
    }

    pub fn with_accumulators(mut self, acc: Clucb2Accumulators) -> Self {
        self.acc = acc;
        self
    }

    pub fn scope(&self) -> ConstraintScope {
        self.scope
    }

    pub fn accumulators(&self) -> &Clucb2Accumulators {
        &self.acc
    }

    pub fn reward_model(&self) -> &GaussianLinearPosterior {
        &self.reward
    }

    pub fn constraint_model(&self) -> &GaussianLinearPosterior {
        &self.constraint
    }

    pub fn radius(&self) -> &ConfidenceRadius {
        &self.radius
    }

    fn beta(&self, post: &GaussianLinearPosterior) -> f64 {
        self.fixed_beta
            .unwrap_or_else(|| self.radius.beta(post.count(), post.dim(), post.noise_std(), post.lambda()))
    }

    fn register(&mut self, features: &DMatrix<f64>) {
        if self.track_feature_bound {
            for row in features.row_iter() {
                self.radius.register_feature_norm(row.norm());
            }
        }
    }

    fn bound(post: &GaussianLinearPosterior, x: &DVector<f64>, beta: f64) -> (f64, f64) {
        let center = x.dot(post.mean());
        let half = if beta == 0.0 {
            0.0
        } else {
            beta * post.inverse_quadratic(x.as_slice()).sqrt()
        };
        (center - half, center + half)
    }

    /// `(L_t, R_t)` for candidate `candidate` against baseline `baseline`.
    pub fn cumulative_bounds(&self, features: &DMatrix<f64>, candidate: usize, baseline: usize) -> CumulativeBounds {
        let beta = self.beta(&self.constraint);
        let x_b = features.row(baseline).transpose();
        let x_a = features.row(candidate).transpose();
        let (_, upper) = Self::bound(&self.constraint, &(&self.acc.v + x_b), beta);
        let (lower_sum, _) = Self::bound(&self.constraint, &(&self.acc.z + x_a), beta);
        let (lower_w, _) = Self::bound(&self.constraint, &self.acc.w, beta);
        let slack = self.alpha * lower_w.max(self.acc.n as f64 * self.acc.r_l);
        CumulativeBounds {
            lower: lower_sum + slack,
            upper,
        }
    }

    /// Feasible set (ascending, always containing `ctx.baseline`).
    pub fn feasible_set(&self, ctx: &StepContext<'_>) -> Vec<usize> {
        let b = ctx.baseline;
        let beta = self.beta(&self.constraint);
        let features = ctx.features;
        let means: Vec<f64> = (features * self.constraint.mean()).iter().copied().collect();
        let whitened = self.constraint.whiten(&features.transpose());
        let mut feasible = match self.scope {
            ConstraintScope::Instance => {
                let ucb_b = means[b] + beta * whitened.column(b).norm();
                let threshold = (1.0 - self.alpha) * ucb_b;
                ctx.available
                    .iter()
                    .copied()
                    .filter(|&a| a == b || means[a] - beta * whitened.column(a).norm() >= threshold)
                    .collect::<Vec<_>>()
            }
            ConstraintScope::Cumulative => {
                let theta = self.constraint.mean();
                let x_b = features.row(b).transpose();
                let upper_vec = &self.acc.v + &x_b;
                let upper = upper_vec.dot(theta) + beta * self.constraint.inverse_quadratic(upper_vec.as_slice()).sqrt();
                let lower_w = self.acc.w.dot(theta) - beta * self.constraint.inverse_quadratic(self.acc.w.as_slice()).sqrt();
                let slack = self.alpha * lower_w.max(self.acc.n as f64 * self.acc.r_l);
                let threshold = (1.0 - self.alpha) * upper;
                let z_center = self.acc.z.dot(theta);
                let z_white = self.constraint.whiten(&DMatrix::from_column_slice(self.acc.z.len(), 1, self.acc.z.as_slice()));
                ctx.available
                    .iter()
                    .copied()
                    .filter(|&a| {
                        if a == b {
                            return true;
                        }
                        let width = (z_white.column(0) + whitened.column(a)).norm();
                        let lower = z_center + means[a] - beta * width + slack;
                        lower >= threshold
                    })
                    .collect::<Vec<_>>()
            }
        };
        if !feasible.contains(&b) {
            feasible.push(b);
        }
        feasible.sort_unstable();
        feasible
    }

    /// Reward UCB of every feature row.
    pub fn reward_ucbs(&self, features: &DMatrix<f64>) -> Vec<f64> {
        let beta = self.beta(&self.reward);
        let means = features * self.reward.mean();
        let whitened = self.reward.whiten(&features.transpose());
        means
            .iter()
            .zip(whitened.column_iter())
            .map(|(m, w)| m + beta * w.norm())
            .collect()
    }
}

impl Policy for Clucb2 {
    fn name(&self) -> &'static str {
        match self.scope {
            ConstraintScope::Cumulative => "clucb2_asc_c",
            ConstraintScope::Instance => "clucb2_asc_i",
        }
    }

    fn select(&mut self, ctx: &StepContext<'_>, _rng: &mut dyn RngCore) -> Result<Decision> {
        ctx.validate()?;
        if ctx.features.ncols() != self.reward.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.reward.dim(),
                actual: ctx.features.ncols(),
            });
        }
        self.register(ctx.features);
        let feasible = self.feasible_set(ctx);
        let ucbs = self.reward_ucbs(ctx.features);
        let mut action = feasible[0];
        for &a in &feasible[1..] {
            if ucbs[a] > ucbs[action] {
                action = a;
            }
        }
        let beta_c = self.beta(&self.constraint);
        let row = |a: usize| ctx.row(a);
        let (lcb, _) = self.constraint.ellipsoid_extrema(&row(action), beta_c)?;
        let (_, ucb_b) = self.constraint.ellipsoid_extrema(&row(ctx.baseline), beta_c)?;
        Ok(Decision {
            t: self.steps + 1,
            action,
            baseline: ctx.baseline,
            feasible,
            scores: Some(DecisionScores {
                reward: ucbs[action],
                constraint: lcb,
                baseline_constraint: ucb_b,
            }),
        })
    }

    fn observe(&mut self, ctx: &StepContext<'_>, decision: &Decision, outcome: &Outcome) -> Result<()> {
        if ctx.features.ncols() != self.reward.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.reward.dim(),
                actual: ctx.features.ncols(),
            });
        }
        let x = ctx.row(decision.action);
        self.reward.update(&x, outcome.reward)?;
        self.constraint.update(&x, outcome.constraint)?;
        if self.scope == ConstraintScope::Cumulative {
            let x_b = ctx.features.row(decision.baseline).transpose();
            if decision.action != decision.baseline {
                self.acc.z += ctx.features.row(decision.action).transpose();
                self.acc.v += x_b;
            } else {
                self.acc.w += x_b;
                self.acc.n += 1;
            }
        }
        self.steps += 1;
        Ok(())
    }

    fn steps(&self) -> u64 {
        self.steps
    }
}
