use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::bayes::{logistic, softplus};
use crate::error::{Error, Result};

/// Upload qualities, ordered from lowest to highest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Quality {
    #[serde(rename = "360p")]
    P360,
    #[serde(rename = "480p")]
    P480,
    #[serde(rename = "720p")]
    P720,
    #[serde(rename = "1080p")]
    P1080,
}

impl Quality {
    pub const ALL: [Quality; 4] = [Quality::P360, Quality::P480, Quality::P720, Quality::P1080];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn label(self) -> &'static str {
        match self {
            Quality::P360 => "360p",
            Quality::P480 => "480p",
            Quality::P720 => "720p",
            Quality::P1080 => "1080p",
        }
    }
}

/// Upper bounds of the tunable offsets for 480p, 720p and 1080p.
pub const OFFSET_BOUNDS: [f64; 3] = [0.05, 0.04, 0.03];
/// Upper bound of the tunable constraint slack.
pub const ALPHA_BOUND: f64 = 0.06;

/// Tabular reward for successful uploads plus the constraint slack `α`.
///
/// A successful upload at quality `a` earns `Σ_{a' ≤ a} ω_{a'}`; a failed
/// upload earns nothing. `ω_360p` is pinned to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardShape {
    pub alpha: f64,
    pub offsets: [f64; 4],
}

impl Default for RewardShape {
    fn default() -> Self {
        Self {
            alpha: 0.02,
            offsets: [1.0, OFFSET_BOUNDS[0], OFFSET_BOUNDS[1], OFFSET_BOUNDS[2]],
        }
    }
}

impl RewardShape {
    pub fn new(alpha: f64, omega_480: f64, omega_720: f64, omega_1080: f64) -> Result<Self> {
        let shape = Self {
            alpha,
            offsets: [1.0, omega_480, omega_720, omega_1080],
        };
        shape.validate()?;
        Ok(shape)
    }

    pub fn validate(&self) -> Result<()> {
        if self.offsets[0] != 1.0 {
            return Err(Error::Config(format!("omega_360p is fixed at 1, got {}", self.offsets[0])));
        }
        for (i, (&w, &hi)) in self.offsets[1..].iter().zip(&OFFSET_BOUNDS).enumerate() {
            if !(w > 0.0 && w <= hi) {
                let label = Quality::ALL[i + 1].label();
                return Err(Error::Config(format!("omega_{label} must lie in (0, {hi}], got {w}")));
            }
        }
        if !(0.0..=ALPHA_BOUND).contains(&self.alpha) {
            return Err(Error::Config(format!("alpha must lie in [0, {ALPHA_BOUND}], got {}", self.alpha)));
        }
        Ok(())
    }

    /// Reward of a successful upload at `quality`.
    pub fn payoff(&self, quality: Quality) -> f64 {
        self.offsets[..=quality.index()].iter().sum()
    }

    pub fn payoffs(&self) -> Vec<f64> {
        Quality::ALL.iter().map(|&q| self.payoff(q)).collect()
    }
}

/// Ground-truth knobs of the transcoding simulator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TranscodeConfig {
    /// Context length, including the leading constant feature.
    pub context_dim: usize,
    /// Size score per quality; strictly increasing and positive.
    pub size_scores: [f64; 4],
    /// Intercept and per-feature scale of the base success logit.
    pub base_logit: f64,
    pub base_spread: f64,
    /// Intercept and per-feature scale of the pre-softplus sensitivity.
    pub sensitivity_offset: f64,
    pub sensitivity_spread: f64,
    /// Share of the sensitivity direction added to the base logit weights.
    /// Positive values make the most quality-sensitive contexts also the
    /// most reliable ones at low quality.
    pub coupling: f64,
    /// The baseline keeps the highest quality whose success probability
    /// reaches this level.
    pub baseline_threshold: f64,
}

impl Default for TranscodeConfig {
    fn default() -> Self {
        Self {
            context_dim: 8,
            size_scores: [1.0, 2.0, 3.0, 4.0],
            base_logit: 2.5,
            base_spread: 0.4,
            sensitivity_offset: -2.0,
            sensitivity_spread: 1.6,
            coupling: 0.5,
            baseline_threshold: 0.9,
        }
    }
}

/// Simulated upload service.
///
/// Success probability for context `x` and quality `a` is
/// `logistic(w_gᵀx − s_a · softplus(w_hᵀx))`, strictly decreasing in the
/// size score `s_a` for every context. Source quality is uniform over the
/// four qualities and caps the available actions.
#[derive(Debug, Clone, PartialEq)]
pub struct TranscodeProblem {
    seed: u64,
    config: TranscodeConfig,
    base_weights: DVector<f64>,
    sensitivity_weights: DVector<f64>,
}

/// Serialized simulator: the generating seed and knobs plus the drawn
/// weights, which regenerate identically from the first two.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TranscodeDocument {
    pub version: u32,
    pub seed: u64,
    pub config: TranscodeConfig,
    pub base_weights: Vec<f64>,
    pub sensitivity_weights: Vec<f64>,
}

impl TranscodeDocument {
    pub const VERSION: u32 = 1;
}

impl From<&TranscodeProblem> for TranscodeDocument {
    fn from(p: &TranscodeProblem) -> Self {
        Self {
            version: Self::VERSION,
            seed: p.seed,
            config: p.config.clone(),
            base_weights: p.base_weights.iter().copied().collect(),
            sensitivity_weights: p.sensitivity_weights.iter().copied().collect(),
        }
    }
}

impl TryFrom<TranscodeDocument> for TranscodeProblem {
    type Error = Error;

    fn try_from(doc: TranscodeDocument) -> Result<Self> {
        if doc.version != TranscodeDocument::VERSION {
            return Err(Error::InvalidInput(format!("unsupported simulator version {}", doc.version)));
        }
        let problem = TranscodeProblem::generate(doc.seed, doc.config)?;
        let same = |a: &DVector<f64>, b: &[f64]| a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x == y);
        if !same(&problem.base_weights, &doc.base_weights) || !same(&problem.sensitivity_weights, &doc.sensitivity_weights) {
            return Err(Error::InvalidInput("weights do not match the seed and configuration".into()));
        }
        Ok(problem)
    }
}

/// One upload request.
#[derive(Debug, Clone, PartialEq)]
pub struct TranscodeContext {
    pub x: DVector<f64>,
    pub source: Quality,
    /// Indices of the qualities not above the source quality.
    pub available: Vec<usize>,
}

/// Result of one upload attempt.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TranscodeOutcome {
    pub success: bool,
    pub reward: f64,
    pub constraint: f64,
}

impl TranscodeProblem {
    pub fn generate(seed: u64, config: TranscodeConfig) -> Result<Self> {
        if config.context_dim < 2 {
            return Err(Error::Config("context needs a constant and at least one feature".into()));
        }
        let s = config.size_scores;
        if !(s[0] > 0.0 && s.windows(2).all(|w| w[1] > w[0])) {
            return Err(Error::Config("size scores must be positive and strictly increasing".into()));
        }
        if ![config.base_logit, config.base_spread, config.sensitivity_offset, config.sensitivity_spread, config.coupling]
            .iter()
            .all(|v| v.is_finite())
        {
            return Err(Error::Config("simulator weights must be finite".into()));
        }
        if !(config.baseline_threshold > 0.0 && config.baseline_threshold < 1.0) {
            return Err(Error::Config("baseline threshold must lie in (0, 1)".into()));
        }
        let d = config.context_dim;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scale = ((d - 1) as f64).sqrt();
        let mut draw = |intercept: f64, spread: f64| {
            DVector::from_fn(d, |i, _| {
                let z: f64 = StandardNormal.sample(&mut rng);
                if i == 0 {
                    intercept
                } else {
                    z * spread / scale
                }
            })
        };
        let mut base_weights = draw(config.base_logit, config.base_spread);
        let sensitivity_weights = draw(config.sensitivity_offset, config.sensitivity_spread);
        for i in 1..d {
            base_weights[i] += config.coupling * sensitivity_weights[i];
        }
        Ok(Self {
            seed,
            config,
            base_weights,
            sensitivity_weights,
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn config(&self) -> &TranscodeConfig {
        &self.config
    }

    pub fn context_dim(&self) -> usize {
        self.config.context_dim
    }

    pub fn base_weights(&self) -> &DVector<f64> {
        &self.base_weights
    }

    pub fn sensitivity_weights(&self) -> &DVector<f64> {
        &self.sensitivity_weights
    }

    /// Length of the per-action feature vector seen by learners.
    pub fn feature_dim(&self) -> usize {
        2 * self.config.context_dim
    }

    /// Samples a context and the source quality of the video.
    pub fn transcode_step(&self, rng: &mut dyn RngCore) -> TranscodeContext {
        let d = self.config.context_dim;
        let x = DVector::from_fn(d, |i, _| if i == 0 { 1.0 } else { StandardNormal.sample(&mut *rng) });
        let source = Quality::ALL[rng.random_range(0..4)];
        let available = (0..=source.index()).collect();
        TranscodeContext { x, source, available }
    }

    pub fn success_probability(&self, x: &DVector<f64>, quality: Quality) -> f64 {
        let sensitivity = softplus(self.sensitivity_weights.dot(x));
        logistic(self.base_weights.dot(x) - self.config.size_scores[quality.index()] * sensitivity)
    }

    /// The frozen status-quo policy: highest available quality whose success
    /// probability is at least the threshold, else the lowest quality.
    pub fn baseline_action(&self, ctx: &TranscodeContext) -> usize {
        ctx.available
            .iter()
            .rev()
            .copied()
            .find(|&a| self.success_probability(&ctx.x, Quality::ALL[a]) >= self.config.baseline_threshold)
            .unwrap_or(ctx.available[0])
    }

    /// Checks reliability monotonicity and the baseline rule on `contexts`
    /// sampled requests.
    pub fn invariant_report(&self, contexts: usize) -> Vec<(&'static str, bool)> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ 0x9e37_79b9_7f4a_7c15);
        let (mut monotone, mut baseline_rule) = (true, true);
        for _ in 0..contexts {
            let ctx = self.transcode_step(&mut rng);
            let p: Vec<f64> = Quality::ALL.iter().map(|&q| self.success_probability(&ctx.x, q)).collect();
            monotone &= p.windows(2).all(|w| w[1] < w[0]);
            let b = self.baseline_action(&ctx);
            let t = self.config.baseline_threshold;
            let above: Vec<usize> = ctx.available.iter().copied().filter(|&a| p[a] >= t).collect();
            baseline_rule &= match above.last() {
                Some(&a) => b == a,
                None => b == 0,
            };
        }
        vec![
            ("reliability decreases with quality", monotone),
            ("baseline keeps the highest quality above threshold", baseline_rule),
        ]
    }

    /// Per-action learner features `[x, s_a·x]`, one row per quality.
    pub fn action_features(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let d = self.config.context_dim;
        DMatrix::from_fn(4, 2 * d, |a, j| {
            if j < d {
                x[j]
            } else {
                self.config.size_scores[a] * x[j - d]
            }
        })
    }

    pub fn transcode_outcome(
        &self,
        ctx: &TranscodeContext,
        action: usize,
        shape: &RewardShape,
        rng: &mut dyn RngCore,
    ) -> Result<TranscodeOutcome> {
        if !ctx.available.contains(&action) {
            return Err(Error::InvalidInput(format!(
                "action {action} exceeds source quality {}",
                ctx.source.label()
            )));
        }
        let quality = Quality::ALL[action];
        let p = self.success_probability(&ctx.x, quality);
        let success = rng.random::<f64>() < p;
        Ok(outcome_for(success, quality, shape))
    }
}

pub(crate) fn outcome_for(success: bool, quality: Quality, shape: &RewardShape) -> TranscodeOutcome {
    TranscodeOutcome {
        success,
        reward: if success { shape.payoff(quality) } else { 0.0 },
        constraint: if success { 1.0 } else { 0.0 },
    }
}
