//! Experiment configuration: a JSON document with a default for every field.
//!
//! Values resolve in the order flag > `SAFEBANDIT_SEED` (seed only) > file >
//! default. Presets fill the horizon and realization count when the file
//! leaves them unset.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::{fingerprint, CellSpec, SuiteSettings};
use crate::policies::{LinearModelSettings, PolicyKind, RefitSchedule};
use crate::problems::{RewardShape, SyntheticConfig, TranscodeConfig};
use crate::tuning::{SearchSpace, TuningPlan};

pub const SEED_ENV: &str = "SAFEBANDIT_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvironmentKind {
    Synthetic,
    Transcode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// R = 200 realizations of T = 2,000 steps.
    Desk,
    /// R = 1,000 realizations of T = 10,000 steps.
    Paper,
}

impl Preset {
    pub fn horizon(self) -> usize {
        match self {
            Preset::Desk => 2_000,
            Preset::Paper => 10_000,
        }
    }

    pub fn realizations(self) -> usize {
        match self {
            Preset::Desk => 200,
            Preset::Paper => 1_000,
        }
    }
}

/// One policy of the run. `alpha` pins the policy's internal `α`; when
/// absent the policy uses each spec `α` of the sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyConfig {
    pub kind: PolicyKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Column label in the outputs; defaults to the kind's name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    /// Per-policy model hyperparameters, replacing the shared ones.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub models: Option<LinearModelSettings>,
}

impl PolicyConfig {
    pub fn of(kind: PolicyKind) -> Self {
        Self {
            kind,
            alpha: None,
            label: None,
            models: None,
        }
    }

    pub fn label(&self) -> String {
        self.label.clone().unwrap_or_else(|| self.kind.label().to_string())
    }
}

/// Settings of `tune`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TuneConfig {
    pub plan: TuningPlan,
    pub space: SearchSpace,
    /// Evaluate only this many evenly spaced shapes of the space.
    pub budget: Option<usize>,
    /// Seed of the simulated service being tuned.
    pub problem_seed: u64,
    /// Policy whose shape is searched; `ts_asc` or `vanilla_ts`.
    pub policy: PolicyKind,
}

impl Default for TuneConfig {
    fn default() -> Self {
        Self {
            plan: TuningPlan::default(),
            space: SearchSpace::default(),
            budget: None,
            problem_seed: 1,
            policy: PolicyKind::TsAsc,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub environment: EnvironmentKind,
    pub preset: Preset,
    /// Steps per episode; the preset's when unset.
    pub horizon: Option<usize>,
    /// Independent realizations; the preset's when unset.
    pub realizations: Option<usize>,
    pub seed: u64,
    /// Empty means the environment's defaults: TS-ASC and both CLUCB2
    /// variants on the synthetic problem, TS-ASC, vanilla TS and the
    /// baseline on the simulator.
    pub policies: Vec<PolicyConfig>,
    /// Empty means `10⁻¹ … 10⁻⁴` on the synthetic problem and
    /// `0.02, 0.04, 0.06` on the simulator.
    pub spec_alphas: Vec<f64>,
    /// Moving-average window of the violation rate.
    pub window: usize,
    /// Final steps averaged into the normalized constraint.
    pub last_k: usize,
    /// Final fraction of steps summarized as end-of-run levels.
    pub tail_fraction: f64,
    /// δ, λ, σ, S and L of the linear models.
    pub models: LinearModelSettings,
    pub synthetic: SyntheticConfig,
    pub transcode: TranscodeConfig,
    /// Offsets `ω_480p, ω_720p, ω_1080p` used by `run` on the simulator.
    pub reward_offsets: [f64; 3],
    pub refit: RefitSchedule,
    pub tune: TuneConfig,
    pub output_dir: PathBuf,
    pub workers: usize,
    /// Keep per-step traces so `replay` can re-derive the metrics.
    pub save_traces: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let shape = RewardShape::default();
        Self {
            environment: EnvironmentKind::Synthetic,
            preset: Preset::Desk,
            horizon: None,
            realizations: None,
            seed: 1,
            policies: Vec::new(),
            spec_alphas: Vec::new(),
            window: 100,
            last_k: 100,
            tail_fraction: 0.1,
            models: LinearModelSettings::default(),
            synthetic: SyntheticConfig::default(),
            transcode: TranscodeConfig::default(),
            reward_offsets: [shape.offsets[1], shape.offsets[2], shape.offsets[3]],
            refit: RefitSchedule::default(),
            tune: TuneConfig::default(),
            output_dir: PathBuf::from("runs/latest"),
            workers: 1,
            save_traces: false,
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub preset: Option<Preset>,
    pub horizon: Option<usize>,
    pub realizations: Option<usize>,
    pub output_dir: Option<PathBuf>,
    pub workers: Option<usize>,
    pub save_traces: bool,
}

impl ExperimentConfig {
    /// Parses JSON, naming the offending field and position on failure.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            if path == "." {
                Error::Config(inner.to_string())
            } else {
                Error::Config(format!("{path}: {inner}"))
            }
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Applies the environment seed and then the flags.
    pub fn apply(&mut self, env_seed: Option<&str>, flags: &Overrides) -> Result<()> {
        if let Some(raw) = env_seed {
            self.seed = raw
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("{SEED_ENV}={raw:?} is not an unsigned integer")))?;
        }
        if let Some(seed) = flags.seed {
            self.seed = seed;
        }
        if let Some(preset) = flags.preset {
            self.preset = preset;
        }
        if flags.horizon.is_some() {
            self.horizon = flags.horizon;
        }
        if flags.realizations.is_some() {
            self.realizations = flags.realizations;
        }
        if let Some(dir) = &flags.output_dir {
            self.output_dir = dir.clone();
        }
        if let Some(w) = flags.workers {
            self.workers = w;
        }
        self.save_traces |= flags.save_traces;
        Ok(())
    }

    /// Fills preset- and environment-dependent fields and checks every
    /// section.
    pub fn resolve(mut self) -> Result<Self> {
        self.horizon = Some(self.horizon.unwrap_or(self.preset.horizon()));
        self.realizations = Some(self.realizations.unwrap_or(self.preset.realizations()));
        if self.policies.is_empty() {
            let kinds: &[PolicyKind] = match self.environment {
                EnvironmentKind::Synthetic => &[PolicyKind::TsAsc, PolicyKind::Clucb2AscC, PolicyKind::Clucb2AscI],
                EnvironmentKind::Transcode => &[PolicyKind::TsAsc, PolicyKind::VanillaTs, PolicyKind::Baseline],
            };
            self.policies = kinds.iter().copied().map(PolicyConfig::of).collect();
        }
        if self.spec_alphas.is_empty() {
            self.spec_alphas = match self.environment {
                EnvironmentKind::Synthetic => vec![1e-1, 1e-2, 1e-3, 1e-4],
                EnvironmentKind::Transcode => vec![0.02, 0.04, 0.06],
            };
        }
        self.validate()?;
        Ok(self)
    }

    pub fn horizon(&self) -> usize {
        self.horizon.unwrap_or(self.preset.horizon())
    }

    pub fn realizations(&self) -> usize {
        self.realizations.unwrap_or(self.preset.realizations())
    }

    pub fn validate(&self) -> Result<()> {
        self.suite_settings().validate()?;
        if self.policies.is_empty() {
            return Err(Error::Config("policies: at least one policy is required".into()));
        }
        if self.spec_alphas.is_empty() {
            return Err(Error::Config("spec_alphas: at least one value is required".into()));
        }
        if let Some(a) = self.spec_alphas.iter().find(|a| !(0.0..1.0).contains(*a)) {
            return Err(Error::Config(format!("spec_alphas: {a} lies outside [0, 1)")));
        }
        for (i, p) in self.policies.iter().enumerate() {
            if let Some(a) = p.alpha {
                if !(0.0..1.0).contains(&a) {
                    return Err(Error::Config(format!("policies[{i}].alpha: {a} lies outside [0, 1)")));
                }
            }
            if self.environment == EnvironmentKind::Transcode
                && matches!(p.kind, PolicyKind::Clucb2AscC | PolicyKind::Clucb2AscI)
            {
                return Err(Error::Config(format!(
                    "policies[{i}].kind: {} needs linear-Gaussian metrics and cannot run on the transcode simulator",
                    p.kind.label()
                )));
            }
        }
        let labels: Vec<String> = self.policies.iter().map(PolicyConfig::label).collect();
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].contains(l) {
                return Err(Error::Config(format!("policies[{i}].label: duplicate label {l:?}")));
            }
        }
        if self.environment == EnvironmentKind::Transcode {
            for &a in &self.spec_alphas {
                self.shape(a).map_err(|e| Error::Config(format!("spec_alphas: {e}")))?;
            }
            for (i, p) in self.policies.iter().enumerate() {
                if let Some(a) = p.alpha {
                    self.shape(a).map_err(|e| Error::Config(format!("policies[{i}].alpha: {e}")))?;
                }
            }
        }
        self.tune.plan.validate()?;
        if self.tune.budget == Some(0) {
            return Err(Error::Config("tune.budget must be positive".into()));
        }
        Ok(())
    }

    pub fn suite_settings(&self) -> SuiteSettings {
        SuiteSettings {
            horizon: self.horizon(),
            realizations: self.realizations(),
            master_seed: self.seed,
            window: self.window,
            last_k: self.last_k,
            tail_fraction: self.tail_fraction,
            workers: self.workers,
        }
    }

    /// The experiment grid: every policy under every spec `α`.
    pub fn cells(&self) -> Vec<CellSpec> {
        self.policies
            .iter()
            .flat_map(|p| {
                self.spec_alphas.iter().map(move |&alpha| CellSpec {
                    label: p.label(),
                    kind: p.kind,
                    spec_alpha: alpha,
                    policy_alpha: p.alpha.unwrap_or(alpha),
                    models: p.models.clone(),
                })
            })
            .collect()
    }

    /// The reward shape of `run` on the simulator at constraint level `alpha`.
    pub fn shape(&self, alpha: f64) -> Result<RewardShape> {
        let [a, b, c] = self.reward_offsets;
        RewardShape::new(alpha, a, b, c)
    }

    /// Digest of everything that determines output contents. Worker count,
    /// output location and trace retention are excluded: they never change
    /// what is written.
    pub fn fingerprint(&self) -> Result<String> {
        let mut view = self.clone();
        view.workers = 0;
        view.output_dir = PathBuf::new();
        view.save_traces = false;
        view.tune.plan.workers = 0;
        fingerprint(&view)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips() {
        let c = ExperimentConfig::default();
        let back = ExperimentConfig::from_json(&c.to_json().unwrap()).unwrap();
        assert_eq!(c, back);
        assert_eq!(ExperimentConfig::from_json("{}").unwrap(), c);
    }

    #[test]
    fn unknown_key_names_the_field() {
        let err = ExperimentConfig::from_json("{\n  \"models\": {\"lamda\": 2}\n}").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("models"), "{msg}");
        assert!(msg.contains("lamda"), "{msg}");
        assert!(msg.contains("line 2"), "{msg}");
    }

    #[test]
    fn precedence_is_flag_env_file_default() {
        let mut c = ExperimentConfig::from_json(r#"{"seed": 5}"#).unwrap();
        assert_eq!(c.seed, 5);
        c.apply(Some("9"), &Overrides::default()).unwrap();
        assert_eq!(c.seed, 9);
        c.apply(
            Some("9"),
            &Overrides {
                seed: Some(3),
                ..Overrides::default()
            },
        )
        .unwrap();
        assert_eq!(c.seed, 3);
        assert!(c.apply(Some("x"), &Overrides::default()).is_err());
    }

    #[test]
    fn presets_fill_unset_sizes_only() {
        let paper = ExperimentConfig {
            preset: Preset::Paper,
            ..ExperimentConfig::default()
        }
        .resolve()
        .unwrap();
        assert_eq!((paper.horizon(), paper.realizations()), (10_000, 1_000));
        let pinned = ExperimentConfig {
            horizon: Some(50),
            window: 10,
            last_k: 10,
            ..ExperimentConfig::default()
        }
        .resolve()
        .unwrap();
        assert_eq!((pinned.horizon(), pinned.realizations()), (50, 200));
    }

    #[test]
    fn fingerprint_ignores_workers_and_location() {
        let a = ExperimentConfig::default();
        let b = ExperimentConfig {
            workers: 4,
            output_dir: "elsewhere".into(),
            ..a.clone()
        };
        assert_eq!(a.fingerprint().unwrap(), b.fingerprint().unwrap());
        let c = ExperimentConfig { seed: 2, ..a.clone() };
        assert_ne!(a.fingerprint().unwrap(), c.fingerprint().unwrap());
    }

    #[test]
    fn transcode_rejects_ucb_policies_and_large_alphas() {
        let c = ExperimentConfig {
            environment: EnvironmentKind::Transcode,
            ..ExperimentConfig::default()
        };
        let resolved = c.clone().resolve().unwrap();
        assert_eq!(resolved.cells().len(), 9);
        let ucb = ExperimentConfig {
            policies: vec![PolicyConfig::of(PolicyKind::Clucb2AscI)],
            ..c.clone()
        };
        assert!(matches!(ucb.resolve(), Err(Error::Config(_))));
        let loose = ExperimentConfig {
            spec_alphas: vec![0.1],
            ..c
        };
        assert!(matches!(loose.resolve(), Err(Error::Config(m)) if m.starts_with("spec_alphas")));
    }

    #[test]
    fn cells_cross_policies_with_alphas() {
        let mut c = ExperimentConfig::default().resolve().unwrap();
        c.policies[1].alpha = Some(0.05);
        let cells = c.cells();
        assert_eq!(cells.len(), 12);
        assert_eq!(cells[4].policy_alpha, 0.05);
        assert_eq!(cells[4].spec_alpha, 0.1);
    }
}
