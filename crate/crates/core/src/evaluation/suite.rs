use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::aggregate::{AggregateSeries, Aggregator, Metric, ReducedTrace};
use super::episode::{run_episode, EpisodeTrace};
use super::env::{SyntheticEnv, TranscodeEnv};
use super::metrics::{normalized_constraint_last_k, MeanSem, Welford};
use crate::error::{Error, Result};
use crate::policies::{build_linear_policy, build_success_policy, LinearModelSettings, PolicyKind, RefitSchedule};
use crate::problems::{generate_synthetic, RewardShape, SyntheticConfig, TranscodeConfig, TranscodeProblem};
use crate::rng::mix_seed;

/// Size and seeding of a multi-realization run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteSettings {
    pub horizon: usize,
    pub realizations: usize,
    pub master_seed: u64,
    /// Moving-average window of the violation rate.
    pub window: usize,
    /// Steps at the end of each episode the normalized constraint averages over.
    pub last_k: usize,
    /// Fraction of final steps summarized as end-of-run levels.
    pub tail_fraction: f64,
    /// Parallel realizations. Never serialized: results do not depend on it.
    #[serde(skip, default = "one_worker")]
    pub workers: usize,
}

fn one_worker() -> usize {
    1
}

impl SuiteSettings {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 || self.realizations == 0 || self.workers == 0 {
            return Err(Error::Config("horizon, realizations and workers must be positive".into()));
        }
        if self.window == 0 || self.window > self.horizon {
            return Err(Error::Config(format!(
                "window {} must lie in 1..={}",
                self.window, self.horizon
            )));
        }
        if self.last_k == 0 || self.last_k > self.horizon {
            return Err(Error::Config(format!(
                "last_k {} must lie in 1..={}",
                self.last_k, self.horizon
            )));
        }
        if !(self.tail_fraction > 0.0 && self.tail_fraction <= 1.0) {
            return Err(Error::Config(format!("tail fraction {} must lie in (0, 1]", self.tail_fraction)));
        }
        Ok(())
    }

    fn tail_len(&self) -> usize {
        ((self.horizon as f64 * self.tail_fraction).ceil() as usize).clamp(1, self.horizon)
    }
}

/// One column of the experiment grid: a labelled policy under a spec `α`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSpec {
    pub label: String,
    pub kind: PolicyKind,
    pub spec_alpha: f64,
    /// `α` the policy uses internally.
    pub policy_alpha: f64,
    /// Model hyperparameters replacing the suite's shared ones.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub models: Option<LinearModelSettings>,
}

/// Per-realization end-of-run figures of one cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RealizationStats {
    pub normalized_constraint: f64,
    pub violation_tail: f64,
    pub regret_tail: f64,
    pub regret_unconstrained_tail: f64,
}

impl RealizationStats {
    fn from_trace(trace: &EpisodeTrace, reduced: &ReducedTrace, settings: &SuiteSettings) -> Result<Self> {
        let horizon = trace.horizon();
        let tail = settings.tail_len();
        let first_tail_step = horizon - tail + 1;
        let tail_avg = |metric: Metric| -> f64 {
            let (_, first, values) = reduced.series.iter().find(|(m, _, _)| *m == metric).expect("metric present");
            let skip = (first_tail_step as u64).saturating_sub(*first) as usize;
            let tail = &values[skip.min(values.len())..];
            tail.iter().sum::<f64>() / tail.len().max(1) as f64
        };
        Ok(Self {
            normalized_constraint: normalized_constraint_last_k(trace, settings.last_k)?,
            violation_tail: tail_avg(Metric::ViolationMovingAverage),
            regret_tail: tail_avg(Metric::Regret),
            regret_unconstrained_tail: tail_avg(Metric::RegretUnconstrained),
        })
    }
}

/// Mean and SEM across realizations of the end-of-run figures of a cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub policy: String,
    pub kind: PolicyKind,
    pub policy_alpha: f64,
    pub spec_alpha: f64,
    pub realizations: usize,
    /// Over the last `last_k` steps.
    pub normalized_constraint: MeanSem,
    /// Moving-average violation rate over the final `tail_fraction` of steps.
    pub violation_tail: MeanSem,
    pub regret_tail: MeanSem,
    pub regret_unconstrained_tail: MeanSem,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub spec: CellSpec,
    pub summary: CellSummary,
    pub series: AggregateSeries,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub settings: SuiteSettings,
    pub fingerprint: String,
    pub cells: Vec<CellReport>,
}

impl SuiteReport {
    pub fn cell(&self, label: &str, spec_alpha: f64) -> Option<&CellReport> {
        self.cells
            .iter()
            .find(|c| c.spec.label == label && c.spec.spec_alpha == spec_alpha)
    }

    pub fn series(&self) -> Vec<AggregateSeries> {
        self.cells.iter().map(|c| c.series.clone()).collect()
    }

    pub fn summaries(&self) -> Vec<CellSummary> {
        self.cells.iter().map(|c| c.summary.clone()).collect()
    }
}

struct CellAccumulator {
    series: Aggregator,
    stats: [Welford; 4],
}

impl CellAccumulator {
    fn push(&mut self, reduced: &ReducedTrace, stats: &RealizationStats) -> Result<()> {
        self.series.push(reduced)?;
        let values = [
            stats.normalized_constraint,
            stats.violation_tail,
            stats.regret_tail,
            stats.regret_unconstrained_tail,
        ];
        for (w, v) in self.stats.iter_mut().zip(values) {
            w.push(v);
        }
        Ok(())
    }
}

/// Folds traces into per-cell aggregates, one realization at a time in
/// index order.
struct SuiteFolder<'a> {
    settings: &'a SuiteSettings,
    cells: &'a [CellSpec],
    acc: Vec<CellAccumulator>,
}

impl<'a> SuiteFolder<'a> {
    fn new(settings: &'a SuiteSettings, cells: &'a [CellSpec], fingerprint: &str) -> Self {
        Self {
            settings,
            cells,
            acc: cells
                .iter()
                .map(|_| CellAccumulator {
                    series: Aggregator::new(fingerprint),
                    stats: Default::default(),
                })
                .collect(),
        }
    }

    fn reduce(&self, traces: &[EpisodeTrace]) -> Result<Vec<(ReducedTrace, RealizationStats)>> {
        if traces.len() != self.cells.len() {
            return Err(Error::Internal(format!(
                "expected {} traces per realization, got {}",
                self.cells.len(),
                traces.len()
            )));
        }
        traces
            .iter()
            .map(|t| {
                let reduced = ReducedTrace::from_trace(t, self.settings.window)?;
                let stats = RealizationStats::from_trace(t, &reduced, self.settings)?;
                Ok((reduced, stats))
            })
            .collect()
    }

    fn push(&mut self, reduced: &[(ReducedTrace, RealizationStats)]) -> Result<()> {
        for (acc, (r, s)) in self.acc.iter_mut().zip(reduced) {
            acc.push(r, s)?;
        }
        Ok(())
    }

    fn finish(self, fingerprint: String) -> Result<SuiteReport> {
        let cells = self
            .cells
            .iter()
            .zip(self.acc)
            .map(|(spec, acc)| {
                let series = acc.series.finish()?;
                let [nc, viol, regret, regret_u] = acc.stats.map(|w| w.summary());
                Ok(CellReport {
                    summary: CellSummary {
                        policy: spec.label.clone(),
                        kind: spec.kind,
                        policy_alpha: spec.policy_alpha,
                        spec_alpha: spec.spec_alpha,
                        realizations: series.realizations,
                        normalized_constraint: nc,
                        violation_tail: viol,
                        regret_tail: regret,
                        regret_unconstrained_tail: regret_u,
                    },
                    spec: spec.clone(),
                    series,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SuiteReport {
            settings: self.settings.clone(),
            fingerprint,
            cells,
        })
    }
}

/// Runs `realizations` independent realizations of every cell and aggregates
/// them.
///
/// `run` receives a realization index and its key and returns one trace per
/// cell, in cell order. Realizations are computed on `workers` threads in
/// chunks and folded in index order, so the report does not depend on the
/// worker count. Traces are additionally written to `trace_dir` when given.
pub fn run_suite<F>(
    settings: &SuiteSettings,
    cells: &[CellSpec],
    fingerprint: &str,
    trace_dir: Option<&Path>,
    run: F,
) -> Result<SuiteReport>
where
    F: Fn(usize, u64) -> Result<Vec<EpisodeTrace>> + Sync,
{
    settings.validate()?;
    if cells.is_empty() {
        return Err(Error::Config("no cells to run".into()));
    }
    let cell_dirs = match trace_dir {
        Some(dir) => Some(prepare_trace_dirs(dir, settings, cells)?),
        None => None,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(settings.workers)
        .build()
        .map_err(|e| Error::Internal(format!("cannot start worker pool: {e}")))?;
    let mut folder = SuiteFolder::new(settings, cells, fingerprint);
    let chunk = (settings.workers * 4).max(1);
    let mut start = 0;
    while start < settings.realizations {
        let end = (start + chunk).min(settings.realizations);
        let results: Vec<Result<Vec<(ReducedTrace, RealizationStats)>>> = pool.install(|| {
            (start..end)
                .into_par_iter()
                .map(|i| {
                    let mut traces = run(i, mix_seed(settings.master_seed, i as u64))?;
                    for (t, spec) in traces.iter_mut().zip(cells) {
                        t.policy = spec.label.clone();
                    }
                    if let Some(dirs) = &cell_dirs {
                        for (t, dir) in traces.iter().zip(dirs) {
                            fs::write(dir.join(trace_file_name(i)), t.to_jsonl()?)?;
                        }
                    }
                    folder.reduce(&traces)
                })
                .collect()
        });
        for r in results {
            folder.push(&r?)?;
        }
        start = end;
    }
    folder.finish(fingerprint.to_string())
}

fn trace_file_name(realization: usize) -> String {
    format!("r{realization:06}.jsonl")
}

const CELL_FILE: &str = "cell.json";

#[derive(Serialize, Deserialize)]
struct CellFile {
    spec: CellSpec,
    settings: SuiteSettings,
}

fn prepare_trace_dirs(dir: &Path, settings: &SuiteSettings, cells: &[CellSpec]) -> Result<Vec<PathBuf>> {
    cells
        .iter()
        .enumerate()
        .map(|(i, spec)| {
            let d = dir.join(format!("{i:03}_{}_{}", spec.label, spec.spec_alpha));
            fs::create_dir_all(&d)?;
            let meta = CellFile {
                spec: spec.clone(),
                settings: settings.clone(),
            };
            fs::write(d.join(CELL_FILE), serde_json::to_string_pretty(&meta)?)?;
            Ok(d)
        })
        .collect()
}

/// Recomputes a [`SuiteReport`] from traces persisted by [`run_suite`].
/// `window`, `last_k` and `tail_fraction` may differ from the original run.
pub fn replay_traces(
    dir: &Path,
    window: Option<usize>,
    last_k: Option<usize>,
    tail_fraction: Option<f64>,
    fingerprint: &str,
) -> Result<SuiteReport> {
    let mut cell_dirs: Vec<PathBuf> = fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<Vec<_>>>()?
        .into_iter()
        .filter(|p| p.join(CELL_FILE).is_file())
        .collect();
    if cell_dirs.is_empty() {
        return Err(Error::InvalidInput(format!("no trace cells under {}", dir.display())));
    }
    cell_dirs.sort();
    let mut metas = Vec::new();
    for d in &cell_dirs {
        let meta: CellFile = serde_json::from_str(&fs::read_to_string(d.join(CELL_FILE))?)?;
        metas.push(meta);
    }
    let mut settings = metas[0].settings.clone();
    settings.window = window.unwrap_or(settings.window);
    settings.last_k = last_k.unwrap_or(settings.last_k);
    settings.tail_fraction = tail_fraction.unwrap_or(settings.tail_fraction);
    settings.validate()?;
    let cells: Vec<CellSpec> = metas.into_iter().map(|m| m.spec).collect();
    let mut folder = SuiteFolder::new(&settings, &cells, fingerprint);
    for i in 0..settings.realizations {
        let traces = cell_dirs
            .iter()
            .zip(&cells)
            .map(|(d, spec)| {
                let text = fs::read_to_string(d.join(trace_file_name(i)))?;
                EpisodeTrace::from_jsonl(&spec.label, spec.spec_alpha, &text)
            })
            .collect::<Result<Vec<_>>>()?;
        let reduced = folder.reduce(&traces)?;
        folder.push(&reduced)?;
    }
    folder.finish(fingerprint.to_string())
}

/// The synthetic experiment: policies × spec `α` values, one problem per
/// realization shared by all cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSuite {
    pub settings: SuiteSettings,
    pub problem: SyntheticConfig,
    pub models: LinearModelSettings,
    pub cells: Vec<CellSpec>,
}

impl SyntheticSuite {
    /// Every policy under every `α`, with the policy using the spec `α`.
    pub fn grid(settings: SuiteSettings, kinds: &[PolicyKind], spec_alphas: &[f64]) -> Self {
        let cells = kinds
            .iter()
            .flat_map(|&kind| {
                spec_alphas.iter().map(move |&alpha| CellSpec {
                    label: kind.label().to_string(),
                    kind,
                    spec_alpha: alpha,
                    policy_alpha: alpha,
                    models: None,
                })
            })
            .collect();
        Self {
            settings,
            problem: SyntheticConfig::default(),
            models: LinearModelSettings::default(),
            cells,
        }
    }

    /// Largest spec `α` of the grid; each realization's problem is drawn so
    /// that the trade-off condition holds at it, hence at every smaller `α`.
    pub fn generation_alpha(&self) -> f64 {
        self.cells.iter().map(|c| c.spec_alpha).fold(0.0, f64::max)
    }

    /// Traces of the realization seeded by `key`, one per cell.
    pub fn run_realization(&self, key: u64) -> Result<Vec<EpisodeTrace>> {
        let base = generate_synthetic(key, self.generation_alpha(), &self.problem)?;
        self.cells
            .iter()
            .map(|cell| {
                let problem = base.with_spec_alpha(cell.spec_alpha)?;
                let env = SyntheticEnv::new(&problem);
                let models = cell.models.as_ref().unwrap_or(&self.models);
                let mut policy = build_linear_policy(cell.kind, cell.policy_alpha, problem.dim(), models)?;
                run_episode(&env, policy.as_mut(), self.settings.horizon, key)
            })
            .collect()
    }

    pub fn run(&self, fingerprint: &str, trace_dir: Option<&Path>) -> Result<SuiteReport> {
        run_suite(&self.settings, &self.cells, fingerprint, trace_dir, |_, key| {
            self.run_realization(key)
        })
    }
}

/// Policies on the upload simulator. Each realization draws its own
/// service from the realization key; the spec `α` of a cell becomes the
/// shape's `α`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscodeSuite {
    pub settings: SuiteSettings,
    pub problem: TranscodeConfig,
    pub shape: RewardShape,
    pub lambda: f64,
    pub refit: RefitSchedule,
    pub cells: Vec<CellSpec>,
}

impl TranscodeSuite {
    pub fn run_realization(&self, key: u64) -> Result<Vec<EpisodeTrace>> {
        let problem = TranscodeProblem::generate(key, self.problem.clone())?;
        self.cells
            .iter()
            .map(|cell| {
                let shape = RewardShape { alpha: cell.spec_alpha, ..self.shape };
                shape.validate()?;
                let env = TranscodeEnv::new(&problem, shape);
                let lambda = cell.models.as_ref().map_or(self.lambda, |m| m.lambda);
                let mut policy = build_success_policy(
                    cell.kind,
                    cell.policy_alpha,
                    problem.feature_dim(),
                    lambda,
                    shape.payoffs(),
                    self.refit,
                )?;
                run_episode(&env, policy.as_mut(), self.settings.horizon, key)
            })
            .collect()
    }

    pub fn run(&self, fingerprint: &str, trace_dir: Option<&Path>) -> Result<SuiteReport> {
        run_suite(&self.settings, &self.cells, fingerprint, trace_dir, |_, key| {
            self.run_realization(key)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(workers: usize) -> SyntheticSuite {
        SyntheticSuite::grid(
            SuiteSettings {
                horizon: 200,
                realizations: 6,
                master_seed: 11,
                window: 20,
                last_k: 50,
                tail_fraction: 0.1,
                workers,
            },
            &[PolicyKind::TsAsc, PolicyKind::Baseline],
            &[0.1, 0.01],
        )
    }

    #[test]
    fn report_is_independent_of_worker_count() {
        let one = small(1).run("fp", None).unwrap();
        let four = small(4).run("fp", None).unwrap();
        assert_eq!(one.cells, four.cells);
        assert_eq!(one.cells.len(), 4);
    }

    #[test]
    fn baseline_cell_is_exactly_normalized() {
        let report = small(1).run("fp", None).unwrap();
        let b = &report.cell("baseline", 0.01).unwrap().summary;
        assert_eq!(b.normalized_constraint.mean, 1.0);
        assert_eq!(b.violation_tail.mean, 0.0);
        assert_eq!(b.realizations, 6);
    }

    #[test]
    fn replay_reproduces_the_report() {
        let dir = tempfile::tempdir().unwrap();
        let report = small(2).run("fp", Some(dir.path())).unwrap();
        let replayed = replay_traces(dir.path(), None, None, None, "fp").unwrap();
        assert_eq!(report.cells, replayed.cells);
    }

    #[test]
    fn invalid_settings_are_rejected() {
        let mut suite = small(1);
        suite.settings.window = 500;
        assert!(matches!(suite.run("fp", None), Err(Error::Config(_))));
    }
}
